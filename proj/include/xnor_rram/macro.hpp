#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "xnor_rram/common.hpp"
#include "xnor_rram/device.hpp"

namespace xnor_rram {

/// Two complementary 1T1R cells. The positive cell is selected when the activation is +1.
struct XnorBitcell {
    DeviceState pos_cell;
    DeviceState neg_cell;
};

/// 64x64 binary weight tile, row-major [row][col], entries in {+1, -1}.
class WeightTile {
public:
    WeightTile() { values_.fill(1); }

    Bit operator()(int row, int col) const { return values_[index(row, col)]; }
    Bit& operator()(int row, int col) { return values_[index(row, col)]; }

    std::array<Bit, kRows> column(int col) const;
    std::span<const Bit> data() const { return values_; }

    static WeightTile random(Rng& rng);

    bool operator==(const WeightTile&) const = default;

private:
    static std::size_t index(int row, int col) {
        return static_cast<std::size_t>(row) * kCols + static_cast<std::size_t>(col);
    }
    std::array<Bit, kRows * kCols> values_{};
};

/// Pull-up header: a linear resistor selected by a strength code 1..8.
struct HeaderConfig {
    int strength = 4;
    std::array<double, 8> pullup_ohms{};

    double pullup() const;

    /// Table 8k/s rescaled so that R_pu(anchor) equals the nominal pull-down at
    /// bitcount 0, which maximizes the transfer-curve slope there for that strength.
    static HeaderConfig fitted(double r_lrs = 6000.0, double r_hrs = 3e6, int strength = 4,
                               int anchor_strength = 4);

    /// Every strength uses the same pull-up resistance scale 8k/s (unfitted).
    static HeaderConfig nominal(int strength = 4);
};

void validate(const HeaderConfig& h);

struct BitlineResult {
    double voltage = 0.0;
    int selected_lrs = 0;  // m
    int bitcount = 0;      // b = 2m - 64
};

struct CellReport {
    int row = 0;
    int col = 0;
    bool positive = true;  // pos_cell or neg_cell
    bool lrs = true;       // target state
    WriteVerifyReport report;
};

struct ProgrammingReport {
    std::vector<CellReport> cells;  // 8192 entries, row-major, pos before neg
    int lrs_converged = 0;
    int hrs_converged = 0;
    int lrs_total = 0;
    int hrs_total = 0;

    std::vector<double> lrs_resistances() const;
    std::vector<double> hrs_resistances() const;
    double yield() const;
};

/// Per-cell program/refresh policy.
struct ProgrammingTargets {
    LrsTarget lrs;
    HrsTarget hrs;
};

/// Ideal XNOR-accumulate: sum of XNOR(input_i, weight_i) = 2m - 64.
int ideal_bitcount(std::span<const Bit> input, std::span<const Bit> weights);

/// Number of positions where input equals weight.
int matches(std::span<const Bit> input, std::span<const Bit> weights);

/// Random input vector with exactly `m` positions agreeing with `weights`.
InputVector input_with_matches(std::span<const Bit> weights, int m, Rng& rng);

class MacroArray {
public:
    explicit MacroArray(double vdd = 1.2);

    double vdd() const { return vdd_; }

    /// Write-verify every cell: weight +1 puts the positive cell in LRS and the negative
    /// cell in HRS, weight -1 the reverse. Each cell draws from its own stream keyed by
    /// (seed, row, col, side).
    ProgrammingReport program_weights(const WeightTile& weights, const DeviceModelParams& params,
                                      const ProgrammingTargets& targets, std::uint64_t seed);

    /// Re-programs the same weights with verify-first refresh; `round` keys the streams.
    ProgrammingReport reprogram(const DeviceModelParams& params, const ProgrammingTargets& targets,
                                std::uint64_t seed, int round);

    /// Deterministic array with every LRS cell at r_lrs and every HRS cell at r_hrs.
    void program_exact(const WeightTile& weights, double r_lrs, double r_hrs);

    BitlineResult evaluate_bitline(int col, const InputVector& input, const HeaderConfig& header) const;

    /// Pull-down resistance of a column for the given input.
    double pulldown_resistance(int col, const InputVector& input) const;

    /// Expected pull-down resistance at bitcount b when the matching positions are
    /// drawn uniformly: 1 / E[conductance].
    double expected_pulldown(int col, int bitcount) const;

    bool column_programmed(int col) const { return programmed_[static_cast<std::size_t>(col)]; }
    bool fully_programmed() const;
    const WeightTile& weights() const { return weights_; }
    const XnorBitcell& bitcell(int row, int col) const;

    /// 64x64x2 little-endian float64 ohms, row-major, positive cell first.
    /// Pristine cells are written as 0.
    void save_snapshot(std::ostream& os) const;
    void save_snapshot(const std::filesystem::path& path) const;
    static MacroArray load_snapshot(std::istream& is, double vdd = 1.2);
    static MacroArray load_snapshot(const std::filesystem::path& path, double vdd = 1.2);

private:
    void refresh_conductance(int row, int col);
    void mark_programmed();

    double vdd_;
    std::vector<XnorBitcell> cells_;       // [row][col]
    std::vector<double> conductance_;      // [col][row][side], side 0 = pos
    std::vector<std::uint8_t> low_side_;   // 1 where that side is the bitcell's lower resistance
    std::array<bool, kCols> programmed_{};
    WeightTile weights_;
};

struct TransferPoint {
    int bitcount = 0;
    double mean_v = 0.0;
    double std_v = 0.0;
};

/// Voltage statistics for every achievable bitcount (-64, -62, ..., 64) over
/// `samples` random inputs per bitcount.
std::vector<TransferPoint> transfer_curve(const MacroArray& macro, int col, const HeaderConfig& header,
                                          int samples, Rng& rng);

}  // namespace xnor_rram
