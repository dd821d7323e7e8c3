#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "xnor_rram/common.hpp"
#include "xnor_rram/macro.hpp"

namespace xnor_rram {

// ---------------------------------------------------------------------------
// Comparators and thermometer decode
// ---------------------------------------------------------------------------

/// 1 iff v_in + offset > v_ref. A 1 means the bitline sits above the threshold,
/// i.e. the bitcount is below the comparator's reference bitcount. Ties give 0.
inline int compare(double v_in, double v_ref, double offset) { return (v_in + offset > v_ref) ? 1 : 0; }

using RefSet = std::array<double, kComparators>;
using OffsetSet = std::array<double, kComparators>;
using OffsetBank = std::array<OffsetSet, kAdcCount>;

/// Level = 7 - (number of comparators firing). Counting ones tolerates bubbles
/// from non-monotone calibrated reference sets.
int digitize(double v_rbl, const RefSet& refs, const OffsetSet& offsets);

// ---------------------------------------------------------------------------
// Ideal quantizers on the bitcount axis
// ---------------------------------------------------------------------------

/// Level l = |{e in edges : b > e}|; dequant_values[l] is the reconstructed bitcount.
struct QuantizerSpec {
    std::vector<int> edges;
    std::vector<int> dequant_values;

    int levels() const { return static_cast<int>(dequant_values.size()); }

    /// Edges -13, -9, ..., 11 with bin centers -15, -11, ..., 13.
    static QuantizerSpec confined();
    /// Uniform bins over [-64, 64] with 2^bits levels, dequantized at bin centers.
    static QuantizerSpec full_range(int bits);
};

void validate(const QuantizerSpec& q);

int quantize(int bitcount, const QuantizerSpec& spec);
int dequantize(int level, const QuantizerSpec& spec);
int confined_quantize(int bitcount, const QuantizerSpec& spec = QuantizerSpec::confined());
int full_range_quantize(int bitcount, int bits);

// ---------------------------------------------------------------------------
// Reference-voltage configuration and calibration
// ---------------------------------------------------------------------------

enum class RefScheme : std::uint8_t { unified_1, per_adc_8, per_column_64 };

std::string_view to_string(RefScheme s);
RefScheme parse_ref_scheme(std::string_view s);
int ref_set_count(RefScheme s);

struct AdcConfig {
    RefScheme scheme = RefScheme::per_adc_8;
    std::vector<RefSet> ref_sets;
    OffsetBank offsets{};

    /// Column c is multiplexed onto ADC c / 8.
    static int adc_of_column(int col) { return col / kColumnsPerAdc; }
    int ref_set_of_column(int col) const;
    const RefSet& refs_for_column(int col) const { return ref_sets.at(static_cast<std::size_t>(ref_set_of_column(col))); }
    const OffsetSet& offsets_for_column(int col) const { return offsets.at(static_cast<std::size_t>(adc_of_column(col))); }

    int digitize_column(int col, double v_rbl) const {
        return digitize(v_rbl, refs_for_column(col), offsets_for_column(col));
    }

    /// Every ref set set to the same values.
    static AdcConfig uniform(RefScheme scheme, const RefSet& refs, const OffsetBank& offsets = {});
};

void validate(const AdcConfig& cfg, double vdd);

/// Per-comparator static mismatch, Gaussian(0, sigma).
OffsetBank draw_offsets(double sigma, Rng& rng);

struct CalibrationParams {
    double alpha = 0.005;
    double beta = 0.995;
    int n_vectors = 1000;
    double v_init = 0.6;
    std::array<int, kComparators> reference_bitcounts{-13, -9, -5, -1, 3, 7, 11};
};

void validate(const CalibrationParams& p);

/// One calibration iteration.
struct CalibrationSample {
    int target_bitcount = 0;
    int probe_bitcount = 0;  // target - 1 or target + 1
    int q_ideal = 0;
    int q_actual = 0;
    int column = 0;
    double v_ref = 0.0;      // after the update
};

struct ComparatorCalibration {
    double v_ref = 0.0;
    std::vector<CalibrationSample> history;
};

/// A column seen by a comparator, with that comparator's static offset.
struct CalibrationTarget {
    const MacroArray* macro = nullptr;
    int column = 0;
    double offset = 0.0;
};

/// Exponentially decaying sign-error search for one reference voltage. Each
/// iteration picks a random target and probes bitcount r-1 (ideal output 1) or r+1
/// (ideal output 0) with equal probability, then moves the reference by
/// alpha * beta^n * (Q_actual - Q_ideal).
ComparatorCalibration calibrate_reference(std::span<const CalibrationTarget> targets, int reference_bitcount,
                                          const CalibrationParams& params, const HeaderConfig& header, Rng& rng);

/// Calibrates comparator k of the ADC serving `column` against that column alone.
ComparatorCalibration calibrate_comparator(const MacroArray& macro, int column, int k,
                                           const CalibrationParams& params, const HeaderConfig& header,
                                           double offset, Rng& rng);

/// Calibrates every reference set of one macro for the given scheme. Comparator k of
/// set s draws from the stream (seed, s, k).
AdcConfig calibrate_all(const MacroArray& macro, const OffsetBank& offsets, RefScheme scheme,
                        const CalibrationParams& params, const HeaderConfig& header, std::uint64_t seed);

/// Reference set placed at the midpoints of the voltages of the even bitcounts
/// adjacent to each reference bitcount, for a column of an exact-resistance array.
RefSet midpoint_refs(const MacroArray& macro, int column, const HeaderConfig& header,
                     const std::array<int, kComparators>& reference_bitcounts = CalibrationParams{}.reference_bitcounts);

// ---------------------------------------------------------------------------
// Conditional histogram P(level | bitcount)
// ---------------------------------------------------------------------------

inline constexpr int kBitcountRows = kRows + 1;  // -64, -62, ..., 64

class ConditionalHistogram {
public:
    using Row = std::array<double, kLevels>;

    static int row_of(int bitcount);
    static int bitcount_of(int row) { return 2 * row - kRows; }

    bool present(int bitcount) const { return counts_[static_cast<std::size_t>(row_of(bitcount))] > 0; }
    const Row& probabilities(int bitcount) const { return probs_[static_cast<std::size_t>(row_of(bitcount))]; }
    std::uint64_t count(int bitcount) const { return counts_[static_cast<std::size_t>(row_of(bitcount))]; }
    std::uint64_t total() const;
    bool empty() const { return total() == 0; }

    /// Nearest bitcount with samples; ties resolve to the lower bitcount.
    int nearest_present(int bitcount) const;

    void write_csv(std::ostream& os) const;
    void write_csv(const std::filesystem::path& path) const;
    static ConditionalHistogram read_csv(std::istream& is);
    static ConditionalHistogram read_csv(const std::filesystem::path& path);

    friend ConditionalHistogram build_conditional_histogram(std::span<const std::pair<int, int>> pairs);

private:
    std::array<Row, kBitcountRows> probs_{};
    std::array<std::uint64_t, kBitcountRows> counts_{};
};

/// Empirical P(level | bitcount) from (ideal bitcount, measured level) pairs.
ConditionalHistogram build_conditional_histogram(std::span<const std::pair<int, int>> pairs);

/// (bitcount, level) pairs from `vectors` random inputs applied to every column.
std::vector<std::pair<int, int>> measure_pairs(const MacroArray& macro, const AdcConfig& adc,
                                               const HeaderConfig& header, int vectors, Rng& rng);

/// Draws a level from P(. | b), falling back to the nearest present bitcount.
int stochastic_quantize(int bitcount, const ConditionalHistogram& hist, Rng& rng);

}  // namespace xnor_rram
