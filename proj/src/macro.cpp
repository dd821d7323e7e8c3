#include "xnor_rram/macro.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace xnor_rram {

std::array<Bit, kRows> WeightTile::column(int col) const {
    std::array<Bit, kRows> out{};
    for (int r = 0; r < kRows; ++r) {
        out[static_cast<std::size_t>(r)] = (*this)(r, col);
    }
    return out;
}

WeightTile WeightTile::random(Rng& rng) {
    WeightTile w;
    for (auto& v : w.values_) {
        v = (rng() & 1U) ? Bit{1} : Bit{-1};
    }
    return w;
}

double HeaderConfig::pullup() const {
    if (strength < 1 || strength > 8) {
        throw std::invalid_argument("header strength must be in 1..8");
    }
    return pullup_ohms[static_cast<std::size_t>(strength - 1)];
}

HeaderConfig HeaderConfig::nominal(int strength) {
    HeaderConfig h;
    h.strength = strength;
    for (int s = 1; s <= 8; ++s) {
        h.pullup_ohms[static_cast<std::size_t>(s - 1)] = 8000.0 / s;
    }
    return h;
}

HeaderConfig HeaderConfig::fitted(double r_lrs, double r_hrs, int strength, int anchor_strength) {
    HeaderConfig h = nominal(strength);
    const double g0 = (kRows / 2) / r_lrs + (kRows / 2) / r_hrs;
    const double scale = (1.0 / g0) / h.pullup_ohms[static_cast<std::size_t>(anchor_strength - 1)];
    for (auto& r : h.pullup_ohms) {
        r *= scale;
    }
    return h;
}

void validate(const HeaderConfig& h) {
    if (h.strength < 1 || h.strength > 8) {
        throw std::invalid_argument("header strength must be in 1..8");
    }
    for (std::size_t i = 0; i < h.pullup_ohms.size(); ++i) {
        if (!(h.pullup_ohms[i] > 0.0)) {
            throw std::invalid_argument("pull-up resistances must be positive");
        }
        if (i > 0 && !(h.pullup_ohms[i] < h.pullup_ohms[i - 1])) {
            throw std::invalid_argument("pull-up table must be strictly decreasing in strength");
        }
    }
}

std::vector<double> ProgrammingReport::lrs_resistances() const {
    std::vector<double> out;
    for (const auto& c : cells) {
        if (c.lrs) out.push_back(c.report.final_resistance);
    }
    return out;
}

std::vector<double> ProgrammingReport::hrs_resistances() const {
    std::vector<double> out;
    for (const auto& c : cells) {
        if (!c.lrs) out.push_back(c.report.final_resistance);
    }
    return out;
}

double ProgrammingReport::yield() const {
    const int total = lrs_total + hrs_total;
    return total == 0 ? 1.0 : static_cast<double>(lrs_converged + hrs_converged) / total;
}

int matches(std::span<const Bit> input, std::span<const Bit> weights) {
    if (input.size() != weights.size()) {
        throw std::invalid_argument("input and weight lengths differ");
    }
    int m = 0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        m += (input[i] == weights[i]) ? 1 : 0;
    }
    return m;
}

int ideal_bitcount(std::span<const Bit> input, std::span<const Bit> weights) {
    if (input.size() != weights.size()) {
        throw std::invalid_argument("input and weight lengths differ");
    }
    int b = 0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (!is_binary(input[i]) || !is_binary(weights[i])) {
            throw std::invalid_argument("binary values must be +1 or -1");
        }
        b += input[i] * weights[i];
    }
    return b;
}

InputVector input_with_matches(std::span<const Bit> weights, int m, Rng& rng) {
    if (weights.size() != static_cast<std::size_t>(kRows) || m < 0 || m > kRows) {
        throw std::invalid_argument("match count must be in 0..64 for a 64-entry column");
    }
    std::array<int, kRows> idx{};
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates on our own uniform source keeps results platform-independent.
    for (int i = 0; i < m; ++i) {
        const auto span = static_cast<std::uint64_t>(kRows - i);
        const int j = i + static_cast<int>(rng() % span);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    InputVector in{};
    for (int i = 0; i < kRows; ++i) {
        const auto k = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
        in[k] = (i < m) ? weights[k] : static_cast<Bit>(-weights[k]);
    }
    return in;
}

MacroArray::MacroArray(double vdd)
    : vdd_(vdd),
      cells_(static_cast<std::size_t>(kRows * kCols)),
      conductance_(static_cast<std::size_t>(kRows * kCols * 2), 0.0),
      low_side_(static_cast<std::size_t>(kRows * kCols * 2), 0) {
    if (!(vdd >= 0.9 - 1e-12 && vdd <= 1.2 + 1e-12)) {
        throw std::invalid_argument("vdd must be within the measured 0.9-1.2 V range");
    }
    for (int r = 0; r < kRows; ++r) {
        for (int c = 0; c < kCols; ++c) refresh_conductance(r, c);
    }
}

const XnorBitcell& MacroArray::bitcell(int row, int col) const {
    return cells_.at(static_cast<std::size_t>(row * kCols + col));
}

void MacroArray::refresh_conductance(int row, int col) {
    const auto& cell = cells_[static_cast<std::size_t>(row * kCols + col)];
    const auto base = (static_cast<std::size_t>(col) * kRows + static_cast<std::size_t>(row)) * 2;
    conductance_[base] = 1.0 / cell.pos_cell.resistance;
    conductance_[base + 1] = 1.0 / cell.neg_cell.resistance;
    const bool pos_low = cell.pos_cell.resistance <= cell.neg_cell.resistance;
    low_side_[base] = pos_low ? 1 : 0;
    low_side_[base + 1] = pos_low ? 0 : 1;
}

void MacroArray::mark_programmed() {
    for (int c = 0; c < kCols; ++c) {
        bool ok = true;
        for (int r = 0; r < kRows && ok; ++r) {
            const auto& cell = cells_[static_cast<std::size_t>(r * kCols + c)];
            ok = cell.pos_cell.state != CellState::pristine && cell.neg_cell.state != CellState::pristine;
        }
        programmed_[static_cast<std::size_t>(c)] = ok;
    }
}

bool MacroArray::fully_programmed() const {
    return std::all_of(programmed_.begin(), programmed_.end(), [](bool b) { return b; });
}

namespace {

void tally(ProgrammingReport& rep, CellReport&& cr, bool lrs) {
    if (lrs) {
        ++rep.lrs_total;
        rep.lrs_converged += cr.report.converged ? 1 : 0;
    } else {
        ++rep.hrs_total;
        rep.hrs_converged += cr.report.converged ? 1 : 0;
    }
    rep.cells.push_back(std::move(cr));
}

}  // namespace

ProgrammingReport MacroArray::program_weights(const WeightTile& weights, const DeviceModelParams& params,
                                              const ProgrammingTargets& targets, std::uint64_t seed) {
    validate(params);
    for (int v : weights.data()) {
        if (!is_binary(v)) throw std::invalid_argument("weights must be +1 or -1");
    }
    weights_ = weights;
    ProgrammingReport rep;
    rep.cells.reserve(static_cast<std::size_t>(kRows * kCols * 2));
    for (int r = 0; r < kRows; ++r) {
        for (int c = 0; c < kCols; ++c) {
            auto& cell = cells_[static_cast<std::size_t>(r * kCols + c)];
            const bool plus = weights(r, c) > 0;
            for (int side = 0; side < 2; ++side) {
                DeviceState& dev = side == 0 ? cell.pos_cell : cell.neg_cell;
                const bool want_lrs = (side == 0) == plus;
                Rng rng = make_stream(seed, r, c, side, 0);
                CellReport cr{r, c, side == 0, want_lrs, {}};
                cr.report = want_lrs ? write_verify_lrs(dev, targets.lrs, params, rng)
                                     : write_verify_hrs(dev, targets.hrs, params, rng);
                tally(rep, std::move(cr), want_lrs);
            }
            refresh_conductance(r, c);
        }
    }
    mark_programmed();
    return rep;
}

ProgrammingReport MacroArray::reprogram(const DeviceModelParams& params, const ProgrammingTargets& targets,
                                        std::uint64_t seed, int round) {
    validate(params);
    ProgrammingReport rep;
    rep.cells.reserve(static_cast<std::size_t>(kRows * kCols * 2));
    for (int r = 0; r < kRows; ++r) {
        for (int c = 0; c < kCols; ++c) {
            auto& cell = cells_[static_cast<std::size_t>(r * kCols + c)];
            const bool plus = weights_(r, c) > 0;
            for (int side = 0; side < 2; ++side) {
                DeviceState& dev = side == 0 ? cell.pos_cell : cell.neg_cell;
                const bool want_lrs = (side == 0) == plus;
                Rng rng = make_stream(seed, r, c, side, round);
                CellReport cr{r, c, side == 0, want_lrs, {}};
                cr.report = want_lrs ? refresh_lrs(dev, targets.lrs, params, rng)
                                     : refresh_hrs(dev, targets.hrs, params, rng);
                tally(rep, std::move(cr), want_lrs);
            }
            refresh_conductance(r, c);
        }
    }
    mark_programmed();
    return rep;
}

void MacroArray::program_exact(const WeightTile& weights, double r_lrs, double r_hrs) {
    if (!(r_lrs > 0.0) || !(r_hrs > 0.0)) {
        throw std::invalid_argument("resistances must be positive");
    }
    weights_ = weights;
    for (int r = 0; r < kRows; ++r) {
        for (int c = 0; c < kCols; ++c) {
            auto& cell = cells_[static_cast<std::size_t>(r * kCols + c)];
            const bool plus = weights(r, c) > 0;
            cell.pos_cell = plus ? DeviceState{CellState::lrs, r_lrs} : DeviceState{CellState::hrs, r_hrs};
            cell.neg_cell = plus ? DeviceState{CellState::hrs, r_hrs} : DeviceState{CellState::lrs, r_lrs};
            refresh_conductance(r, c);
        }
    }
    mark_programmed();
}

double MacroArray::pulldown_resistance(int col, const InputVector& input) const {
    if (col < 0 || col >= kCols) {
        throw std::out_of_range("column index out of range");
    }
    if (!programmed_[static_cast<std::size_t>(col)]) {
        throw UnprogrammedError("column " + std::to_string(col) + " is not programmed");
    }
    const auto base = static_cast<std::size_t>(col) * kRows * 2;
    const double* g = conductance_.data() + base;
    const std::uint8_t* low = low_side_.data() + base;
    // Separate sums for the low- and high-resistance selections keep the result
    // independent of which rows match when the resistances are uniform.
    double sum[2] = {0.0, 0.0};
    for (int r = 0; r < kRows; ++r) {
        const Bit a = input[static_cast<std::size_t>(r)];
        if (!is_binary(a)) throw std::invalid_argument("activations must be +1 or -1");
        const auto k = static_cast<std::size_t>(2 * r + (a > 0 ? 0 : 1));
        sum[low[k]] += g[k];
    }
    return 1.0 / (sum[1] + sum[0]);
}

BitlineResult MacroArray::evaluate_bitline(int col, const InputVector& input, const HeaderConfig& header) const {
    const double r_pd = pulldown_resistance(col, input);
    const double r_pu = header.pullup();
    BitlineResult res;
    res.voltage = vdd_ * r_pd / (r_pd + r_pu);
    const auto w = weights_.column(col);
    res.selected_lrs = matches(input, w);
    res.bitcount = 2 * res.selected_lrs - kRows;
    return res;
}

double MacroArray::expected_pulldown(int col, int bitcount) const {
    if (!programmed_[static_cast<std::size_t>(col)]) {
        throw UnprogrammedError("column " + std::to_string(col) + " is not programmed");
    }
    if (bitcount < -kRows || bitcount > kRows || bitcount % 2 != 0) {
        throw std::invalid_argument("bitcount must be an even integer in [-64, 64]");
    }
    const int m = (bitcount + kRows) / 2;
    // A matching position selects the LRS cell of its bitcell, a mismatch the HRS cell.
    double g_lrs = 0.0;
    double g_hrs = 0.0;
    for (int r = 0; r < kRows; ++r) {
        const auto& cell = cells_[static_cast<std::size_t>(r * kCols + col)];
        const bool plus = weights_(r, col) > 0;
        g_lrs += 1.0 / (plus ? cell.pos_cell : cell.neg_cell).resistance;
        g_hrs += 1.0 / (plus ? cell.neg_cell : cell.pos_cell).resistance;
    }
    const double g = (m * g_lrs + (kRows - m) * g_hrs) / kRows;
    return 1.0 / g;
}

void MacroArray::save_snapshot(std::ostream& os) const {
    auto put = [&os](double v) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFU);
        os.write(reinterpret_cast<const char*>(buf), 8);
    };
    for (const auto& cell : cells_) {
        put(cell.pos_cell.state == CellState::pristine ? 0.0 : cell.pos_cell.resistance);
        put(cell.neg_cell.state == CellState::pristine ? 0.0 : cell.neg_cell.resistance);
    }
    if (!os) throw IoError("failed writing macro snapshot");
}

void MacroArray::save_snapshot(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    save_snapshot(os);
}

MacroArray MacroArray::load_snapshot(std::istream& is, double vdd) {
    auto get = [&is]() {
        unsigned char buf[8];
        is.read(reinterpret_cast<char*>(buf), 8);
        if (!is) throw IoError("truncated macro snapshot");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        double v = 0.0;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    };
    MacroArray m(vdd);
    for (int r = 0; r < kRows; ++r) {
        for (int c = 0; c < kCols; ++c) {
            auto& cell = m.cells_[static_cast<std::size_t>(r * kCols + c)];
            const double rp = get();
            const double rn = get();
            if (!(rp >= 0.0) || !(rn >= 0.0)) throw IoError("negative resistance in snapshot");
            if (rp == 0.0 || rn == 0.0) {
                // Unprogrammed bitcell.
                continue;
            }
            // Within a programmed bitcell the lower resistance is the LRS side.
            const bool plus = rp < rn;
            cell.pos_cell = {plus ? CellState::lrs : CellState::hrs, rp};
            cell.neg_cell = {plus ? CellState::hrs : CellState::lrs, rn};
            m.weights_(r, c) = plus ? Bit{1} : Bit{-1};
            m.refresh_conductance(r, c);
        }
    }
    m.mark_programmed();
    return m;
}

MacroArray MacroArray::load_snapshot(const std::filesystem::path& path, double vdd) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return load_snapshot(is, vdd);
}

std::vector<TransferPoint> transfer_curve(const MacroArray& macro, int col, const HeaderConfig& header,
                                          int samples, Rng& rng) {
    if (samples < 1) throw std::invalid_argument("transfer_curve needs at least one sample");
    const auto w = macro.weights().column(col);
    std::vector<TransferPoint> curve;
    for (int m = 0; m <= kRows; ++m) {
        // Welford: identical samples give exactly zero spread
        double mean = 0.0;
        double m2 = 0.0;
        for (int n = 1; n <= samples; ++n) {
            const auto in = input_with_matches(w, m, rng);
            const double v = macro.evaluate_bitline(col, in, header).voltage;
            const double d = v - mean;
            mean += d / n;
            m2 += d * (v - mean);
        }
        curve.push_back({2 * m - kRows, mean, std::sqrt(m2 / samples)});
    }
    return curve;
}

}  // namespace xnor_rram
