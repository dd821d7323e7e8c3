#include "xnor_rram/adc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace xnor_rram {

int digitize(double v_rbl, const RefSet& refs, const OffsetSet& offsets) {
    int ones = 0;
    for (std::size_t k = 0; k < refs.size(); ++k) {
        ones += compare(v_rbl, refs[k], offsets[k]);
    }
    return kComparators - ones;
}

QuantizerSpec QuantizerSpec::confined() {
    return {{-13, -9, -5, -1, 3, 7, 11}, {-15, -11, -7, -3, 1, 5, 9, 13}};
}

QuantizerSpec QuantizerSpec::full_range(int bits) {
    if (bits < 3 || bits > 5) {
        throw std::invalid_argument("full-range quantizer supports 3, 4 or 5 bits");
    }
    const int levels = 1 << bits;
    const int width = 2 * kRows / levels;
    QuantizerSpec q;
    for (int k = 1; k < levels; ++k) q.edges.push_back(-kRows + k * width);
    for (int l = 0; l < levels; ++l) q.dequant_values.push_back(-kRows + l * width + width / 2);
    return q;
}

void validate(const QuantizerSpec& q) {
    if (q.dequant_values.size() < 2 || q.edges.size() + 1 != q.dequant_values.size()) {
        throw std::invalid_argument("quantizer needs L-1 edges for L dequant values");
    }
    if (!std::is_sorted(q.edges.begin(), q.edges.end(), std::less_equal<>()) ||
        std::adjacent_find(q.edges.begin(), q.edges.end()) != q.edges.end()) {
        throw std::invalid_argument("quantizer edges must be strictly increasing");
    }
    if (std::adjacent_find(q.dequant_values.begin(), q.dequant_values.end(), std::greater_equal<>()) !=
        q.dequant_values.end()) {
        throw std::invalid_argument("dequant values must be strictly increasing");
    }
}

int quantize(int bitcount, const QuantizerSpec& spec) {
    return static_cast<int>(std::count_if(spec.edges.begin(), spec.edges.end(), [bitcount](int e) { return bitcount > e; }));
}

int dequantize(int level, const QuantizerSpec& spec) {
    if (level < 0 || level >= spec.levels()) {
        throw std::out_of_range("quantizer level out of range");
    }
    return spec.dequant_values[static_cast<std::size_t>(level)];
}

int confined_quantize(int bitcount, const QuantizerSpec& spec) { return quantize(bitcount, spec); }

int full_range_quantize(int bitcount, int bits) { return quantize(bitcount, QuantizerSpec::full_range(bits)); }

std::string_view to_string(RefScheme s) {
    switch (s) {
        case RefScheme::unified_1: return "UNIFIED_1";
        case RefScheme::per_adc_8: return "PER_ADC_8";
        case RefScheme::per_column_64: return "PER_COLUMN_64";
    }
    return "?";
}

RefScheme parse_ref_scheme(std::string_view s) {
    if (s == "UNIFIED_1") return RefScheme::unified_1;
    if (s == "PER_ADC_8") return RefScheme::per_adc_8;
    if (s == "PER_COLUMN_64") return RefScheme::per_column_64;
    throw ConfigError("unknown reference scheme '" + std::string(s) + "'");
}

int ref_set_count(RefScheme s) {
    switch (s) {
        case RefScheme::unified_1: return 1;
        case RefScheme::per_adc_8: return kAdcCount;
        case RefScheme::per_column_64: return kCols;
    }
    return 0;
}

int AdcConfig::ref_set_of_column(int col) const {
    if (col < 0 || col >= kCols) throw std::out_of_range("column index out of range");
    switch (scheme) {
        case RefScheme::unified_1: return 0;
        case RefScheme::per_adc_8: return adc_of_column(col);
        case RefScheme::per_column_64: return col;
    }
    return 0;
}

AdcConfig AdcConfig::uniform(RefScheme scheme, const RefSet& refs, const OffsetBank& offsets) {
    AdcConfig cfg;
    cfg.scheme = scheme;
    cfg.ref_sets.assign(static_cast<std::size_t>(ref_set_count(scheme)), refs);
    cfg.offsets = offsets;
    return cfg;
}

void validate(const AdcConfig& cfg, double vdd) {
    if (static_cast<int>(cfg.ref_sets.size()) != ref_set_count(cfg.scheme)) {
        throw std::invalid_argument("reference set count does not match the scheme");
    }
    for (const auto& set : cfg.ref_sets) {
        for (double v : set) {
            if (!(v > 0.0 && v < vdd)) throw std::invalid_argument("reference voltages must lie in (0, vdd)");
        }
    }
}

OffsetBank draw_offsets(double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("offset sigma must be non-negative");
    OffsetBank bank{};
    for (auto& adc : bank) {
        for (auto& o : adc) o = sigma * standard_normal(rng);
    }
    return bank;
}

void validate(const CalibrationParams& p) {
    if (!(p.beta > 0.0 && p.beta < 1.0)) throw std::invalid_argument("calibration beta must be in (0, 1)");
    if (!(p.alpha > 0.0)) throw std::invalid_argument("calibration alpha must be positive");
    if (p.n_vectors < 1) throw std::invalid_argument("calibration needs at least one vector");
    for (std::size_t k = 0; k < p.reference_bitcounts.size(); ++k) {
        const int r = p.reference_bitcounts[k];
        if (r % 2 == 0) throw std::invalid_argument("reference bitcounts must be odd");
        if (r < -kRows + 1 || r > kRows - 1) throw std::invalid_argument("reference bitcount out of range");
        if (k > 0 && r <= p.reference_bitcounts[k - 1]) {
            throw std::invalid_argument("reference bitcounts must be strictly increasing");
        }
    }
}

namespace {

void check_reference(int r) {
    if (r % 2 == 0 || r - 1 < -kRows || r + 1 > kRows) {
        throw std::invalid_argument("reference bitcount " + std::to_string(r) +
                                    " has no achievable neighbours on both sides");
    }
}

}  // namespace

ComparatorCalibration calibrate_reference(std::span<const CalibrationTarget> targets, int reference_bitcount,
                                          const CalibrationParams& params, const HeaderConfig& header, Rng& rng) {
    validate(params);
    check_reference(reference_bitcount);
    if (targets.empty()) throw std::invalid_argument("calibration needs at least one target column");
    for (const auto& t : targets) {
        if (t.macro == nullptr || !t.macro->column_programmed(t.column)) {
            throw UnprogrammedError("calibration target column is not programmed");
        }
    }

    ComparatorCalibration out;
    out.history.reserve(static_cast<std::size_t>(params.n_vectors));
    double v_ref = params.v_init;
    double step = params.alpha;
    for (int n = 0; n < params.n_vectors; ++n) {
        const auto& t = targets[targets.size() == 1 ? 0 : static_cast<std::size_t>(rng() % targets.size())];
        const bool below = (rng() & 1U) != 0;
        const int probe = below ? reference_bitcount - 1 : reference_bitcount + 1;
        const auto weights = t.macro->weights().column(t.column);
        const InputVector in = input_with_matches(weights, (probe + kRows) / 2, rng);
        const double v = t.macro->evaluate_bitline(t.column, in, header).voltage;

        const int q_ideal = below ? 1 : 0;
        const int q_actual = compare(v, v_ref, t.offset);
        v_ref += step * (q_actual - q_ideal);
        step *= params.beta;
        out.history.push_back({reference_bitcount, probe, q_ideal, q_actual, t.column, v_ref});
    }
    out.v_ref = v_ref;
    return out;
}

ComparatorCalibration calibrate_comparator(const MacroArray& macro, int column, int k,
                                           const CalibrationParams& params, const HeaderConfig& header,
                                           double offset, Rng& rng) {
    if (k < 0 || k >= kComparators) throw std::out_of_range("comparator index out of range");
    const CalibrationTarget target{&macro, column, offset};
    return calibrate_reference(std::span(&target, 1), params.reference_bitcounts[static_cast<std::size_t>(k)],
                               params, header, rng);
}

AdcConfig calibrate_all(const MacroArray& macro, const OffsetBank& offsets, RefScheme scheme,
                        const CalibrationParams& params, const HeaderConfig& header, std::uint64_t seed) {
    validate(params);
    if (!macro.fully_programmed()) throw UnprogrammedError("calibration requires all 64 columns programmed");

    AdcConfig cfg;
    cfg.scheme = scheme;
    cfg.offsets = offsets;
    const int sets = ref_set_count(scheme);
    cfg.ref_sets.resize(static_cast<std::size_t>(sets));

    std::vector<CalibrationTarget> targets;
    for (int s = 0; s < sets; ++s) {
        for (int k = 0; k < kComparators; ++k) {
            targets.clear();
            for (int col = 0; col < kCols; ++col) {
                const bool member = scheme == RefScheme::unified_1 ||
                                    (scheme == RefScheme::per_adc_8 && AdcConfig::adc_of_column(col) == s) ||
                                    (scheme == RefScheme::per_column_64 && col == s);
                if (!member) continue;
                const auto adc = static_cast<std::size_t>(AdcConfig::adc_of_column(col));
                targets.push_back({&macro, col, offsets[adc][static_cast<std::size_t>(k)]});
            }
            Rng rng = make_stream(seed, s, k);
            cfg.ref_sets[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)] =
                calibrate_reference(targets, params.reference_bitcounts[static_cast<std::size_t>(k)], params,
                                    header, rng)
                    .v_ref;
        }
    }
    return cfg;
}

RefSet midpoint_refs(const MacroArray& macro, int column, const HeaderConfig& header,
                     const std::array<int, kComparators>& reference_bitcounts) {
    auto volts = [&](int b) {
        const double r_pd = macro.expected_pulldown(column, b);
        return macro.vdd() * r_pd / (r_pd + header.pullup());
    };
    RefSet refs{};
    for (std::size_t k = 0; k < refs.size(); ++k) {
        const int r = reference_bitcounts[k];
        check_reference(r);
        refs[k] = 0.5 * (volts(r - 1) + volts(r + 1));
    }
    return refs;
}

int ConditionalHistogram::row_of(int bitcount) {
    if (bitcount < -kRows || bitcount > kRows || bitcount % 2 != 0) {
        throw std::invalid_argument("bitcount " + std::to_string(bitcount) + " is not achievable");
    }
    return (bitcount + kRows) / 2;
}

std::uint64_t ConditionalHistogram::total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

int ConditionalHistogram::nearest_present(int bitcount) const {
    if (empty()) throw std::invalid_argument("conditional histogram is empty");
    const int row = row_of(bitcount);
    for (int d = 0; d < kBitcountRows; ++d) {
        if (row - d >= 0 && counts_[static_cast<std::size_t>(row - d)] > 0) return bitcount_of(row - d);
        if (row + d < kBitcountRows && counts_[static_cast<std::size_t>(row + d)] > 0) return bitcount_of(row + d);
    }
    return bitcount;
}

ConditionalHistogram build_conditional_histogram(std::span<const std::pair<int, int>> pairs) {
    if (pairs.empty()) throw std::invalid_argument("histogram needs at least one pair");
    std::array<std::array<std::uint64_t, kLevels>, kBitcountRows> tally{};
    for (const auto& [b, level] : pairs) {
        if (level < 0 || level >= kLevels) throw std::invalid_argument("ADC level out of range");
        ++tally[static_cast<std::size_t>(ConditionalHistogram::row_of(b))][static_cast<std::size_t>(level)];
    }
    ConditionalHistogram h;
    for (std::size_t row = 0; row < tally.size(); ++row) {
        std::uint64_t n = 0;
        for (auto c : tally[row]) n += c;
        h.counts_[row] = n;
        if (n == 0) continue;
        for (std::size_t l = 0; l < kLevels; ++l) {
            h.probs_[row][l] = static_cast<double>(tally[row][l]) / static_cast<double>(n);
        }
    }
    return h;
}

void ConditionalHistogram::write_csv(std::ostream& os) const {
    os << "bitcount";
    for (int l = 0; l < kLevels; ++l) os << ",p" << l;
    os << ",count\n";
    char buf[64];
    for (int row = 0; row < kBitcountRows; ++row) {
        os << bitcount_of(row);
        for (double p : probs_[static_cast<std::size_t>(row)]) {
            std::snprintf(buf, sizeof buf, ",%.17g", p);
            os << buf;
        }
        os << ',' << counts_[static_cast<std::size_t>(row)] << '\n';
    }
    if (!os) throw IoError("failed writing histogram CSV");
}

void ConditionalHistogram::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_csv(os);
}

ConditionalHistogram ConditionalHistogram::read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("bitcount", 0) != 0) {
        throw IoError("histogram CSV is missing its header");
    }
    ConditionalHistogram h;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != static_cast<std::size_t>(kLevels + 2)) throw IoError("malformed histogram row: " + line);
        try {
            const auto row = static_cast<std::size_t>(row_of(std::stoi(cells[0])));
            for (std::size_t l = 0; l < kLevels; ++l) h.probs_[row][l] = std::stod(cells[l + 1]);
            h.counts_[row] = std::stoull(cells.back());
        } catch (const std::logic_error&) {
            throw IoError("malformed histogram row: " + line);
        }
    }
    return h;
}

ConditionalHistogram ConditionalHistogram::read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    return read_csv(is);
}

std::vector<std::pair<int, int>> measure_pairs(const MacroArray& macro, const AdcConfig& adc,
                                               const HeaderConfig& header, int vectors, Rng& rng) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(vectors) * kCols);
    for (int n = 0; n < vectors; ++n) {
        InputVector in{};
        for (auto& a : in) a = (rng() & 1U) ? Bit{1} : Bit{-1};
        for (int col = 0; col < kCols; ++col) {
            const auto res = macro.evaluate_bitline(col, in, header);
            pairs.emplace_back(res.bitcount, adc.digitize_column(col, res.voltage));
        }
    }
    return pairs;
}

int stochastic_quantize(int bitcount, const ConditionalHistogram& hist, Rng& rng) {
    const int b = hist.nearest_present(bitcount);
    const auto& p = hist.probabilities(b);
    const double u = uniform01(rng);
    double cum = 0.0;
    int last = 0;
    for (int l = 0; l < kLevels; ++l) {
        if (p[static_cast<std::size_t>(l)] <= 0.0) continue;
        last = l;
        cum += p[static_cast<std::size_t>(l)];
        if (u < cum) return l;
    }
    return last;
}

}  // namespace xnor_rram
