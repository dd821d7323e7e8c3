#include "xnor_rram/perf.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace xnor_rram {

void validate(const PerfParams& p) {
    if (p.ops_per_column_eval != 2 * p.xnor_rows) {
        throw std::invalid_argument("ops_per_column_eval must equal 2 * xnor_rows");
    }
    if (!(p.read_delay_ns > 0.0)) throw std::invalid_argument("read_delay must be positive");
    if (p.adcs < 1) throw std::invalid_argument("adcs must be >= 1");
    if (!(p.energy_eff_tops_w > 0.0)) throw std::invalid_argument("energy efficiency must be positive");
    if (!(p.vdd > 0.0)) throw std::invalid_argument("vdd must be positive");
    if (p.periphery_mw < 0.0) throw std::invalid_argument("periphery power must be non-negative");
}

Throughput throughput(int ops, double delay_ns, int adcs) {
    if (!(delay_ns > 0.0)) throw std::invalid_argument("read_delay must be positive");
    const double per = static_cast<double>(ops) / delay_ns;  // ops per ns == GOPS
    return {per, per * adcs};
}

Throughput throughput(const PerfParams& p) {
    validate(p);
    return throughput(p.ops_per_column_eval, p.read_delay_ns, p.adcs);
}

FigureOfMerit fom(double energy_eff, double per_adc_gops) {
    if (!(energy_eff > 0.0) || !(per_adc_gops > 0.0)) throw std::invalid_argument("fom inputs must be positive");
    return {energy_eff * per_adc_gops, energy_eff * per_adc_gops * per_adc_gops};
}

BitcountDistribution point_mass(int bitcount) {
    BitcountDistribution d{};
    d.at(static_cast<std::size_t>(ConditionalHistogram::row_of(bitcount))) = 1.0;
    return d;
}

BitcountDistribution uniform_input_distribution() {
    BitcountDistribution d{};
    double c = 1.0;  // C(64, m)
    for (int m = 0; m <= kRows; ++m) {
        d[static_cast<std::size_t>(m)] = c * std::ldexp(1.0, -kRows);
        c = c * (kRows - m) / (m + 1);
    }
    return d;
}

namespace {

void check_distribution(const BitcountDistribution& dist) {
    double sum = 0.0;
    for (double p : dist) {
        if (p < 0.0) throw std::invalid_argument("bitcount distribution has a negative entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("bitcount distribution must sum to 1");
}

}  // namespace

double column_power_mw(const MacroArray& macro, int col, const HeaderConfig& header,
                       const BitcountDistribution& dist) {
    check_distribution(dist);
    const double v2 = macro.vdd() * macro.vdd();
    const double r_pu = header.pullup();
    double watts = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] == 0.0) continue;
        const int b = ConditionalHistogram::bitcount_of(static_cast<int>(i));
        watts += dist[i] * v2 / (r_pu + macro.expected_pulldown(col, b));
    }
    return watts * 1e3;
}

double estimate_power_mw(const MacroArray& macro, std::span<const int> columns, const HeaderConfig& header,
                         const BitcountDistribution& dist, double periphery_mw) {
    double mw = periphery_mw;
    for (int c : columns) mw += column_power_mw(macro, c, header, dist);
    return mw;
}

PerfReport perf_report(const PerfParams& p) {
    const auto t = throughput(p);
    const auto f = fom(p.energy_eff_tops_w, t.per_adc_gops);
    PerfReport r;
    r.throughput_per_adc_gops = t.per_adc_gops;
    r.throughput_total_gops = t.total_gops;
    r.fom1 = f.fom1;
    r.fom2 = f.fom2;
    return r;
}

PerfReport perf_report(const PerfParams& p, const MacroArray& macro, const HeaderConfig& header,
                       const BitcountDistribution& dist) {
    PerfReport r = perf_report(p);
    std::vector<int> cols;
    for (int a = 0; a < p.adcs; ++a) cols.push_back(a * kColumnsPerAdc);
    r.est_power_mw = estimate_power_mw(macro, cols, header, dist, p.periphery_mw);
    // GOPS / mW == TOPS/W
    r.derived_eff_tops_w = r.throughput_total_gops / *r.est_power_mw;
    return r;
}

std::vector<ComparisonRow> default_prior_work() {
    return {{"prior_rram_binary", 36, 10.2, 53.17}, {"prior_rram_multibit", 36, 14.6, 21.9}};
}

void write_comparison_csv(std::ostream& os, const PerfParams& p, std::span<const ComparisonRow> prior) {
    os << "design,ops_per_adc,read_delay_ns,energy_eff_tops_w,throughput_per_adc_gops,fom1,fom2\n";
    auto line = [&os](const std::string& name, int ops, double delay, double eff) {
        const auto t = throughput(ops, delay);
        const auto f = fom(eff, t.per_adc_gops);
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%d,%.6g,%.6g,%.6g,%.6g,%.6g\n", name.c_str(), ops, delay, eff,
                      t.per_adc_gops, f.fom1, f.fom2);
        os << buf;
    };
    validate(p);
    line("this_work", p.ops_per_column_eval, p.read_delay_ns, p.energy_eff_tops_w);
    for (const auto& r : prior) line(r.name, r.ops_per_adc, r.delay_ns, r.energy_eff_tops_w);
}

}  // namespace xnor_rram
