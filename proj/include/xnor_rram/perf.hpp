#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xnor_rram/adc.hpp"
#include "xnor_rram/macro.hpp"

namespace xnor_rram {

struct PerfParams {
    int rows_1t1r = 128;
    int xnor_rows = 64;
    int adcs = 8;
    int columns = 64;
    double read_delay_ns = 6.5;
    double vdd = 1.2;
    double energy_eff_tops_w = 24.1;
    int ops_per_column_eval = 128;  // one XNOR and one accumulate per row
    double periphery_mw = 1.0;      // ADC and periphery constant added to the divider power
};

void validate(const PerfParams& p);

struct Throughput {
    double per_adc_gops = 0.0;
    double total_gops = 0.0;
};

/// GOPS per ADC = ops / delay(ns); total = adcs * per ADC.
Throughput throughput(const PerfParams& p);
Throughput throughput(int ops, double delay_ns, int adcs = 1);

struct FigureOfMerit {
    double fom1 = 0.0;  // TOPS/W * GOPS
    double fom2 = 0.0;  // TOPS/W * GOPS^2
};

FigureOfMerit fom(double energy_eff, double per_adc_gops);

/// Probability of each achievable bitcount, indexed by (b + 64) / 2.
using BitcountDistribution = std::array<double, kRows + 1>;

BitcountDistribution point_mass(int bitcount);
/// Binomial(64, 1/2) over the matching count: uniformly random inputs and weights.
BitcountDistribution uniform_input_distribution();

/// Static divider power in mW of one column: sum_b P(b) * vdd^2 / (R_pu + R_pd(b)).
double column_power_mw(const MacroArray& macro, int col, const HeaderConfig& header,
                       const BitcountDistribution& dist);

/// Divider power of the columns read together (one per ADC) plus the periphery constant.
double estimate_power_mw(const MacroArray& macro, std::span<const int> columns, const HeaderConfig& header,
                         const BitcountDistribution& dist, double periphery_mw);

struct PerfReport {
    double throughput_total_gops = 0.0;
    double throughput_per_adc_gops = 0.0;
    double fom1 = 0.0;
    double fom2 = 0.0;
    std::optional<double> est_power_mw;
    std::optional<double> derived_eff_tops_w;  // total ops/s over estimated power
};

/// Arithmetic report from the configured constants; power fields stay empty.
PerfReport perf_report(const PerfParams& p);

/// Adds the divider-power estimate and derived efficiency for a macro.
PerfReport perf_report(const PerfParams& p, const MacroArray& macro, const HeaderConfig& header,
                       const BitcountDistribution& dist);

/// One column of the comparison table.
struct ComparisonRow {
    std::string name;
    int ops_per_adc = 0;
    double delay_ns = 0.0;
    double energy_eff_tops_w = 0.0;
};

/// Comparison-table CSV with one line per design: per-ADC throughput and both figures of merit.
void write_comparison_csv(std::ostream& os, const PerfParams& p, std::span<const ComparisonRow> prior);

std::vector<ComparisonRow> default_prior_work();

}  // namespace xnor_rram
