#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include <json.hpp>

#include "xnor_rram/adc.hpp"
#include "xnor_rram/emulator.hpp"
#include "xnor_rram/macro.hpp"
#include "xnor_rram/mapper.hpp"
#include "xnor_rram/perf.hpp"

namespace xnor_rram {

using Json = nlohmann::ordered_json;

Json to_json(const AdcConfig& cfg);
/// Throws ConfigError on a malformed document.
AdcConfig adc_config_from_json(const Json& j);

Json to_json(const TilingPlan& plan);
Json to_json(const PerfReport& r);
Json to_json(const EvalReport& r);
Json to_json(const BoxStats& s);
/// Counts, yield and LRS/HRS resistance summaries.
Json yield_summary(const ProgrammingReport& report);

/// One row per run: run,seed,accuracy, followed by the summary rows.
void write_eval_csv(std::ostream& os, const EvalReport& r);

/// cell_row,cell_col,iteration,pulse_kind,gate_v,resistance_ohms.
void write_trace_csv_header(std::ostream& os);
void write_trace_csv(std::ostream& os, const ProgrammingReport& report);

/// bitcount,mean_v,std_v,strength.
void write_transfer_csv_header(std::ostream& os);
void write_transfer_csv(std::ostream& os, int strength, std::span<const TransferPoint> curve);

Json read_json(const std::filesystem::path& path);
/// Writes with a trailing newline; throws IoError.
void write_json(const std::filesystem::path& path, const Json& j);

/// Shortest round-trip decimal for a double.
std::string format_double(double v);

}  // namespace xnor_rram
