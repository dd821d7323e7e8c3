#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xnor_rram/config.hpp"

namespace xnor_rram {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitConvergence = 2, kExitIo = 3 };

/// Flags shared by every subcommand. Set flags win over the config file.
struct CommonFlags {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<int> threads;
};

/// Loads the config (or defaults) and applies the flag overrides.
RunConfig resolve_config(const CommonFlags& flags);

/// Output layout inside the output directory.
namespace paths {
inline constexpr const char* kTiles = "tiles.json";
inline constexpr const char* kSnapshots = "snapshots";
inline constexpr const char* kTrace = "programming_trace.csv";
inline constexpr const char* kYield = "yield.json";
inline constexpr const char* kAdc = "adc";
inline constexpr const char* kTransfer = "transfer_curves.csv";
inline constexpr const char* kHistogram = "histogram.csv";
inline constexpr const char* kInfer = "infer.json";
inline constexpr const char* kEvalJson = "eval_report.json";
inline constexpr const char* kEvalCsv = "eval_report.csv";
inline constexpr const char* kPerfJson = "perf_report.json";
inline constexpr const char* kPerfCsv = "perf_comparison.csv";
}  // namespace paths

/// Programs every tile of the configured model (or one random macro without a model),
/// writes snapshots, the trace CSV and yield statistics. Throws ConvergenceError when
/// the yield falls below the configured floor.
Json cmd_program(const RunConfig& cfg);

/// Calibrates every programmed tile listed in tiles.json; one AdcConfig JSON per tile.
Json cmd_calibrate(const RunConfig& cfg);

/// Transfer curves for header strengths 1..8 and the conditional histogram of the
/// first programmed tile.
Json cmd_characterize(const RunConfig& cfg);

/// Classifies one dataset sample.
Json cmd_infer(const RunConfig& cfg);

Json cmd_evaluate(const RunConfig& cfg);

Json cmd_perf(const RunConfig& cfg);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace xnor_rram
