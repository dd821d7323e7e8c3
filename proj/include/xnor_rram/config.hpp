#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xnor_rram/emulator.hpp"
#include "xnor_rram/json_io.hpp"
#include "xnor_rram/perf.hpp"

namespace xnor_rram {

struct DatasetConfig {
    std::string format = "idx";  // idx | cifar10
    std::filesystem::path images;
    std::filesystem::path labels;
    std::vector<std::filesystem::path> batches;
};

/// Everything a CLI run needs. Every field has a module default; a JSON config
/// overrides them and command-line flags override the config.
struct RunConfig {
    std::uint64_t seed = 1;
    int threads = 1;
    std::filesystem::path output_dir = "out";

    DeviceModelParams device;
    ProgrammingTargets targets;
    double yield_floor = 0.99;
    int reprogram_rounds = 0;
    /// Writes one trace CSV per tile instead of the first tile only.
    bool trace_all_tiles = false;

    HeaderConfig header = HeaderConfig::fitted();
    double vdd = 1.2;

    double offset_sigma = 0.010;
    RefScheme scheme = RefScheme::per_adc_8;
    CalibrationParams calibration;
    QuantizerSpec dequant = QuantizerSpec::confined();

    PadPolicy pad_policy = PadPolicy::spread;

    Fidelity mode = Fidelity::analog_sim;
    int runs = 20;
    std::vector<std::uint64_t> seeds;  // empty: 1..runs
    std::optional<std::size_t> max_samples;
    std::optional<QuantizerSpec> ideal_quantizer;
    std::optional<std::filesystem::path> histogram;

    int characterize_vectors = 2000;
    int curve_samples = 100;

    PerfParams perf;
    std::vector<ComparisonRow> prior_work = default_prior_work();

    std::optional<DatasetConfig> dataset;
    std::optional<std::filesystem::path> model;
    /// Input image for `infer`: index into the dataset.
    std::size_t infer_index = 0;

    std::vector<std::uint64_t> eval_seeds() const;
};

/// Parses and validates a config document; relative paths resolve against `base`.
/// Unknown keys and out-of-range values throw ConfigError.
RunConfig parse_run_config(const Json& doc, const std::filesystem::path& base = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Re-runs every module validator on the assembled config.
void validate(const RunConfig& cfg);

Json to_json(const RunConfig& cfg);

}  // namespace xnor_rram
