#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xnor_rram/adc.hpp"
#include "xnor_rram/dataset.hpp"
#include "xnor_rram/device.hpp"
#include "xnor_rram/macro.hpp"
#include "xnor_rram/mapper.hpp"

namespace xnor_rram {

// ---------------------------------------------------------------------------
// Element-wise post-ops
// ---------------------------------------------------------------------------

/// Output +1 iff x >= threshold (or x <= threshold when inverted).
struct SignThreshold {
    double threshold = 0.0;
    bool inverted = false;

    Bit apply(double x) const {
        const bool pos = inverted ? (x <= threshold) : (x >= threshold);
        return pos ? Bit{1} : Bit{-1};
    }
};

/// sign(gamma * (x - mean) / sqrt(var + eps) + beta) as a single comparison.
/// Throws std::domain_error for gamma == 0 or var + eps == 0.
SignThreshold batchnorm_fold(double gamma, double beta, double mean, double var, double eps);

/// Direct batch-norm followed by sign (sign(0) = +1).
Bit batchnorm_sign(double x, double gamma, double beta, double mean, double var, double eps);

struct BatchNormParams {
    std::vector<float> gamma;
    std::vector<float> beta;
    std::vector<float> mean;
    std::vector<float> var;
    float eps = 1e-5F;

    std::size_t size() const { return gamma.size(); }
    double apply(std::size_t ch, double x) const;
};

/// +1 iff pixel > threshold.
std::vector<Bit> binarize_input(std::span<const float> image, double threshold = 0.5);

/// Element-wise max over size x size windows; edges that do not divide evenly are padded with -1.
FeatureMap maxpool_binary(const FeatureMap& in, int size);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct ModelLayer {
    std::string name;
    LayerSpec spec;
    std::vector<BinaryMatrix> weights;           // one rows x cols matrix per kernel position
    std::optional<BatchNormParams> bn;
    std::vector<SignThreshold> thresholds;       // used when bn is absent
};

struct BnnModel {
    std::array<int, 3> input_shape{1, 28, 28};  // C, H, W
    double binarize_threshold = 0.5;
    std::vector<ModelLayer> layers;
};

/// Checks that shapes chain and every layer carries consistent parameters.
void validate(const BnnModel& model);

/// Activation shape (C, H, W) entering each layer; FC layers see (N, 1, 1).
std::vector<std::array<int, 3>> layer_input_shapes(const BnnModel& model);

/// Replaces the batch-norm of every binarizing layer by its folded thresholds.
BnnModel fold_batchnorm(const BnnModel& model);

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

enum class Fidelity : std::uint8_t { ideal_digital, analog_sim, stochastic_histogram };

std::string_view to_string(Fidelity f);
Fidelity parse_fidelity(std::string_view s);

/// Everything needed to program and calibrate the macros of a model.
struct HardwareOptions {
    DeviceModelParams device;
    ProgrammingTargets targets;
    HeaderConfig header = HeaderConfig::fitted();
    double vdd = 1.2;
    double offset_sigma = 0.010;
    RefScheme scheme = RefScheme::per_adc_8;
    CalibrationParams calibration;
    /// Use exact resistances instead of stochastic programming.
    std::optional<std::pair<double, double>> exact_resistances;
    /// Place refs at exact midpoints instead of running calibration (exact arrays only).
    bool midpoint_refs = false;
};

/// Programmed and calibrated macros, one per tile.
struct AnalogHardware {
    HeaderConfig header;
    std::vector<std::vector<MacroArray>> macros;  // [layer][tile]
    std::vector<std::vector<AdcConfig>> adcs;     // [layer][tile]
};

/// Model plus its tiling, tile weight slices and schedules.
struct CompiledModel {
    BnnModel model;
    PadPolicy pad_policy = PadPolicy::spread;
    std::vector<TilingPlan> plans;
    std::vector<AccumulationSchedule> schedules;
    std::vector<std::vector<WeightTile>> tiles;   // [layer][tile]
    std::vector<std::vector<int>> kernel_sums;    // [layer][kpos * cols + o], CONV spatial-pad correction
    std::vector<std::array<int, 3>> input_shapes;
};

CompiledModel compile(const BnnModel& model, PadPolicy policy = PadPolicy::spread);

AnalogHardware build_analog_hardware(const CompiledModel& compiled, const HardwareOptions& options,
                                     std::uint64_t seed, int threads = 1);

struct InferenceMode {
    Fidelity fidelity = Fidelity::ideal_digital;
    /// IDEAL_DIGITAL only: per-tile quantizer; absent means exact bitcounts.
    std::optional<QuantizerSpec> ideal_quantizer;
    /// Reconstruction values for ADC levels (ANALOG_SIM, STOCHASTIC_HISTOGRAM).
    QuantizerSpec dequant = QuantizerSpec::confined();
    const AnalogHardware* hardware = nullptr;
    const ConditionalHistogram* histogram = nullptr;
};

void validate(const InferenceMode& mode);

struct InferenceResult {
    int predicted = 0;
    std::vector<double> scores;
};

/// Runs one sample. Stochastic draws use streams keyed by (seed, sample, layer, tile).
InferenceResult infer(const CompiledModel& compiled, std::span<const float> image, const InferenceMode& mode,
                      std::uint64_t seed = 0, std::uint64_t sample = 0);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalConfig {
    InferenceMode mode;               // hardware pointer is filled per run for ANALOG_SIM
    HardwareOptions hardware;
    std::vector<std::uint64_t> seeds; // one run per seed
    int threads = 1;
    std::optional<std::size_t> max_samples;
};

struct BoxStats {
    double mean = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Mean, quartiles (linear interpolation) and extremes.
BoxStats summarize(std::span<const double> values);

struct EvalReport {
    Fidelity mode = Fidelity::ideal_digital;
    std::optional<RefScheme> scheme;
    std::vector<std::uint64_t> seeds;
    std::vector<double> accuracies;
    BoxStats stats;
    std::size_t samples = 0;
};

/// Default seed list 1..runs.
std::vector<std::uint64_t> default_seeds(int runs, std::uint64_t base = 1);

EvalReport evaluate(const CompiledModel& compiled, const Dataset& dataset, const EvalConfig& config);

}  // namespace xnor_rram
