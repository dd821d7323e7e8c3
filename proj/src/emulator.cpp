#include "xnor_rram/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "xnor_rram/parallel.hpp"

namespace xnor_rram {

SignThreshold batchnorm_fold(double gamma, double beta, double mean, double var, double eps) {
    if (var < 0.0) throw std::invalid_argument("batch-norm variance must be non-negative");
    if (gamma == 0.0) throw std::domain_error("batch-norm gamma is zero; the channel is degenerate");
    const double sd = std::sqrt(var + eps);
    if (!(sd > 0.0)) throw std::domain_error("batch-norm var + eps is zero");
    // gamma * (x - mean) / sd + beta >= 0  <=>  x >= mean - beta * sd / gamma  (gamma > 0)
    return {mean - beta * sd / gamma, gamma < 0.0};
}

Bit batchnorm_sign(double x, double gamma, double beta, double mean, double var, double eps) {
    const double y = gamma * (x - mean) / std::sqrt(var + eps) + beta;
    return y >= 0.0 ? Bit{1} : Bit{-1};
}

double BatchNormParams::apply(std::size_t ch, double x) const {
    return gamma[ch] * (x - mean[ch]) / std::sqrt(static_cast<double>(var[ch]) + eps) + beta[ch];
}

std::vector<Bit> binarize_input(std::span<const float> image, double threshold) {
    std::vector<Bit> out(image.size());
    std::transform(image.begin(), image.end(), out.begin(),
                   [threshold](float p) { return static_cast<double>(p) > threshold ? Bit{1} : Bit{-1}; });
    return out;
}

FeatureMap maxpool_binary(const FeatureMap& in, int size) {
    if (size < 1) throw std::invalid_argument("pool size must be >= 1");
    const int oh = (in.height + size - 1) / size;
    const int ow = (in.width + size - 1) / size;
    FeatureMap out(in.channels, oh, ow, -1);
    for (int c = 0; c < in.channels; ++c) {
        for (int y = 0; y < in.height; ++y) {
            for (int x = 0; x < in.width; ++x) {
                if (in.at(c, y, x) > 0) out.at(c, y / size, x / size) = 1;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::array<int, 3>> layer_input_shapes(const BnnModel& model) {
    std::vector<std::array<int, 3>> shapes;
    std::array<int, 3> shape = model.input_shape;
    for (const auto& layer : model.layers) {
        const auto& s = layer.spec;
        if (s.kind == LayerKind::fc) {
            shape = {shape[0] * shape[1] * shape[2], 1, 1};
            shapes.push_back(shape);
            shape = {s.out_dim, 1, 1};
        } else {
            shapes.push_back(shape);
            int h = conv_output_size(shape[1], s.kernel_h, s.stride, s.padding);
            int w = conv_output_size(shape[2], s.kernel_w, s.stride, s.padding);
            if (s.pool) {
                h = (h + *s.pool - 1) / *s.pool;
                w = (w + *s.pool - 1) / *s.pool;
            }
            shape = {s.out_channels, h, w};
        }
    }
    return shapes;
}

void validate(const BnnModel& model) {
    if (model.layers.empty()) throw std::invalid_argument("model has no layers");
    if (model.input_shape[0] < 1 || model.input_shape[1] < 1 || model.input_shape[2] < 1) {
        throw std::invalid_argument("model input shape must be positive");
    }
    const auto shapes = layer_input_shapes(model);
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& layer = model.layers[li];
        const auto& s = layer.spec;
        const std::string where = "layer '" + layer.name + "': ";
        validate(s);
        if (s.kind == LayerKind::fc) {
            if (shapes[li][0] != s.in_dim) {
                throw std::invalid_argument(where + "expects " + std::to_string(s.in_dim) + " inputs, gets " +
                                            std::to_string(shapes[li][0]));
            }
            if (s.pool) throw std::invalid_argument(where + "pooling is only supported after CONV layers");
        } else if (shapes[li][0] != s.in_channels) {
            throw std::invalid_argument(where + "channel count does not chain");
        }
        if (static_cast<int>(layer.weights.size()) != s.kernel_positions()) {
            throw std::invalid_argument(where + "needs one weight matrix per kernel position");
        }
        for (const auto& w : layer.weights) {
            if (w.rows() != s.rows() || w.cols() != s.cols()) throw std::invalid_argument(where + "weight shape mismatch");
            for (Bit b : w.data()) {
                if (!is_binary(b)) throw std::invalid_argument(where + "weights must be +1 or -1");
            }
        }
        const auto channels = static_cast<std::size_t>(s.cols());
        if (layer.bn) {
            const auto& bn = *layer.bn;
            if (bn.gamma.size() != channels || bn.beta.size() != channels || bn.mean.size() != channels ||
                bn.var.size() != channels) {
                throw std::invalid_argument(where + "batch-norm parameter count mismatch");
            }
        } else if (!layer.thresholds.empty() && layer.thresholds.size() != channels) {
            throw std::invalid_argument(where + "threshold count mismatch");
        }
        const bool last = li + 1 == model.layers.size();
        if (!last && s.activation != Activation::sign_binarize) {
            throw std::invalid_argument(where + "hidden layers must binarize their outputs");
        }
    }
}

BnnModel fold_batchnorm(const BnnModel& model) {
    BnnModel out = model;
    for (auto& layer : out.layers) {
        // an unbinarized (last) layer keeps its affine bn for the scores
        if (!layer.bn || layer.spec.activation == Activation::none) continue;
        const auto& bn = *layer.bn;
        layer.thresholds.clear();
        for (std::size_t c = 0; c < bn.size(); ++c) {
            layer.thresholds.push_back(batchnorm_fold(bn.gamma[c], bn.beta[c], bn.mean[c], bn.var[c], bn.eps));
        }
        layer.bn.reset();
    }
    return out;
}

std::string_view to_string(Fidelity f) {
    switch (f) {
        case Fidelity::ideal_digital: return "IDEAL_DIGITAL";
        case Fidelity::analog_sim: return "ANALOG_SIM";
        case Fidelity::stochastic_histogram: return "STOCHASTIC_HISTOGRAM";
    }
    return "?";
}

Fidelity parse_fidelity(std::string_view s) {
    if (s == "IDEAL_DIGITAL") return Fidelity::ideal_digital;
    if (s == "ANALOG_SIM") return Fidelity::analog_sim;
    if (s == "STOCHASTIC_HISTOGRAM") return Fidelity::stochastic_histogram;
    throw ConfigError("unknown inference mode '" + std::string(s) + "'");
}

CompiledModel compile(const BnnModel& model, PadPolicy policy) {
    validate(model);
    CompiledModel c;
    c.model = model;
    c.pad_policy = policy;
    c.input_shapes = layer_input_shapes(model);
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& layer = model.layers[li];
        auto plan = plan_layer(layer.spec, policy);
        plan.layer = layer.name;
        std::vector<WeightTile> tiles;
        tiles.reserve(plan.tiles.size());
        for (const auto& t : plan.tiles) {
            tiles.push_back(tile_weights(t, layer.weights[static_cast<std::size_t>(t.kpos)]));
        }
        // Column sums per kernel position: the bitcount a fully out-of-bounds tap adds
        // when every gathered activation is +1.
        std::vector<int> sums(static_cast<std::size_t>(layer.spec.kernel_positions() * layer.spec.cols()), 0);
        if (layer.spec.kind == LayerKind::conv) {
            for (int k = 0; k < layer.spec.kernel_positions(); ++k) {
                const auto& w = layer.weights[static_cast<std::size_t>(k)];
                for (int r = 0; r < w.rows(); ++r) {
                    for (int o = 0; o < w.cols(); ++o) sums[static_cast<std::size_t>(k * w.cols() + o)] += w(r, o);
                }
            }
        }
        c.schedules.push_back(make_schedule(plan));
        c.plans.push_back(std::move(plan));
        c.tiles.push_back(std::move(tiles));
        c.kernel_sums.push_back(std::move(sums));
    }
    return c;
}

AnalogHardware build_analog_hardware(const CompiledModel& compiled, const HardwareOptions& options,
                                     std::uint64_t seed, int threads) {
    validate(options.header);
    AnalogHardware hw;
    hw.header = options.header;

    struct Job {
        std::size_t layer;
        std::size_t tile;
    };
    std::vector<Job> jobs;
    for (std::size_t li = 0; li < compiled.tiles.size(); ++li) {
        hw.macros.emplace_back(compiled.tiles[li].size(), MacroArray(options.vdd));
        hw.adcs.emplace_back(compiled.tiles[li].size());
        for (std::size_t t = 0; t < compiled.tiles[li].size(); ++t) jobs.push_back({li, t});
    }

    parallel_for(jobs.size(), threads, [&](std::size_t j) {
        const auto [li, t] = jobs[j];
        auto& macro = hw.macros[li][t];
        const auto& weights = compiled.tiles[li][t];
        if (options.exact_resistances) {
            macro.program_exact(weights, options.exact_resistances->first, options.exact_resistances->second);
        } else {
            macro.program_weights(weights, options.device, options.targets, derive_seed(seed, 1, li, t));
        }
        Rng offset_rng = make_stream(seed, 2, li, t);
        const OffsetBank offsets = draw_offsets(options.offset_sigma, offset_rng);
        if (options.midpoint_refs) {
            AdcConfig cfg;
            cfg.scheme = options.scheme;
            cfg.offsets = offsets;
            for (int s = 0; s < ref_set_count(options.scheme); ++s) {
                const int col = options.scheme == RefScheme::per_column_64 ? s
                               : options.scheme == RefScheme::per_adc_8   ? s * kColumnsPerAdc
                                                                          : 0;
                cfg.ref_sets.push_back(midpoint_refs(macro, col, options.header, options.calibration.reference_bitcounts));
            }
            hw.adcs[li][t] = std::move(cfg);
        } else {
            hw.adcs[li][t] = calibrate_all(macro, offsets, options.scheme, options.calibration, options.header,
                                           derive_seed(seed, 3, li, t));
        }
    });
    return hw;
}

void validate(const InferenceMode& mode) {
    switch (mode.fidelity) {
        case Fidelity::ideal_digital:
            if (mode.ideal_quantizer) validate(*mode.ideal_quantizer);
            break;
        case Fidelity::analog_sim:
            if (mode.hardware == nullptr) throw std::invalid_argument("ANALOG_SIM needs programmed hardware");
            validate(mode.dequant);
            if (mode.dequant.levels() != kLevels) throw std::invalid_argument("ADC dequant table needs 8 values");
            break;
        case Fidelity::stochastic_histogram:
            if (mode.histogram == nullptr || mode.histogram->empty()) {
                throw std::invalid_argument("STOCHASTIC_HISTOGRAM needs a non-empty histogram");
            }
            validate(mode.dequant);
            if (mode.dequant.levels() != kLevels) throw std::invalid_argument("ADC dequant table needs 8 values");
            break;
    }
}

namespace {

int tile_dot(const WeightTile& w, const InputVector& x, int col) {
    int b = 0;
    for (int r = 0; r < kRows; ++r) b += x[static_cast<std::size_t>(r)] * w(r, col);
    return b;
}

/// Writes the dequantized column outputs of one tile for one input vector.
void run_tile(const CompiledModel& compiled, const InferenceMode& mode, std::size_t li, std::size_t ti,
              const InputVector& x, Rng& rng, TileOutputs& out) {
    const auto& tile = compiled.plans[li].tiles[ti];
    const auto& w = compiled.tiles[li][ti];
    for (int c = 0; c < tile.used_cols; ++c) {
        int value = 0;
        switch (mode.fidelity) {
            case Fidelity::ideal_digital: {
                const int b = tile_dot(w, x, c);
                value = mode.ideal_quantizer ? dequantize(quantize(b, *mode.ideal_quantizer), *mode.ideal_quantizer) : b;
                break;
            }
            case Fidelity::analog_sim: {
                const auto& macro = mode.hardware->macros[li][ti];
                const auto& adc = mode.hardware->adcs[li][ti];
                const double v = macro.evaluate_bitline(c, x, mode.hardware->header).voltage;
                value = dequantize(adc.digitize_column(c, v), mode.dequant);
                break;
            }
            case Fidelity::stochastic_histogram: {
                const int b = tile_dot(w, x, c);
                value = dequantize(stochastic_quantize(b, *mode.histogram, rng), mode.dequant);
                break;
            }
        }
        out.set(static_cast<int>(ti), c, value);
    }
}

}  // namespace

InferenceResult infer(const CompiledModel& compiled, std::span<const float> image, const InferenceMode& mode,
                      std::uint64_t seed, std::uint64_t sample) {
    validate(mode);
    const auto& model = compiled.model;
    const std::size_t expected =
        static_cast<std::size_t>(model.input_shape[0]) * model.input_shape[1] * model.input_shape[2];
    if (image.size() != expected) {
        throw std::invalid_argument("image has " + std::to_string(image.size()) + " values, model expects " +
                                    std::to_string(expected));
    }
    if (mode.fidelity == Fidelity::analog_sim && mode.hardware->macros.size() != model.layers.size()) {
        throw std::invalid_argument("analog hardware does not match the model");
    }

    std::vector<Bit> acts = binarize_input(image, model.binarize_threshold);
    InferenceResult result;

    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& layer = model.layers[li];
        const auto& spec = layer.spec;
        const auto& plan = compiled.plans[li];
        const auto& schedule = compiled.schedules[li];
        const auto shape = compiled.input_shapes[li];
        const bool last = li + 1 == model.layers.size();
        const auto cols = static_cast<std::size_t>(spec.cols());

        std::vector<Rng> rngs;
        rngs.reserve(plan.tiles.size());
        for (std::size_t t = 0; t < plan.tiles.size(); ++t) rngs.push_back(make_stream(seed, sample, li, t));

        TileOutputs outputs(plan.tiles.size());
        std::vector<std::int16_t> pre;  // [loc][o]
        int out_h = 1;
        int out_w = 1;

        if (spec.kind == LayerKind::fc) {
            for (std::size_t t = 0; t < plan.tiles.size(); ++t) {
                run_tile(compiled, mode, li, t, tile_input(plan.tiles[t], acts), rngs[t], outputs);
            }
            pre = accumulate(schedule, outputs);
        } else {
            FeatureMap fm(shape[0], shape[1], shape[2]);
            fm.data = acts;
            const Im2Col im = im2col_inputs(fm, spec, 1);
            out_h = im.out_h;
            out_w = im.out_w;
            const auto& sums = compiled.kernel_sums[li];
            std::vector<int> extra(cols);
            pre.reserve(static_cast<std::size_t>(im.locations()) * cols);
            for (int loc = 0; loc < im.locations(); ++loc) {
                outputs.clear();
                for (std::size_t t = 0; t < plan.tiles.size(); ++t) {
                    const auto& tile = plan.tiles[t];
                    run_tile(compiled, mode, li, t, tile_input(tile, im.gather(loc, tile.kpos)), rngs[t], outputs);
                }
                std::fill(extra.begin(), extra.end(), 0);
                for (int k = 0; k < im.kernel_positions; ++k) {
                    if (!im.is_outside(loc, k)) continue;
                    for (std::size_t o = 0; o < cols; ++o) extra[o] += sums[static_cast<std::size_t>(k) * cols + o];
                }
                const auto part = accumulate(schedule, outputs, extra);
                pre.insert(pre.end(), part.begin(), part.end());
            }
        }

        const std::size_t locations = pre.size() / cols;
        if (last) {
            // Scores stay in fixed point (optionally affine-normalized); argmax decides.
            // Channel-major like every other activation tensor.
            result.scores.resize(pre.size());
            for (std::size_t loc = 0; loc < locations; ++loc) {
                for (std::size_t o = 0; o < cols; ++o) {
                    const double x = pre[loc * cols + o];
                    result.scores[o * locations + loc] = layer.bn ? layer.bn->apply(o, x) : x;
                }
            }
            break;
        }

        // Binarize; conv outputs are reordered from [loc][o] to channel-major.
        std::vector<Bit> next(pre.size());
        for (std::size_t loc = 0; loc < locations; ++loc) {
            for (std::size_t o = 0; o < cols; ++o) {
                const double x = pre[loc * cols + o];
                Bit b = 0;
                if (layer.bn) {
                    const auto& bn = *layer.bn;
                    b = batchnorm_sign(x, bn.gamma[o], bn.beta[o], bn.mean[o], bn.var[o], bn.eps);
                } else if (!layer.thresholds.empty()) {
                    b = layer.thresholds[o].apply(x);
                } else {
                    b = x >= 0.0 ? Bit{1} : Bit{-1};
                }
                next[o * locations + loc] = b;
            }
        }
        if (spec.kind == LayerKind::conv && spec.pool) {
            FeatureMap fm(spec.out_channels, out_h, out_w);
            fm.data = std::move(next);
            next = maxpool_binary(fm, *spec.pool).data;
        }
        acts = std::move(next);
    }

    const auto best = std::max_element(result.scores.begin(), result.scores.end());
    result.predicted = static_cast<int>(std::distance(result.scores.begin(), best));
    return result;
}

// ---------------------------------------------------------------------------

BoxStats summarize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("cannot summarize an empty list");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    auto quantile = [&v](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    BoxStats s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.p25 = quantile(0.25);
    s.p75 = quantile(0.75);
    s.min = v.front();
    s.max = v.back();
    return s;
}

std::vector<std::uint64_t> default_seeds(int runs, std::uint64_t base) {
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(std::max(runs, 0)));
    std::iota(seeds.begin(), seeds.end(), base);
    return seeds;
}

EvalReport evaluate(const CompiledModel& compiled, const Dataset& dataset, const EvalConfig& config) {
    if (dataset.size() == 0) throw std::invalid_argument("dataset is empty");
    if (config.seeds.empty()) throw std::invalid_argument("evaluation needs at least one seed");
    const std::size_t n = config.max_samples ? std::min(*config.max_samples, dataset.size()) : dataset.size();

    EvalReport report;
    report.mode = config.mode.fidelity;
    if (config.mode.fidelity == Fidelity::analog_sim) report.scheme = config.hardware.scheme;
    report.seeds = config.seeds;
    report.samples = n;

    for (const auto seed : config.seeds) {
        InferenceMode mode = config.mode;
        std::optional<AnalogHardware> hw;
        if (mode.fidelity == Fidelity::analog_sim) {
            hw = build_analog_hardware(compiled, config.hardware, seed, config.threads);
            mode.hardware = &*hw;
        }
        validate(mode);
        std::vector<std::uint8_t> hit(n, 0);
        parallel_for(n, config.threads, [&](std::size_t i) {
            const auto r = infer(compiled, dataset.image(i), mode, seed, i);
            hit[i] = r.predicted == dataset.labels[i] ? 1 : 0;
        });
        const auto correct = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
        report.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    report.stats = summarize(report.accuracies);
    return report;
}

}  // namespace xnor_rram
