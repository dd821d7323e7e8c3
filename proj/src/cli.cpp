#include "xnor_rram/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "xnor_rram/model_io.hpp"
#include "xnor_rram/parallel.hpp"

namespace xnor_rram {

namespace fs = std::filesystem;

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg = flags.config ? load_run_config(*flags.config) : parse_run_config(Json::object());
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.output_dir = *flags.out;
    if (flags.threads) cfg.threads = *flags.threads;
    validate(cfg);
    return cfg;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    return os;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

Dataset load_dataset(const RunConfig& cfg) {
    if (!cfg.dataset) throw ConfigError("this command needs a dataset section");
    const auto& d = *cfg.dataset;
    if (d.format == "cifar10") {
        if (d.batches.empty()) throw ConfigError("dataset.batches is empty");
        return load_cifar10(d.batches);
    }
    if (d.images.empty() || d.labels.empty()) throw ConfigError("dataset.images and dataset.labels are required");
    return load_idx(d.images, d.labels);
}

CompiledModel load_compiled(const RunConfig& cfg) {
    if (!cfg.model) throw ConfigError("this command needs a model manifest");
    return compile(load_model(*cfg.model), cfg.pad_policy);
}

HardwareOptions hardware_options(const RunConfig& cfg) {
    HardwareOptions o;
    o.device = cfg.device;
    o.targets = cfg.targets;
    o.header = cfg.header;
    o.vdd = cfg.vdd;
    o.offset_sigma = cfg.offset_sigma;
    o.scheme = cfg.scheme;
    o.calibration = cfg.calibration;
    return o;
}

struct ModeHolder {
    InferenceMode mode;
    std::optional<ConditionalHistogram> histogram;
};

/// Mode without hardware; the histogram is loaded for STOCHASTIC_HISTOGRAM.
ModeHolder make_mode(const RunConfig& cfg) {
    ModeHolder h;
    h.mode.fidelity = cfg.mode;
    h.mode.ideal_quantizer = cfg.ideal_quantizer;
    h.mode.dequant = cfg.dequant;
    if (cfg.mode == Fidelity::stochastic_histogram) {
        const fs::path path = cfg.histogram ? *cfg.histogram : cfg.output_dir / paths::kHistogram;
        h.histogram = ConditionalHistogram::read_csv(path);
    }
    return h;
}

struct TileEntry {
    int layer = 0;
    int tile = 0;
    std::string name;
};

std::string tile_name(int layer, int tile) { return "L" + std::to_string(layer) + "_T" + std::to_string(tile); }

std::vector<TileEntry> read_tiles(const RunConfig& cfg) {
    const auto doc = read_json(cfg.output_dir / paths::kTiles);
    std::vector<TileEntry> out;
    try {
        for (const auto& t : doc.at("tiles")) {
            out.push_back({t.at("layer").get<int>(), t.at("tile").get<int>(), t.at("name").get<std::string>()});
        }
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed tiles.json: ") + e.what());
    }
    if (out.empty()) throw IoError("tiles.json lists no tiles");
    return out;
}

fs::path snapshot_path(const RunConfig& cfg, const std::string& name) {
    return cfg.output_dir / paths::kSnapshots / (name + ".bin");
}

fs::path adc_path(const RunConfig& cfg, const std::string& name) {
    return cfg.output_dir / paths::kAdc / (name + ".json");
}

/// Weight tiles to program: the compiled model's or one random tile.
std::vector<std::pair<TileEntry, WeightTile>> tiles_to_program(const RunConfig& cfg, Json& plans) {
    std::vector<std::pair<TileEntry, WeightTile>> out;
    plans = Json::array();
    if (cfg.model) {
        const auto compiled = load_compiled(cfg);
        for (std::size_t li = 0; li < compiled.tiles.size(); ++li) {
            plans.push_back(to_json(compiled.plans[li]));
            for (std::size_t t = 0; t < compiled.tiles[li].size(); ++t) {
                const int l = static_cast<int>(li);
                const int ti = static_cast<int>(t);
                out.push_back({{l, ti, tile_name(l, ti)}, compiled.tiles[li][t]});
            }
        }
    } else {
        Rng rng = make_stream(cfg.seed, 0);
        out.push_back({{0, 0, tile_name(0, 0)}, WeightTile::random(rng)});
    }
    return out;
}

void merge(ProgrammingReport& into, ProgrammingReport&& from) {
    into.lrs_converged += from.lrs_converged;
    into.hrs_converged += from.hrs_converged;
    into.lrs_total += from.lrs_total;
    into.hrs_total += from.hrs_total;
    for (auto& c : from.cells) into.cells.push_back(std::move(c));
}

double population_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

Json cmd_program(const RunConfig& cfg) {
    Json plans;
    auto jobs = tiles_to_program(cfg, plans);
    ensure_dir(cfg.output_dir / paths::kSnapshots);
    if (cfg.trace_all_tiles) ensure_dir(cfg.output_dir / "traces");

    std::vector<MacroArray> macros(jobs.size(), MacroArray(cfg.vdd));
    std::vector<ProgrammingReport> reports(jobs.size());
    // rounds[r][tile]: LRS standard deviation after re-programming round r (0 = initial).
    std::vector<std::vector<double>> round_std(static_cast<std::size_t>(cfg.reprogram_rounds) + 1,
                                               std::vector<double>(jobs.size()));
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
        const auto& e = jobs[j].first;
        const auto seed = derive_seed(cfg.seed, 1, e.layer, e.tile);
        reports[j] = macros[j].program_weights(jobs[j].second, cfg.device, cfg.targets, seed);
        round_std[0][j] = population_std(reports[j].lrs_resistances());
        for (int r = 1; r <= cfg.reprogram_rounds; ++r) {
            reports[j] = macros[j].reprogram(cfg.device, cfg.targets, seed, r);
            round_std[static_cast<std::size_t>(r)][j] = population_std(reports[j].lrs_resistances());
        }
    });

    Json tiles = Json::array();
    Json per_tile = Json::array();
    ProgrammingReport total;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto& e = jobs[j].first;
        macros[j].save_snapshot(snapshot_path(cfg, e.name));
        tiles.push_back({{"layer", e.layer}, {"tile", e.tile}, {"name", e.name}});
        per_tile.push_back({{"name", e.name}, {"yield", reports[j].yield()}});
        if (cfg.trace_all_tiles) {
            auto os = open_out(cfg.output_dir / "traces" / (e.name + ".csv"));
            write_trace_csv_header(os);
            write_trace_csv(os, reports[j]);
        }
    }
    {
        auto os = open_out(cfg.output_dir / paths::kTrace);
        write_trace_csv_header(os);
        write_trace_csv(os, reports.front());
    }
    for (auto& r : reports) merge(total, std::move(r));

    Json index;
    index["model"] = cfg.model ? Json(cfg.model->string()) : Json(nullptr);
    index["seed"] = cfg.seed;
    index["tiles"] = tiles;
    index["plans"] = plans;
    write_json(cfg.output_dir / paths::kTiles, index);

    Json summary = yield_summary(total);
    summary["tiles"] = per_tile;
    if (cfg.reprogram_rounds > 0) {
        Json rounds = Json::array();
        for (const auto& r : round_std) {
            rounds.push_back(std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size()));
        }
        summary["lrs_std_per_round"] = rounds;
    }
    summary["yield_floor"] = cfg.yield_floor;
    write_json(cfg.output_dir / paths::kYield, summary);

    if (total.yield() < cfg.yield_floor) {
        throw ConvergenceError("programming yield " + format_double(total.yield()) + " is below the floor " +
                               format_double(cfg.yield_floor));
    }
    return summary;
}

Json cmd_calibrate(const RunConfig& cfg) {
    const auto tiles = read_tiles(cfg);
    ensure_dir(cfg.output_dir / paths::kAdc);
    std::vector<MacroArray> macros;
    macros.reserve(tiles.size());
    for (const auto& t : tiles) macros.push_back(MacroArray::load_snapshot(snapshot_path(cfg, t.name), cfg.vdd));

    std::vector<AdcConfig> adcs(tiles.size());
    parallel_for(tiles.size(), cfg.threads, [&](std::size_t j) {
        const auto& t = tiles[j];
        Rng offset_rng = make_stream(cfg.seed, 2, t.layer, t.tile);
        const auto offsets = draw_offsets(cfg.offset_sigma, offset_rng);
        adcs[j] = calibrate_all(macros[j], offsets, cfg.scheme, cfg.calibration, cfg.header,
                                derive_seed(cfg.seed, 3, t.layer, t.tile));
    });
    Json summary;
    summary["scheme"] = std::string(to_string(cfg.scheme));
    summary["tiles"] = tiles.size();
    summary["ref_sets_per_tile"] = ref_set_count(cfg.scheme);
    for (std::size_t j = 0; j < tiles.size(); ++j) write_json(adc_path(cfg, tiles[j].name), to_json(adcs[j]));
    return summary;
}

Json cmd_characterize(const RunConfig& cfg) {
    const auto tiles = read_tiles(cfg);
    const auto& first = tiles.front();
    const auto macro = MacroArray::load_snapshot(snapshot_path(cfg, first.name), cfg.vdd);
    const auto adc = adc_config_from_json(read_json(adc_path(cfg, first.name)));

    {
        auto os = open_out(cfg.output_dir / paths::kTransfer);
        write_transfer_csv_header(os);
        for (int s = 1; s <= 8; ++s) {
            HeaderConfig h = cfg.header;
            h.strength = s;
            Rng rng = make_stream(cfg.seed, 4, s);
            write_transfer_csv(os, s, transfer_curve(macro, 0, h, cfg.curve_samples, rng));
        }
    }
    Rng rng = make_stream(cfg.seed, 5);
    const auto pairs = measure_pairs(macro, adc, cfg.header, cfg.characterize_vectors, rng);
    const auto hist = build_conditional_histogram(pairs);
    hist.write_csv(cfg.output_dir / paths::kHistogram);

    Json summary;
    summary["tile"] = first.name;
    summary["pairs"] = pairs.size();
    summary["strengths"] = 8;
    return summary;
}

Json cmd_infer(const RunConfig& cfg) {
    const auto compiled = load_compiled(cfg);
    const auto dataset = load_dataset(cfg);
    if (cfg.infer_index >= dataset.size()) throw ConfigError("infer.index is outside the dataset");
    auto holder = make_mode(cfg);
    if (holder.histogram) holder.mode.histogram = &*holder.histogram;
    std::optional<AnalogHardware> hw;
    if (cfg.mode == Fidelity::analog_sim) {
        hw = build_analog_hardware(compiled, hardware_options(cfg), cfg.seed, cfg.threads);
        holder.mode.hardware = &*hw;
    }
    const auto r = infer(compiled, dataset.image(cfg.infer_index), holder.mode, cfg.seed, cfg.infer_index);
    Json out;
    out["index"] = cfg.infer_index;
    out["label"] = dataset.labels[cfg.infer_index];
    out["predicted"] = r.predicted;
    out["scores"] = r.scores;
    out["mode"] = std::string(to_string(cfg.mode));
    ensure_dir(cfg.output_dir);
    write_json(cfg.output_dir / paths::kInfer, out);
    return out;
}

Json cmd_evaluate(const RunConfig& cfg) {
    const auto compiled = load_compiled(cfg);
    const auto dataset = load_dataset(cfg);
    auto holder = make_mode(cfg);
    if (holder.histogram) holder.mode.histogram = &*holder.histogram;
    EvalConfig ec;
    ec.mode = holder.mode;
    ec.hardware = hardware_options(cfg);
    ec.seeds = cfg.eval_seeds();
    ec.threads = cfg.threads;
    ec.max_samples = cfg.max_samples;
    const auto report = evaluate(compiled, dataset, ec);
    ensure_dir(cfg.output_dir);
    const auto j = to_json(report);
    write_json(cfg.output_dir / paths::kEvalJson, j);
    auto os = open_out(cfg.output_dir / paths::kEvalCsv);
    write_eval_csv(os, report);
    return j;
}

Json cmd_perf(const RunConfig& cfg) {
    MacroArray macro(cfg.vdd);
    std::string source = "nominal";
    const fs::path index = cfg.output_dir / paths::kTiles;
    if (fs::exists(index)) {
        macro = MacroArray::load_snapshot(snapshot_path(cfg, read_tiles(cfg).front().name), cfg.vdd);
        source = "snapshot";
    } else {
        macro.program_exact(WeightTile{}, 6000.0, 3e6);
    }
    PerfParams p = cfg.perf;
    p.vdd = cfg.vdd;
    auto j = to_json(perf_report(p, macro, cfg.header, uniform_input_distribution()));
    j["power_source"] = source;
    ensure_dir(cfg.output_dir);
    write_json(cfg.output_dir / paths::kPerfJson, j);
    auto os = open_out(cfg.output_dir / paths::kPerfCsv);
    write_comparison_csv(os, p, cfg.prior_work);
    return j;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Behavioral simulator of an RRAM XNOR in-memory-computing macro"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::optional<std::string> mode;
    std::optional<std::string> scheme;
    std::optional<int> runs;
    std::optional<std::size_t> max_samples;
    std::optional<std::size_t> index;
    std::optional<std::string> model;

    auto add_common = [&flags](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "Base random seed");
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--threads", flags.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    };

    auto* program = app.add_subcommand("program", "Program model tiles with write-verify");
    auto* calibrate = app.add_subcommand("calibrate", "Calibrate ADC reference voltages");
    auto* characterize = app.add_subcommand("characterize", "Transfer curves and conditional histogram");
    auto* infer_cmd = app.add_subcommand("infer", "Classify one dataset sample");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Multi-seed accuracy evaluation");
    auto* perf = app.add_subcommand("perf", "Throughput, figures of merit and power");
    for (auto* sub : {program, calibrate, characterize, infer_cmd, evaluate_cmd, perf}) add_common(sub);
    for (auto* sub : {program, calibrate, infer_cmd, evaluate_cmd}) {
        sub->add_option("--scheme", scheme, "UNIFIED_1, PER_ADC_8 or PER_COLUMN_64");
        sub->add_option("--model", model, "Model manifest");
    }
    for (auto* sub : {infer_cmd, evaluate_cmd}) {
        sub->add_option("--mode", mode, "IDEAL_DIGITAL, ANALOG_SIM or STOCHASTIC_HISTOGRAM");
    }
    evaluate_cmd->add_option("--runs", runs, "Number of seeds (1..runs)")->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--max-samples", max_samples, "Evaluate only the first N samples");
    infer_cmd->add_option("--index", index, "Dataset sample index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        RunConfig cfg = resolve_config(flags);
        if (mode) cfg.mode = parse_fidelity(*mode);
        if (scheme) cfg.scheme = parse_ref_scheme(*scheme);
        if (runs) {
            cfg.runs = *runs;
            cfg.seeds.clear();
        }
        if (max_samples) cfg.max_samples = *max_samples;
        if (index) cfg.infer_index = *index;
        if (model) cfg.model = *model;
        validate(cfg);

        Json result;
        if (program->parsed()) result = cmd_program(cfg);
        if (calibrate->parsed()) result = cmd_calibrate(cfg);
        if (characterize->parsed()) result = cmd_characterize(cfg);
        if (infer_cmd->parsed()) result = cmd_infer(cfg);
        if (evaluate_cmd->parsed()) result = cmd_evaluate(cfg);
        if (perf->parsed()) result = cmd_perf(cfg);
        std::cout << result.dump(2) << '\n';
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence failure: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace xnor_rram
