#include "xnor_rram/config.hpp"

#include <set>

namespace xnor_rram {

namespace {

/// Typed view of one JSON object that rejects keys nobody asked about.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    template <typename T>
    void read(const char* key, T& out) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const Json::exception&) {
            throw ConfigError(where() + "." + key + " has the wrong type");
        }
    }

    template <typename T>
    void read(const char* key, std::optional<T>& out) {
        known_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        T v{};
        read(key, v);
        out = v;
    }

    Section child(const char* key) {
        known_.insert(key);
        return Section(j_.at(key), path_ + "." + key);
    }

    const Json& raw(const char* key) {
        known_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (known_.count(key) == 0) throw ConfigError("unknown key '" + key + "' in " + where());
        }
    }

    std::string where() const { return path_.empty() ? "config" : path_; }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> known_;
};

QuantizerSpec quantizer_from_json(const Json& j, const std::string& where) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "confined") return QuantizerSpec::confined();
        if (s.rfind("full_range_", 0) == 0) {
            try {
                return QuantizerSpec::full_range(std::stoi(s.substr(11)));
            } catch (const std::exception&) {
            }
        }
        throw ConfigError(where + ": unknown quantizer '" + s + "'");
    }
    Section q(j, where);
    QuantizerSpec spec;
    q.read("edges", spec.edges);
    q.read("dequant_values", spec.dequant_values);
    q.finish();
    return spec;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::vector<std::uint64_t> RunConfig::eval_seeds() const { return seeds.empty() ? default_seeds(runs) : seeds; }

RunConfig parse_run_config(const Json& doc, const std::filesystem::path& base) {
    RunConfig cfg;
    Section root(doc, "");
    root.read("seed", cfg.seed);
    root.read("threads", cfg.threads);
    std::string out;
    root.read("output_dir", out);
    if (!out.empty()) cfg.output_dir = resolve(base, out);
    root.read("vdd", cfg.vdd);

    if (root.has("device")) {
        auto d = root.child("device");
        auto& p = cfg.device;
        d.read("lrs_intercept", p.lrs_intercept);
        d.read("lrs_slope", p.lrs_slope);
        d.read("lrs_sigma_rel", p.lrs_sigma_rel);
        d.read("hrs_log_median", p.hrs_log_median);
        d.read("hrs_log_sigma", p.hrs_log_sigma);
        d.read("gate_step", p.gate_step);
        d.read("gate_min", p.gate_min);
        d.read("gate_max", p.gate_max);
        d.read("lrs_min", p.lrs_min);
        d.read("lrs_max", p.lrs_max);
        d.read("hrs_floor", p.hrs_floor);
        d.finish();
    }
    if (root.has("program")) {
        auto p = root.child("program");
        if (p.has("lrs")) {
            auto l = p.child("lrs");
            l.read("lo", cfg.targets.lrs.lo);
            l.read("hi", cfg.targets.lrs.hi);
            l.read("max_iter", cfg.targets.lrs.max_iter);
            l.read("initial_gate_v", cfg.targets.lrs.initial_gate_v);
            l.finish();
        }
        if (p.has("hrs")) {
            auto h = p.child("hrs");
            h.read("threshold", cfg.targets.hrs.threshold);
            h.read("max_iter", cfg.targets.hrs.max_iter);
            h.finish();
        }
        p.read("yield_floor", cfg.yield_floor);
        p.read("reprogram_rounds", cfg.reprogram_rounds);
        p.read("trace_all_tiles", cfg.trace_all_tiles);
        p.finish();
    }
    if (root.has("header")) {
        auto h = root.child("header");
        h.read("strength", cfg.header.strength);
        if (h.has("pullup_ohms")) {
            std::vector<double> table;
            h.read("pullup_ohms", table);
            if (table.size() != cfg.header.pullup_ohms.size()) {
                throw ConfigError("header.pullup_ohms needs 8 entries");
            }
            std::copy(table.begin(), table.end(), cfg.header.pullup_ohms.begin());
        }
        h.finish();
    }
    if (root.has("adc")) {
        auto a = root.child("adc");
        a.read("offset_sigma", cfg.offset_sigma);
        std::string scheme;
        a.read("scheme", scheme);
        if (!scheme.empty()) cfg.scheme = parse_ref_scheme(scheme);
        if (a.has("calibration")) {
            auto c = a.child("calibration");
            c.read("alpha", cfg.calibration.alpha);
            c.read("beta", cfg.calibration.beta);
            c.read("n_vectors", cfg.calibration.n_vectors);
            c.read("v_init", cfg.calibration.v_init);
            c.read("reference_bitcounts", cfg.calibration.reference_bitcounts);
            c.finish();
        }
        if (a.has("quantizer")) cfg.dequant = quantizer_from_json(a.raw("quantizer"), "adc.quantizer");
        a.finish();
    }
    if (root.has("mapper")) {
        auto m = root.child("mapper");
        std::string policy;
        m.read("pad_policy", policy);
        if (!policy.empty()) cfg.pad_policy = parse_pad_policy(policy);
        m.finish();
    }
    if (root.has("emulator")) {
        auto e = root.child("emulator");
        std::string mode;
        e.read("mode", mode);
        if (!mode.empty()) cfg.mode = parse_fidelity(mode);
        e.read("runs", cfg.runs);
        e.read("seeds", cfg.seeds);
        e.read("max_samples", cfg.max_samples);
        if (e.has("ideal_quantizer")) {
            const Json& q = e.raw("ideal_quantizer");
            if (!q.is_null()) cfg.ideal_quantizer = quantizer_from_json(q, "emulator.ideal_quantizer");
        }
        std::optional<std::string> hist;
        e.read("histogram", hist);
        if (hist) cfg.histogram = resolve(base, *hist);
        e.finish();
    }
    if (root.has("characterize")) {
        auto c = root.child("characterize");
        c.read("vectors", cfg.characterize_vectors);
        c.read("curve_samples", cfg.curve_samples);
        c.finish();
    }
    if (root.has("perf")) {
        auto p = root.child("perf");
        p.read("rows_1t1r", cfg.perf.rows_1t1r);
        p.read("xnor_rows", cfg.perf.xnor_rows);
        p.read("adcs", cfg.perf.adcs);
        p.read("columns", cfg.perf.columns);
        p.read("read_delay_ns", cfg.perf.read_delay_ns);
        p.read("energy_eff_tops_w", cfg.perf.energy_eff_tops_w);
        p.read("ops_per_column_eval", cfg.perf.ops_per_column_eval);
        p.read("periphery_mw", cfg.perf.periphery_mw);
        if (p.has("prior_work")) {
            cfg.prior_work.clear();
            const auto& rows = p.raw("prior_work");
            if (!rows.is_array()) throw ConfigError("perf.prior_work must be an array");
            for (std::size_t i = 0; i < rows.size(); ++i) {
                Section r(rows[i], "perf.prior_work[" + std::to_string(i) + "]");
                ComparisonRow row;
                r.read("name", row.name);
                r.read("ops_per_adc", row.ops_per_adc);
                r.read("delay_ns", row.delay_ns);
                r.read("energy_eff_tops_w", row.energy_eff_tops_w);
                r.finish();
                cfg.prior_work.push_back(row);
            }
        }
        p.finish();
    }
    if (root.has("dataset")) {
        auto d = root.child("dataset");
        DatasetConfig ds;
        std::string images;
        std::string labels;
        std::vector<std::string> batches;
        d.read("format", ds.format);
        d.read("images", images);
        d.read("labels", labels);
        d.read("batches", batches);
        d.finish();
        if (ds.format != "idx" && ds.format != "cifar10") throw ConfigError("dataset.format must be idx or cifar10");
        if (!images.empty()) ds.images = resolve(base, images);
        if (!labels.empty()) ds.labels = resolve(base, labels);
        for (const auto& b : batches) ds.batches.push_back(resolve(base, b));
        cfg.dataset = std::move(ds);
    }
    std::optional<std::string> model;
    root.read("model", model);
    if (model) cfg.model = resolve(base, *model);
    if (root.has("infer")) {
        auto i = root.child("infer");
        i.read("index", cfg.infer_index);
        i.finish();
    }
    root.finish();
    validate(cfg);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_json(path), path.parent_path());
}

void validate(const RunConfig& cfg) {
    try {
        validate(cfg.device);
        validate(cfg.targets.lrs);
        validate(cfg.targets.hrs);
        validate(cfg.header);
        validate(cfg.calibration);
        validate(cfg.dequant);
        if (cfg.dequant.levels() != kLevels) throw std::invalid_argument("adc.quantizer needs 8 dequant values");
        if (cfg.ideal_quantizer) validate(*cfg.ideal_quantizer);
        validate(cfg.perf);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.vdd < 0.9 || cfg.vdd > 1.2) throw ConfigError("vdd must lie in [0.9, 1.2] V");
    if (cfg.threads < 0) throw ConfigError("threads must be >= 0");
    if (cfg.offset_sigma < 0.0) throw ConfigError("adc.offset_sigma must be non-negative");
    if (cfg.yield_floor < 0.0 || cfg.yield_floor > 1.0) throw ConfigError("program.yield_floor must lie in [0, 1]");
    if (cfg.reprogram_rounds < 0) throw ConfigError("program.reprogram_rounds must be >= 0");
    if (cfg.runs < 1) throw ConfigError("emulator.runs must be >= 1");
    if (cfg.characterize_vectors < 1) throw ConfigError("characterize.vectors must be >= 1");
    if (cfg.curve_samples < 1) throw ConfigError("characterize.curve_samples must be >= 1");
    if (cfg.max_samples && *cfg.max_samples == 0) throw ConfigError("emulator.max_samples must be >= 1");
}

Json to_json(const RunConfig& cfg) {
    Json j;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["output_dir"] = cfg.output_dir.string();
    j["vdd"] = cfg.vdd;
    const auto& d = cfg.device;
    j["device"] = {{"lrs_intercept", d.lrs_intercept}, {"lrs_slope", d.lrs_slope},
                   {"lrs_sigma_rel", d.lrs_sigma_rel}, {"hrs_log_median", d.hrs_log_median},
                   {"hrs_log_sigma", d.hrs_log_sigma}, {"gate_step", d.gate_step},
                   {"gate_min", d.gate_min},           {"gate_max", d.gate_max},
                   {"lrs_min", d.lrs_min},             {"lrs_max", d.lrs_max},
                   {"hrs_floor", d.hrs_floor}};
    j["program"] = {{"lrs",
                     {{"lo", cfg.targets.lrs.lo},
                      {"hi", cfg.targets.lrs.hi},
                      {"max_iter", cfg.targets.lrs.max_iter},
                      {"initial_gate_v", cfg.targets.lrs.initial_gate_v}}},
                    {"hrs", {{"threshold", cfg.targets.hrs.threshold}, {"max_iter", cfg.targets.hrs.max_iter}}},
                    {"yield_floor", cfg.yield_floor},
                    {"reprogram_rounds", cfg.reprogram_rounds},
                    {"trace_all_tiles", cfg.trace_all_tiles}};
    j["header"] = {{"strength", cfg.header.strength}, {"pullup_ohms", cfg.header.pullup_ohms}};
    j["adc"] = {{"offset_sigma", cfg.offset_sigma},
                {"scheme", std::string(to_string(cfg.scheme))},
                {"calibration",
                 {{"alpha", cfg.calibration.alpha},
                  {"beta", cfg.calibration.beta},
                  {"n_vectors", cfg.calibration.n_vectors},
                  {"v_init", cfg.calibration.v_init},
                  {"reference_bitcounts", cfg.calibration.reference_bitcounts}}},
                {"quantizer", {{"edges", cfg.dequant.edges}, {"dequant_values", cfg.dequant.dequant_values}}}};
    j["mapper"] = {{"pad_policy", std::string(to_string(cfg.pad_policy))}};
    Json emu = {{"mode", std::string(to_string(cfg.mode))}, {"runs", cfg.runs}, {"seeds", cfg.eval_seeds()}};
    if (cfg.max_samples) emu["max_samples"] = *cfg.max_samples;
    if (cfg.ideal_quantizer) {
        emu["ideal_quantizer"] = {{"edges", cfg.ideal_quantizer->edges},
                                  {"dequant_values", cfg.ideal_quantizer->dequant_values}};
    }
    if (cfg.histogram) emu["histogram"] = cfg.histogram->string();
    j["emulator"] = std::move(emu);
    j["characterize"] = {{"vectors", cfg.characterize_vectors}, {"curve_samples", cfg.curve_samples}};
    Json prior = Json::array();
    for (const auto& r : cfg.prior_work) {
        prior.push_back({{"name", r.name},
                         {"ops_per_adc", r.ops_per_adc},
                         {"delay_ns", r.delay_ns},
                         {"energy_eff_tops_w", r.energy_eff_tops_w}});
    }
    j["perf"] = {{"rows_1t1r", cfg.perf.rows_1t1r},
                 {"xnor_rows", cfg.perf.xnor_rows},
                 {"adcs", cfg.perf.adcs},
                 {"columns", cfg.perf.columns},
                 {"read_delay_ns", cfg.perf.read_delay_ns},
                 {"energy_eff_tops_w", cfg.perf.energy_eff_tops_w},
                 {"ops_per_column_eval", cfg.perf.ops_per_column_eval},
                 {"periphery_mw", cfg.perf.periphery_mw},
                 {"prior_work", prior}};
    if (cfg.dataset) {
        Json ds = {{"format", cfg.dataset->format}};
        if (!cfg.dataset->images.empty()) ds["images"] = cfg.dataset->images.string();
        if (!cfg.dataset->labels.empty()) ds["labels"] = cfg.dataset->labels.string();
        if (!cfg.dataset->batches.empty()) {
            Json b = Json::array();
            for (const auto& p : cfg.dataset->batches) b.push_back(p.string());
            ds["batches"] = b;
        }
        j["dataset"] = ds;
    }
    if (cfg.model) j["model"] = cfg.model->string();
    j["infer"] = {{"index", cfg.infer_index}};
    return j;
}

}  // namespace xnor_rram
