#include "xnor_rram/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

namespace xnor_rram {

std::string format_double(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

Json to_json(const AdcConfig& cfg) {
    Json j;
    j["scheme"] = std::string(to_string(cfg.scheme));
    j["ref_sets"] = cfg.ref_sets;
    j["offsets"] = cfg.offsets;
    return j;
}

AdcConfig adc_config_from_json(const Json& j) {
    try {
        for (const auto& [key, _] : j.items()) {
            if (key != "scheme" && key != "ref_sets" && key != "offsets") {
                throw ConfigError("AdcConfig: unknown key '" + key + "'");
            }
        }
        AdcConfig cfg;
        cfg.scheme = parse_ref_scheme(j.at("scheme").get<std::string>());
        cfg.ref_sets = j.at("ref_sets").get<std::vector<RefSet>>();
        if (j.contains("offsets")) cfg.offsets = j.at("offsets").get<OffsetBank>();
        if (static_cast<int>(cfg.ref_sets.size()) != ref_set_count(cfg.scheme)) {
            throw ConfigError("AdcConfig: ref_sets count does not match the scheme");
        }
        return cfg;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("AdcConfig: ") + e.what());
    }
}

Json to_json(const TilingPlan& plan) {
    Json j;
    j["layer"] = plan.layer;
    j["kernel_positions"] = plan.kernel_positions;
    j["row_tiles"] = plan.row_tiles;
    j["col_tiles"] = plan.col_tiles;
    j["pad_rows"] = plan.pad_rows;
    j["pad_correction"] = plan.pad_correction;
    Json tiles = Json::array();
    for (const auto& t : plan.tiles) {
        tiles.push_back({{"macro_id", t.macro_id},
                         {"kpos", t.kpos},
                         {"row_lo", t.row_lo},
                         {"row_hi", t.row_hi},
                         {"col_lo", t.col_lo},
                         {"col_hi", t.col_hi},
                         {"real_rows", t.real_rows()}});
    }
    j["tiles"] = std::move(tiles);
    return j;
}

Json to_json(const PerfReport& r) {
    Json j;
    j["throughput_total_gops"] = r.throughput_total_gops;
    j["throughput_per_adc_gops"] = r.throughput_per_adc_gops;
    j["fom1"] = r.fom1;
    j["fom2"] = r.fom2;
    if (r.est_power_mw) j["est_power_mw"] = *r.est_power_mw;
    if (r.derived_eff_tops_w) j["derived_eff_tops_w"] = *r.derived_eff_tops_w;
    return j;
}

Json to_json(const BoxStats& s) {
    return {{"mean", s.mean}, {"p25", s.p25}, {"p75", s.p75}, {"min", s.min}, {"max", s.max}};
}

Json to_json(const EvalReport& r) {
    Json j;
    j["mode"] = std::string(to_string(r.mode));
    j["scheme"] = r.scheme ? Json(std::string(to_string(*r.scheme))) : Json(nullptr);
    j["samples"] = r.samples;
    j["seeds"] = r.seeds;
    j["accuracies"] = r.accuracies;
    j["stats"] = to_json(r.stats);
    return j;
}

Json yield_summary(const ProgrammingReport& report) {
    auto stats = [](std::vector<double> v) {
        Json j;
        if (v.empty()) return j;
        std::sort(v.begin(), v.end());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        j["mean_ohms"] = mean;
        j["std_ohms"] = std::sqrt(ss / static_cast<double>(v.size()));
        j["min_ohms"] = v.front();
        j["max_ohms"] = v.back();
        return j;
    };
    Json j;
    j["lrs_total"] = report.lrs_total;
    j["lrs_converged"] = report.lrs_converged;
    j["hrs_total"] = report.hrs_total;
    j["hrs_converged"] = report.hrs_converged;
    j["yield"] = report.yield();
    j["lrs"] = stats(report.lrs_resistances());
    j["hrs"] = stats(report.hrs_resistances());
    return j;
}

void write_eval_csv(std::ostream& os, const EvalReport& r) {
    os << "run,seed,accuracy\n";
    for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
        os << i << ',' << r.seeds[i] << ',' << format_double(r.accuracies[i]) << '\n';
    }
    os << "mean,," << format_double(r.stats.mean) << '\n';
    os << "p25,," << format_double(r.stats.p25) << '\n';
    os << "p75,," << format_double(r.stats.p75) << '\n';
    os << "min,," << format_double(r.stats.min) << '\n';
    os << "max,," << format_double(r.stats.max) << '\n';
}

void write_trace_csv_header(std::ostream& os) { os << "cell_row,cell_col,iteration,pulse_kind,gate_v,resistance_ohms\n"; }

void write_trace_csv(std::ostream& os, const ProgrammingReport& report) {
    for (const auto& cell : report.cells) {
        int it = 0;
        for (const auto& e : cell.report.trace) {
            os << cell.row << ',' << cell.col << ',' << it++ << ',' << to_string(e.pulse.kind) << ','
               << format_double(e.pulse.gate_v) << ',' << format_double(e.resistance) << '\n';
        }
    }
}

void write_transfer_csv_header(std::ostream& os) { os << "bitcount,mean_v,std_v,strength\n"; }

void write_transfer_csv(std::ostream& os, int strength, std::span<const TransferPoint> curve) {
    for (const auto& p : curve) {
        os << p.bitcount << ',' << format_double(p.mean_v) << ',' << format_double(p.std_v) << ',' << strength << '\n';
    }
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    try {
        return Json::parse(is);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace xnor_rram
