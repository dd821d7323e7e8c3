#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "xnor_rram/config.hpp"
#include "xnor_rram/json_io.hpp"
#include "xnor_rram/model_io.hpp"

using namespace xnor_rram;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("xnor_rram_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void dump(const fs::path& p, const Json& j) {
    std::ofstream os(p);
    os << j.dump(2);
}

bool same_model(const BnnModel& a, const BnnModel& b) {
    if (a.input_shape != b.input_shape || a.layers.size() != b.layers.size()) return false;
    if (a.binarize_threshold != b.binarize_threshold) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const auto& x = a.layers[i];
        const auto& y = b.layers[i];
        if (x.name != y.name || x.weights != y.weights) return false;
        if (x.spec.kind != y.spec.kind || x.spec.cols() != y.spec.cols() || x.spec.rows() != y.spec.rows()) return false;
        if (x.spec.padding != y.spec.padding || x.spec.stride != y.spec.stride || x.spec.pool != y.spec.pool) return false;
        if (x.spec.activation != y.spec.activation) return false;
        if (x.bn.has_value() != y.bn.has_value()) return false;
        if (x.bn && (x.bn->gamma != y.bn->gamma || x.bn->beta != y.bn->beta || x.bn->mean != y.bn->mean ||
                     x.bn->var != y.bn->var || x.bn->eps != y.bn->eps))
            return false;
        if (x.thresholds.size() != y.thresholds.size()) return false;
        for (std::size_t c = 0; c < x.thresholds.size(); ++c) {
            if (static_cast<float>(x.thresholds[c].threshold) != static_cast<float>(y.thresholds[c].threshold) ||
                x.thresholds[c].inverted != y.thresholds[c].inverted)
                return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("bit packing layout", "[io][pack]") {
    BinaryMatrix m(2, 10, -1);
    m(0, 0) = 1;
    m(0, 9) = 1;
    m(1, 7) = 1;
    const auto bytes = pack_bits(m);
    REQUIRE(bytes.size() == 4);
    CHECK(packed_size(2, 10) == 4);
    CHECK(bytes[0] == 0x80);
    CHECK(bytes[1] == 0x40);
    CHECK(bytes[2] == 0x01);
    CHECK(bytes[3] == 0x00);
}

TEST_CASE("pack/unpack is the identity", "[io][pack][property]") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = 1 + static_cast<int>(rng() % 70);
        const int cols = 1 + static_cast<int>(rng() % 70);
        const auto m = BinaryMatrix::random(rows, cols, rng);
        const auto bytes = pack_bits(m);
        CHECK(bytes.size() == packed_size(rows, cols));
        CHECK(unpack_bits(bytes, rows, cols) == m);
    }
    const std::vector<std::uint8_t> short_buf(3);
    CHECK_THROWS(unpack_bits(short_buf, 2, 10));
}

TEST_CASE("model save/load round trip", "[io][manifest]") {
    Rng rng(2);
    const std::vector<int> dims{100, 70, 10};
    const auto mlp = oracle::random_mlp(dims, {1, 10, 10}, rng);
    const auto cnn = oracle::random_cnn(rng);
    const auto folded = fold_batchnorm(mlp);
    int k = 0;
    for (const auto* m : {&mlp, &cnn, &folded}) {
        const auto dir = scratch("roundtrip" + std::to_string(k++));
        save_model(*m, dir);
        CHECK(fs::exists(dir / "manifest.json"));
        const auto back = load_model(dir / "manifest.json");
        CHECK(same_model(*m, back));
        // weight files hold kpos-major packed matrices
        const auto& l0 = m->layers[0];
        CHECK(fs::file_size(dir / (l0.name + ".bin")) ==
              static_cast<std::uintmax_t>(l0.weights.size() * packed_size(l0.spec.rows(), l0.spec.cols())));
    }
}

TEST_CASE("manifest schema errors", "[io][manifest]") {
    Rng rng(3);
    const std::vector<int> dims{64, 32, 10};
    const auto m = oracle::random_mlp(dims, {1, 8, 8}, rng);
    const auto dir = scratch("schema");
    save_model(m, dir);
    const auto good = read_json(dir / "manifest.json");
    const auto bad_path = dir / "bad.json";

    auto expect_config_error = [&](const Json& j) {
        dump(bad_path, j);
        CHECK_THROWS_AS(load_model(bad_path), ConfigError);
    };

    Json j = good;
    j["format_version"] = 99;
    expect_config_error(j);
    j = good;
    j["extra"] = 1;
    expect_config_error(j);
    j = good;
    j["layers"][0]["kind"] = "RNN";
    expect_config_error(j);
    j = good;
    j["layers"][0]["shape"] = Json::array({64});
    expect_config_error(j);
    j = good;
    j["layers"][1]["shape"] = Json::array({33, 10});  // does not chain
    expect_config_error(j);
    j = good;
    j["layers"][0]["bn"]["gamma"].erase(0);
    expect_config_error(j);
    j = good;
    j["layers"][0].erase("weight_file");
    expect_config_error(j);

    j = good;
    j["layers"][0]["weight_file"] = "missing.bin";
    dump(bad_path, j);
    CHECK_THROWS_AS(load_model(bad_path), IoError);

    // truncated weight file
    const auto wf = dir / (m.layers[0].name + ".bin");
    fs::resize_file(wf, fs::file_size(wf) - 1);
    CHECK_THROWS_AS(load_model(dir / "manifest.json"), IoError);
    CHECK_THROWS_AS(load_model(dir / "nope.json"), IoError);
}

TEST_CASE("run config defaults and overrides", "[io][config]") {
    const auto cfg = parse_run_config(Json::object());
    CHECK(cfg.seed == 1);
    CHECK(cfg.scheme == RefScheme::per_adc_8);
    CHECK(cfg.eval_seeds().size() == 20);
    CHECK(cfg.eval_seeds().front() == 1);

    const Json doc = {{"seed", 9},
                      {"adc", {{"scheme", "UNIFIED_1"}, {"offset_sigma", 0.0}, {"quantizer", "full_range_3"}}},
                      {"emulator", {{"mode", "IDEAL_DIGITAL"}, {"seeds", {3, 4}}}},
                      {"model", "m/manifest.json"}};
    const auto c = parse_run_config(doc, "/base");
    CHECK(c.seed == 9);
    CHECK(c.scheme == RefScheme::unified_1);
    CHECK(c.offset_sigma == 0.0);
    CHECK(c.dequant.dequant_values == QuantizerSpec::full_range(3).dequant_values);
    CHECK(c.mode == Fidelity::ideal_digital);
    CHECK(c.eval_seeds() == std::vector<std::uint64_t>{3, 4});
    CHECK(*c.model == fs::path("/base/m/manifest.json"));

    const auto again = parse_run_config(to_json(c));
    CHECK(to_json(again) == to_json(c));
}

TEST_CASE("run config rejects unknown keys and bad values", "[io][config]") {
    CHECK_THROWS_AS(parse_run_config({{"sead", 1}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"adc", {{"schema", "UNIFIED_1"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"adc", {{"scheme", "PER_ROW"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"adc", {{"offset_sigma", -1.0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"threads", "four"}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"header", {{"strength", 9}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"adc", {{"quantizer", "full_range_9"}}}}), ConfigError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("AdcConfig JSON round trip", "[io][adc]") {
    Rng rng(4);
    const RefSet refs{0.66, 0.64, 0.62, 0.60, 0.58, 0.56, 0.54};
    auto cfg = AdcConfig::uniform(RefScheme::per_column_64, refs, draw_offsets(0.01, rng));
    cfg.ref_sets[5][2] = 0.6123456789012345;
    const auto j = to_json(cfg);
    const auto back = adc_config_from_json(Json::parse(j.dump()));
    CHECK(back.scheme == cfg.scheme);
    CHECK(back.ref_sets == cfg.ref_sets);
    CHECK(back.offsets == cfg.offsets);

    Json bad = j;
    bad["ref_sets"].erase(0);
    CHECK_THROWS_AS(adc_config_from_json(bad), ConfigError);
    bad = j;
    bad["bogus"] = true;
    CHECK_THROWS_AS(adc_config_from_json(bad), ConfigError);
}

TEST_CASE("IDX round trip", "[io][dataset]") {
    const auto dir = scratch("idx");
    std::vector<std::uint8_t> pixels(3 * 4 * 5);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 4);
    const std::vector<std::uint8_t> labels{7, 0, 9};
    write_idx_images(dir / "img", 3, 4, 5, pixels);
    write_idx_labels(dir / "lab", labels);
    const auto ds = load_idx(dir / "img", dir / "lab");
    CHECK(ds.size() == 3);
    CHECK(ds.shape == std::array<int, 3>{1, 4, 5});
    CHECK(ds.labels == std::vector<int>{7, 0, 9});
    CHECK(ds.pixels[1] == 4.0F / 255.0F);
    CHECK_THROWS_AS(load_idx(dir / "lab", dir / "img"), IoError);
    CHECK_THROWS_AS(load_idx(dir / "missing", dir / "lab"), IoError);
}

TEST_CASE("CIFAR-10 batch parsing", "[io][dataset]") {
    const auto dir = scratch("cifar");
    std::vector<char> rec(3073 * 2, 0);
    rec[0] = 3;
    rec[3073] = 8;
    rec[3073 + 1] = static_cast<char>(255);
    {
        std::ofstream os(dir / "b1.bin", std::ios::binary);
        os.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    }
    const std::vector<fs::path> batches{dir / "b1.bin"};
    const auto ds = load_cifar10(batches);
    CHECK(ds.size() == 2);
    CHECK(ds.labels == std::vector<int>{3, 8});
    CHECK(ds.image(1)[0] == 1.0F);
    {
        std::ofstream os(dir / "b2.bin", std::ios::binary);
        os.write(rec.data(), 100);
    }
    const std::vector<fs::path> bad{dir / "b2.bin"};
    CHECK_THROWS_AS(load_cifar10(bad), IoError);
}

TEST_CASE("eval report CSV and JSON", "[io][eval]") {
    EvalReport r;
    r.mode = Fidelity::analog_sim;
    r.scheme = RefScheme::per_adc_8;
    r.seeds = {1, 2, 3};
    r.accuracies = {0.5, 0.75, 1.0};
    r.stats = summarize(r.accuracies);
    r.samples = 4;
    std::ostringstream os;
    write_eval_csv(os, r);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "run,seed,accuracy");
    std::getline(is, line);
    CHECK(line == "0,1,0.5");
    const auto j = to_json(r);
    CHECK(j["mode"] == "ANALOG_SIM");
    CHECK(j["scheme"] == "PER_ADC_8");
    CHECK(j["accuracies"].size() == 3);
    CHECK(j["stats"]["mean"].get<double>() == 0.75);
}

TEST_CASE("shortest round-trip doubles", "[io]") {
    for (double v : {0.1, 1.0 / 3.0, 6000.0, 3e6, -1e-300, 0.6123456789012345}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("transfer curve CSV columns", "[io]") {
    std::ostringstream os;
    write_transfer_csv_header(os);
    const std::vector<TransferPoint> pts{{-64, 0.9, 0.0}, {0, 0.6, 0.001}};
    write_transfer_csv(os, 3, pts);
    CHECK(os.str() == "bitcount,mean_v,std_v,strength\n-64,0.9,0,3\n0,0.6,0.001,3\n");
}
