#include "xnor_rram/model_io.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <string>

#include <json.hpp>

namespace xnor_rram {

using nlohmann::json;

std::size_t packed_size(int rows, int cols) {
    return static_cast<std::size_t>(rows) * ((static_cast<std::size_t>(cols) + 7) / 8);
}

std::vector<std::uint8_t> pack_bits(const BinaryMatrix& m) {
    const std::size_t stride = (static_cast<std::size_t>(m.cols()) + 7) / 8;
    std::vector<std::uint8_t> out(packed_size(m.rows(), m.cols()), 0);
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            if (m(r, c) > 0) out[r * stride + c / 8] |= static_cast<std::uint8_t>(0x80U >> (c % 8));
        }
    }
    return out;
}

BinaryMatrix unpack_bits(std::span<const std::uint8_t> bytes, int rows, int cols) {
    if (bytes.size() != packed_size(rows, cols)) throw IoError("packed weight size mismatch");
    const std::size_t stride = (static_cast<std::size_t>(cols) + 7) / 8;
    BinaryMatrix m(rows, cols, -1);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if ((bytes[r * stride + c / 8] & (0x80U >> (c % 8))) != 0) m(r, c) = 1;
        }
    }
    return m;
}

namespace {

[[noreturn]] void schema(const std::string& msg) { throw ConfigError("model manifest: " + msg); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) schema(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (allowed.count(key) == 0) schema("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) schema(where + " is missing '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        schema(where + "." + key + " has the wrong type");
    }
}

std::vector<float> floats(const json& obj, const char* key, const std::string& where) {
    return get<std::vector<float>>(obj, key, where);
}

}  // namespace

BnnModel load_model(const std::filesystem::path& manifest) {
    std::ifstream is(manifest);
    if (!is) throw IoError("cannot open " + manifest.string());
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(manifest.string() + ": " + e.what());
    }
    check_keys(doc, {"format_version", "preprocessing", "input_shape", "layers"}, "manifest");
    if (get<int>(doc, "format_version", "manifest") != kManifestVersion) schema("unsupported format_version");

    BnnModel model;
    if (doc.contains("preprocessing")) {
        const auto& pre = doc["preprocessing"];
        check_keys(pre, {"binarize_threshold"}, "preprocessing");
        if (pre.contains("binarize_threshold")) model.binarize_threshold = get<double>(pre, "binarize_threshold", "preprocessing");
    }
    if (doc.contains("input_shape")) {
        const auto shape = get<std::vector<int>>(doc, "input_shape", "manifest");
        if (shape.size() != 3) schema("input_shape must be [C, H, W]");
        model.input_shape = {shape[0], shape[1], shape[2]};
    }
    const auto& layers = doc.at("layers");
    if (!layers.is_array() || layers.empty()) schema("layers must be a non-empty array");

    const auto base = manifest.parent_path();
    std::vector<std::filesystem::path> files;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string where = "layers[" + std::to_string(i) + "]";
        check_keys(l, {"name", "kind", "shape", "weight_file", "stride", "padding", "pool", "activation", "bn",
                       "threshold", "direction"},
                   where);
        ModelLayer layer;
        layer.name = get<std::string>(l, "name", where);
        const auto kind = get<std::string>(l, "kind", where);
        const auto shape = get<std::vector<int>>(l, "shape", where);
        if (kind == "FC") {
            if (shape.size() != 2) schema(where + ".shape must be [in, out] for FC");
            layer.spec = LayerSpec::fc(shape[0], shape[1]);
        } else if (kind == "CONV") {
            if (shape.size() != 4) schema(where + ".shape must be [in_channels, out_channels, kh, kw] for CONV");
            const int stride = l.contains("stride") ? get<int>(l, "stride", where) : 1;
            const int padding = l.contains("padding") ? get<int>(l, "padding", where) : 0;
            layer.spec = LayerSpec::conv(shape[0], shape[1], shape[2], shape[3], stride, padding);
        } else {
            schema(where + ".kind must be FC or CONV");
        }
        if (l.contains("pool")) layer.spec.pool = get<int>(l, "pool", where);
        const bool last = i + 1 == layers.size();
        const auto act = l.contains("activation") ? get<std::string>(l, "activation", where)
                                                  : std::string(last ? "none" : "sign");
        if (act == "sign") {
            layer.spec.activation = Activation::sign_binarize;
        } else if (act == "none") {
            layer.spec.activation = Activation::none;
        } else {
            schema(where + ".activation must be sign or none");
        }

        if (l.contains("bn") && l.contains("threshold")) schema(where + " has both bn and threshold");
        if (l.contains("bn")) {
            const auto& bn = l["bn"];
            check_keys(bn, {"gamma", "beta", "mean", "var", "eps"}, where + ".bn");
            BatchNormParams p;
            p.gamma = floats(bn, "gamma", where + ".bn");
            p.beta = floats(bn, "beta", where + ".bn");
            p.mean = floats(bn, "mean", where + ".bn");
            p.var = floats(bn, "var", where + ".bn");
            p.eps = get<float>(bn, "eps", where + ".bn");
            layer.bn = std::move(p);
            layer.spec.has_batchnorm = true;
        } else if (l.contains("threshold")) {
            const auto t = floats(l, "threshold", where);
            std::vector<int> dir(t.size(), 1);
            if (l.contains("direction")) dir = get<std::vector<int>>(l, "direction", where);
            if (dir.size() != t.size()) schema(where + ".direction must match threshold length");
            for (std::size_t k = 0; k < t.size(); ++k) {
                if (dir[k] != 1 && dir[k] != -1) schema(where + ".direction entries must be 1 or -1");
                layer.thresholds.push_back({static_cast<double>(t[k]), dir[k] < 0});
            }
        } else if (l.contains("direction")) {
            schema(where + ".direction requires threshold");
        }

        files.push_back(base / get<std::string>(l, "weight_file", where));
        const int rows = layer.spec.rows();
        const int cols = layer.spec.cols();
        if (rows < 1 || cols < 1) schema(where + ".shape must be positive");
        // placeholders so the structure is checked before any weight file is read
        layer.weights.assign(static_cast<std::size_t>(layer.spec.kernel_positions()), BinaryMatrix(rows, cols));
        model.layers.push_back(std::move(layer));
    }
    try {
        validate(model);
    } catch (const std::invalid_argument& e) {
        schema(e.what());
    }

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        auto& layer = model.layers[i];
        const auto& file = files[i];
        std::ifstream ws(file, std::ios::binary);
        if (!ws) throw IoError("cannot open " + file.string());
        const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(ws), std::istreambuf_iterator<char>()};
        const int rows = layer.spec.rows();
        const int cols = layer.spec.cols();
        const std::size_t per = packed_size(rows, cols);
        const std::size_t kpos = layer.weights.size();
        if (bytes.size() != per * kpos) {
            throw IoError(file.string() + ": expected " + std::to_string(per * kpos) + " bytes, found " +
                          std::to_string(bytes.size()));
        }
        for (std::size_t k = 0; k < kpos; ++k) layer.weights[k] = unpack_bits(std::span(bytes).subspan(k * per, per), rows, cols);
    }
    return model;
}

void save_model(const BnnModel& model, const std::filesystem::path& dir) {
    validate(model);
    std::filesystem::create_directories(dir);
    json doc;
    doc["format_version"] = kManifestVersion;
    doc["preprocessing"] = {{"binarize_threshold", model.binarize_threshold}};
    doc["input_shape"] = model.input_shape;
    doc["layers"] = json::array();
    for (const auto& layer : model.layers) {
        const auto& s = layer.spec;
        json l;
        l["name"] = layer.name;
        l["weight_file"] = layer.name + ".bin";
        l["activation"] = s.activation == Activation::sign_binarize ? "sign" : "none";
        if (s.kind == LayerKind::fc) {
            l["kind"] = "FC";
            l["shape"] = {s.in_dim, s.out_dim};
        } else {
            l["kind"] = "CONV";
            l["shape"] = {s.in_channels, s.out_channels, s.kernel_h, s.kernel_w};
            l["stride"] = s.stride;
            l["padding"] = s.padding;
        }
        if (s.pool) l["pool"] = *s.pool;
        if (layer.bn) {
            l["bn"] = {{"gamma", layer.bn->gamma}, {"beta", layer.bn->beta}, {"mean", layer.bn->mean},
                       {"var", layer.bn->var}, {"eps", layer.bn->eps}};
        } else if (!layer.thresholds.empty()) {
            std::vector<float> t;
            std::vector<int> d;
            for (const auto& th : layer.thresholds) {
                t.push_back(static_cast<float>(th.threshold));
                d.push_back(th.inverted ? -1 : 1);
            }
            l["threshold"] = t;
            l["direction"] = d;
        }
        doc["layers"].push_back(l);

        std::ofstream ws(dir / (layer.name + ".bin"), std::ios::binary | std::ios::trunc);
        if (!ws) throw IoError("cannot write weights for layer " + layer.name);
        for (const auto& w : layer.weights) {
            const auto bytes = pack_bits(w);
            ws.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        }
        if (!ws) throw IoError("failed writing weights for layer " + layer.name);
    }
    std::ofstream ms(dir / "manifest.json", std::ios::trunc);
    if (!ms) throw IoError("cannot write " + (dir / "manifest.json").string());
    ms << doc.dump(2) << '\n';
}

}  // namespace xnor_rram
