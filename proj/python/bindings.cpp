#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "xnor_rram/adc.hpp"
#include "xnor_rram/emulator.hpp"
#include "xnor_rram/json_io.hpp"
#include "xnor_rram/model_io.hpp"
#include "xnor_rram/perf.hpp"

namespace py = pybind11;
using namespace xnor_rram;

namespace {

using BitArray = py::array_t<std::int8_t, py::array::c_style | py::array::forcecast>;

BinaryMatrix to_matrix(const BitArray& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-D array of +1/-1");
    BinaryMatrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    auto v = a.unchecked<2>();
    for (py::ssize_t r = 0; r < a.shape(0); ++r)
        for (py::ssize_t c = 0; c < a.shape(1); ++c) {
            if (!is_binary(v(r, c))) throw py::value_error("entries must be +1 or -1");
            m(static_cast<int>(r), static_cast<int>(c)) = v(r, c);
        }
    return m;
}

BitArray from_matrix(const BinaryMatrix& m) {
    BitArray out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

WeightTile to_tile(const BitArray& a) {
    if (a.ndim() != 2 || a.shape(0) != kRows || a.shape(1) != kCols) throw py::value_error("expected a 64x64 array");
    const auto m = to_matrix(a);
    WeightTile w;
    for (int r = 0; r < kRows; ++r)
        for (int c = 0; c < kCols; ++c) w(r, c) = m(r, c);
    return w;
}

InputVector to_input(const BitArray& a) {
    if (a.ndim() != 1 || a.shape(0) != kRows) throw py::value_error("expected 64 activations");
    InputVector x{};
    for (int i = 0; i < kRows; ++i) {
        x[static_cast<std::size_t>(i)] = a.at(i);
        if (!is_binary(x[static_cast<std::size_t>(i)])) throw py::value_error("activations must be +1 or -1");
    }
    return x;
}

// JSON documents cross into Python as plain dicts through the json module.
py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

struct PyModel {
    CompiledModel compiled;
};

InferenceMode make_mode(const std::string& mode, bool confined) {
    InferenceMode m;
    m.fidelity = parse_fidelity(mode);
    if (confined) m.ideal_quantizer = QuantizerSpec::confined();
    return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "XNOR-RRAM macro simulator and BNN emulator";
    m.attr("MANIFEST_VERSION") = kManifestVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    m.def("derive_seed", [](std::uint64_t seed, std::uint64_t a, std::uint64_t b) { return derive_seed(seed, a, b); });

    // bit packing shared with the trainer
    m.def("pack_bits", [](const BitArray& a) {
        const auto bytes = pack_bits(to_matrix(a));
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    });
    m.def("unpack_bits", [](const py::bytes& b, int rows, int cols) {
        const std::string s = b;
        const std::vector<std::uint8_t> bytes(s.begin(), s.end());
        return from_matrix(unpack_bits(bytes, rows, cols));
    });
    m.def("packed_size", &packed_size);

    py::class_<QuantizerSpec>(m, "QuantizerSpec")
        .def_static("confined", &QuantizerSpec::confined)
        .def_static("full_range", &QuantizerSpec::full_range, py::arg("bits"))
        .def_readonly("edges", &QuantizerSpec::edges)
        .def_readonly("dequant_values", &QuantizerSpec::dequant_values)
        .def("quantize", [](const QuantizerSpec& q, int b) { return quantize(b, q); })
        .def("dequantize", [](const QuantizerSpec& q, int l) { return dequantize(l, q); });
    m.def("confined_quantize", [](int b) { return confined_quantize(b); });
    m.def("full_range_quantize", &full_range_quantize);

    py::class_<HeaderConfig>(m, "HeaderConfig")
        .def_static("fitted", &HeaderConfig::fitted, py::arg("r_lrs") = 6000.0, py::arg("r_hrs") = 3e6,
                    py::arg("strength") = 4, py::arg("anchor_strength") = 4)
        .def_static("nominal", &HeaderConfig::nominal, py::arg("strength") = 4)
        .def_readwrite("strength", &HeaderConfig::strength)
        .def_readonly("pullup_ohms", &HeaderConfig::pullup_ohms)
        .def("pullup", &HeaderConfig::pullup);

    py::class_<MacroArray>(m, "MacroArray")
        .def(py::init<double>(), py::arg("vdd") = 1.2)
        .def("program_exact",
             [](MacroArray& self, const BitArray& w, double r_lrs, double r_hrs) {
                 self.program_exact(to_tile(w), r_lrs, r_hrs);
             },
             py::arg("weights"), py::arg("r_lrs") = 6000.0, py::arg("r_hrs") = 3e6)
        .def("program_weights",
             [](MacroArray& self, const BitArray& w, std::uint64_t seed) {
                 const auto rep = self.program_weights(to_tile(w), DeviceModelParams{}, ProgrammingTargets{}, seed);
                 return to_py(yield_summary(rep));
             },
             py::arg("weights"), py::arg("seed"))
        .def("evaluate_bitline",
             [](const MacroArray& self, int col, const BitArray& x, const HeaderConfig& h) {
                 const auto r = self.evaluate_bitline(col, to_input(x), h);
                 return py::make_tuple(r.voltage, r.selected_lrs, r.bitcount);
             },
             py::arg("col"), py::arg("input"), py::arg("header") = HeaderConfig::fitted())
        .def("weights", [](const MacroArray& self) {
            BinaryMatrix w(kRows, kCols);
            for (int r = 0; r < kRows; ++r)
                for (int c = 0; c < kCols; ++c) w(r, c) = self.weights()(r, c);
            return from_matrix(w);
        })
        .def("save_snapshot", py::overload_cast<const std::filesystem::path&>(&MacroArray::save_snapshot, py::const_))
        .def_static("load_snapshot",
                    py::overload_cast<const std::filesystem::path&, double>(&MacroArray::load_snapshot),
                    py::arg("path"), py::arg("vdd") = 1.2);

    m.def(
        "calibrate",
        [](const MacroArray& macro, const std::string& scheme, std::uint64_t seed, double offset_sigma,
           const HeaderConfig& h) {
            Rng rng = make_stream(seed, 2);
            const auto offsets = draw_offsets(offset_sigma, rng);
            return to_py(to_json(calibrate_all(macro, offsets, parse_ref_scheme(scheme), CalibrationParams{}, h, seed)));
        },
        py::arg("macro"), py::arg("scheme") = "PER_ADC_8", py::arg("seed") = 1, py::arg("offset_sigma") = 0.010,
        py::arg("header") = HeaderConfig::fitted());

    m.def("perf_report", []() { return to_py(to_json(perf_report(PerfParams{}))); });

    py::class_<PyModel>(m, "Model")
        .def_static("load",
                    [](const std::filesystem::path& manifest) { return PyModel{compile(load_model(manifest))}; })
        .def_property_readonly("input_shape", [](const PyModel& self) { return self.compiled.model.input_shape; })
        .def_property_readonly("layers",
                               [](const PyModel& self) {
                                   std::vector<std::string> names;
                                   for (const auto& l : self.compiled.model.layers) names.push_back(l.name);
                                   return names;
                               })
        .def_property_readonly("tile_counts",
                               [](const PyModel& self) {
                                   std::vector<std::size_t> n;
                                   for (const auto& p : self.compiled.plans) n.push_back(p.tiles.size());
                                   return n;
                               })
        .def(
            "infer",
            [](const PyModel& self, const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
               const std::string& mode, bool confined) {
                const auto r = infer(self.compiled, std::span(image.data(), static_cast<std::size_t>(image.size())),
                                     make_mode(mode, confined));
                return py::make_tuple(r.predicted, r.scores);
            },
            py::arg("image"), py::arg("mode") = "IDEAL_DIGITAL", py::arg("confined") = false)
        .def(
            "evaluate",
            [](const PyModel& self, const py::array_t<float, py::array::c_style | py::array::forcecast>& images,
               const std::vector<int>& labels, const std::string& mode, std::vector<std::uint64_t> seeds,
               const std::string& scheme, int threads) {
                Dataset ds;
                ds.shape = self.compiled.model.input_shape;
                ds.pixels.assign(images.data(), images.data() + images.size());
                ds.labels = labels;
                if (ds.pixels.size() != ds.size() * ds.image_size()) throw py::value_error("images do not match labels");
                EvalConfig ec;
                ec.mode = make_mode(mode, false);
                ec.hardware.scheme = parse_ref_scheme(scheme);
                ec.seeds = std::move(seeds);
                ec.threads = threads;
                EvalReport r;
                {
                    py::gil_scoped_release release;
                    r = evaluate(self.compiled, ds, ec);
                }
                return to_py(to_json(r));
            },
            py::arg("images"), py::arg("labels"), py::arg("mode") = "IDEAL_DIGITAL",
            py::arg("seeds") = std::vector<std::uint64_t>{1}, py::arg("scheme") = "PER_ADC_8", py::arg("threads") = 1);
}
