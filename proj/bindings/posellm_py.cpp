// Python bindings for the core operations: synthetic data, prompt codec,
// encoder/connector forward passes, training/eval entry points and metrics.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "posellm/ablate.hpp"
#include "posellm/catalog.hpp"
#include "posellm/config.hpp"
#include "posellm/connector.hpp"
#include "posellm/encoder.hpp"
#include "posellm/errors.hpp"
#include "posellm/metrics.hpp"
#include "posellm/pipeline.hpp"
#include "posellm/prompt.hpp"
#include "posellm/synth.hpp"
#include "posellm/tokenizer.hpp"

namespace py = pybind11;
using namespace posellm;

namespace {

RunConfig config_from_overrides(const std::map<std::string, std::string>& overrides,
                                const std::string& config_path) {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = read_config_file(config_path);
    for (const auto& [k, v] : overrides) kv[k] = v;
    return make_run_config(kv);
}

py::dict sample_to_dict(const SkeletonSample& s) {
    py::dict d;
    py::array_t<double> image({s.h, s.w});
    std::copy(s.image.begin(), s.image.end(), image.mutable_data());
    py::array_t<double> kps({17, 2});
    std::copy(s.keypoints.begin(), s.keypoints.end(), kps.mutable_data());
    py::array_t<int> vis(17);
    std::copy(s.visibility.begin(), s.visibility.end(), vis.mutable_data());
    d["image"] = image;
    d["keypoints"] = kps;
    d["visibility"] = vis;
    d["area"] = s.area;
    d["head_size"] = s.head_size;
    d["seed"] = s.seed;
    return d;
}

Mat mat_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    Mat m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.data());
    return m;
}

py::array_t<double> numpy_from_mat(const Mat& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

// Tokenwise connector with owned weights, seeded like the full pipeline.
class PyConnector {
public:
    PyConnector(int d_vis, int d_hid, int d_out, const std::string& mode, uint64_t seed) {
        cfg_.mode = connector_mode_from_string(mode);
        cfg_.d_vis = d_vis;
        cfg_.d_hid = d_hid > 0 ? d_hid : 4 * d_vis;
        cfg_.d_out = d_out;
        build_connector_params(store_, cfg_, seed);
        refs_ = connector_refs(store_, cfg_);
    }

    py::array_t<double> forward(
        const py::array_t<double, py::array::c_style | py::array::forcecast>& tokens) {
        if (tokens.ndim() == 2) {
            ConnectorCache cache;
            Mat out;
            connect_forward(mat_from_numpy(tokens), refs_, cache, out);
            return numpy_from_mat(out);
        }
        if (tokens.ndim() == 3) {
            const int b = static_cast<int>(tokens.shape(0));
            const int n = static_cast<int>(tokens.shape(1));
            const int d = static_cast<int>(tokens.shape(2));
            py::array_t<double> out({b, n, cfg_.d_out});
            for (int i = 0; i < b; ++i) {
                Mat x(n, d);
                std::copy(tokens.data() + static_cast<size_t>(i) * n * d,
                          tokens.data() + static_cast<size_t>(i + 1) * n * d, x.data.data());
                ConnectorCache cache;
                Mat y;
                connect_forward(x, refs_, cache, y);
                std::copy(y.data.begin(), y.data.end(),
                          out.mutable_data() + static_cast<size_t>(i) * n * cfg_.d_out);
            }
            return out;
        }
        throw ShapeError("expected a 2-D or 3-D token array");
    }

    py::dict weights() {
        py::dict d;
        for (const auto& p : store_.all()) d[py::str(p.name)] = numpy_from_mat(p.w);
        return d;
    }

private:
    ConnectorConfig cfg_;
    ParamStore store_;
    ConnectorRefs refs_;
};

class PyVisionEncoder {
public:
    PyVisionEncoder(int image_size, int patch_size, int depth, int d_vis, int heads,
                    int mlp_ratio, uint64_t seed) {
        cfg_ = {image_size, patch_size, depth, d_vis, heads, mlp_ratio};
        cfg_.validate();
        build_encoder_params(store_, cfg_, seed);
        refs_ = encoder_refs(store_, lora_, cfg_);
    }

    py::array_t<double> forward(
        const py::array_t<double, py::array::c_style | py::array::forcecast>& images) {
        auto run_one = [&](const double* img, double* dst) {
            EncoderCache cache;
            Mat tokens;
            encode_forward(img, cfg_.image_size, cfg_.image_size, cfg_, refs_, cache, tokens);
            std::copy(tokens.data.begin(), tokens.data.end(), dst);
        };
        const size_t plane = static_cast<size_t>(cfg_.image_size) * cfg_.image_size;
        const size_t tok = static_cast<size_t>(cfg_.tokens()) * cfg_.d_vis;
        if (images.ndim() == 2) {
            if (images.shape(0) != cfg_.image_size || images.shape(1) != cfg_.image_size) {
                throw ShapeError("image size does not match the encoder configuration");
            }
            py::array_t<double> out({cfg_.tokens(), cfg_.d_vis});
            run_one(images.data(), out.mutable_data());
            return out;
        }
        if (images.ndim() == 3) {
            if (images.shape(1) != cfg_.image_size || images.shape(2) != cfg_.image_size) {
                throw ShapeError("image size does not match the encoder configuration");
            }
            const int b = static_cast<int>(images.shape(0));
            py::array_t<double> out({b, cfg_.tokens(), cfg_.d_vis});
            for (int i = 0; i < b; ++i) {
                run_one(images.data() + static_cast<size_t>(i) * plane,
                        out.mutable_data() + static_cast<size_t>(i) * tok);
            }
            return out;
        }
        throw ShapeError("expected a 2-D image or 3-D image batch");
    }

    py::list parameters() {
        py::list out;
        for (const auto& [name, shape] : encoder_parameters(store_)) {
            out.append(py::make_tuple(name, py::make_tuple(shape.first, shape.second)));
        }
        return out;
    }

private:
    EncoderConfig cfg_;
    ParamStore store_;
    LoraSet lora_;
    EncoderRefs refs_;
};

}  // namespace

PYBIND11_MODULE(_posellm, m) {
    m.doc() = "language-guided keypoint localization, desk scale";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_RuntimeError);

    // catalog + prompt codec
    m.def("keypoint_names", &keypoint_names);
    m.def("keypoint_index", [](const std::string& name) { return keypoint_index(name); });
    m.def("build_prompt", &build_prompt, py::arg("keypoint_index"));
    m.def("serialize_coords", &serialize_coords, py::arg("x"), py::arg("y"));
    m.def("parse_coords", [](const std::string& s) -> py::object {
        const auto v = parse_coords(s);
        if (!v) return py::none();
        return py::make_tuple(v->first, v->second);
    });
    m.def("tokenize", [](const std::string& t) { return vocabulary().tokenize(t); });
    m.def("detokenize", [](const std::vector<int>& ids) { return vocabulary().detokenize(ids); });
    m.def("vocab_size", []() { return vocabulary().size(); });
    m.def("training_record", [](int keypoint, double x, double y) {
        const InstructionRecord rec = make_training_record(keypoint, x, y);
        py::dict d;
        d["prompt_text"] = rec.prompt_text;
        d["answer_text"] = rec.answer_text;
        d["token_ids"] = rec.token_ids;
        d["answer_mask"] = std::vector<int>(rec.answer_mask.begin(), rec.answer_mask.end());
        return d;
    });

    // activation
    m.def("gelu", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        py::array_t<double> out(std::vector<py::ssize_t>(x.shape(), x.shape() + x.ndim()));
        const double* src = x.data();
        double* dst = out.mutable_data();
        for (py::ssize_t i = 0; i < x.size(); ++i) dst[i] = gelu(src[i]);
        return out;
    });

    // synthetic data
    m.def(
        "generate_sample",
        [](uint64_t seed, int image_size, double occlusion_prob) {
            GeneratorConfig cfg;
            cfg.image_size = image_size;
            cfg.occlusion_prob = occlusion_prob;
            return sample_to_dict(generate_sample(seed, cfg));
        },
        py::arg("seed"), py::arg("image_size") = 64, py::arg("occlusion_prob") = 0.06);
    m.def("read_dataset", [](const std::string& path) {
        py::list out;
        for (const auto& s : load_dataset_checked(path)) out.append(sample_to_dict(s));
        return out;
    });

    // modules
    py::class_<PyConnector>(m, "Connector")
        .def(py::init<int, int, int, const std::string&, uint64_t>(), py::arg("d_vis"),
             py::arg("d_hid") = 0, py::arg("d_out") = 0, py::arg("mode") = "mlp",
             py::arg("seed") = 0)
        .def("forward", &PyConnector::forward)
        .def("__call__", &PyConnector::forward)
        .def("weights", &PyConnector::weights);

    py::class_<PyVisionEncoder>(m, "VisionEncoder")
        .def(py::init<int, int, int, int, int, int, uint64_t>(), py::arg("image_size") = 64,
             py::arg("patch_size") = 8, py::arg("depth") = 2, py::arg("d_vis") = 64,
             py::arg("heads") = 4, py::arg("mlp_ratio") = 4, py::arg("seed") = 0)
        .def("forward", &PyVisionEncoder::forward)
        .def("__call__", &PyVisionEncoder::forward)
        .def("parameters", &PyVisionEncoder::parameters);

    // pipeline entry points
    m.def(
        "generate",
        [](const std::string& out_dir, uint64_t seed,
           const std::map<std::string, std::string>& overrides, const std::string& config) {
            const GenerateResult r = generate_splits(config_from_overrides(overrides, config),
                                                     seed, out_dir);
            py::dict d;
            d["train_path"] = r.train_path;
            d["val_path"] = r.val_path;
            d["train_count"] = r.train_count;
            d["val_count"] = r.val_count;
            return d;
        },
        py::arg("out_dir"), py::arg("seed") = 0,
        py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("config") = "");
    m.def(
        "train",
        [](const std::string& data_path, const std::string& out_dir,
           const std::map<std::string, std::string>& overrides, const std::string& config,
           const std::string& resume, long long max_steps) {
            const TrainOutputs out = run_training(config_from_overrides(overrides, config),
                                                  data_path, out_dir, resume, max_steps);
            py::dict d;
            d["checkpoint"] = out.checkpoint_path;
            d["state"] = out.state_path;
            d["curve"] = out.curve_path;
            d["initial_loss"] = out.initial_loss;
            d["final_loss"] = out.final_loss;
            d["steps"] = out.steps;
            return d;
        },
        py::arg("data_path"), py::arg("out_dir"),
        py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("config") = "",
        py::arg("resume") = "", py::arg("max_steps") = -1);
    m.def(
        "evaluate",
        [](const std::string& checkpoint, const std::string& data_path,
           const std::string& out_dir, const std::map<std::string, std::string>& overrides,
           const std::string& config) {
            const EvalOutputs out =
                run_eval(config_from_overrides(overrides, config), checkpoint, data_path, out_dir);
            py::dict d;
            d["AP"] = out.report.ap.ap;
            d["AP50"] = out.report.ap.ap50;
            d["AP75"] = out.report.ap.ap75;
            d["APM"] = out.report.ap.apm;
            d["APL"] = out.report.ap.apl;
            d["AR"] = out.report.ap.ar;
            d["PCKh0.5"] = out.report.pckh05.overall;
            d["PCKh0.1"] = out.report.pckh01.overall;
            d["parse_failures"] = out.report.parse_failures;
            d["queries"] = out.report.queries;
            d["predictions_path"] = out.predictions_path;
            d["report_path"] = out.report_path;
            return d;
        },
        py::arg("checkpoint"), py::arg("data_path"), py::arg("out_dir"),
        py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("config") = "");
    m.def(
        "expressivity_ablation",
        [](int d, int d_hid, int n_tokens, int steps, double lr, uint64_t seed) {
            ExpressivityConfig cfg{d, d_hid, n_tokens, steps, lr, seed};
            const ExpressivityResult r = run_expressivity(cfg);
            py::dict out;
            out["linear_mse"] = r.linear_mse;
            out["mlp_mse"] = r.mlp_mse;
            out["ratio"] = r.ratio();
            return out;
        },
        py::arg("d") = 8, py::arg("d_hid") = 32, py::arg("n_tokens") = 1024,
        py::arg("steps") = 4000, py::arg("lr") = 3e-3, py::arg("seed") = 7);
}
