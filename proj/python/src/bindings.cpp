#include "ist/checkpoint.hpp"
#include "ist/commands.hpp"
#include "ist/experiments.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>

namespace py = pybind11;
using namespace ist;

namespace {

py::dict loss_dict(const LossRecord& r) {
  py::dict d;
  d["step"] = r.step;
  d["L_rec"] = r.rec;
  d["KL"] = r.kl;
  d["beta"] = r.beta;
  d["L_Q"] = r.vq;
  d["L_R"] = r.refiner;
  d["L_B"] = r.bridge;
  d["L_All"] = r.total;
  return d;
}

py::dict config_dict(const ModelConfig& c) {
  py::dict d;
  std::istringstream in(c.to_text());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    d[py::str(line.substr(0, eq))] = line.substr(eq + 1);
  }
  return d;
}

ModelConfig config_from(const py::dict& values, const ModelConfig& base) {
  ModelConfig c = base;
  for (const auto& [k, v] : values) {
    const std::string key = py::str(k);
    std::string text;
    if (py::isinstance<py::bool_>(v)) {
      text = v.cast<bool>() ? "true" : "false";
    } else {
      text = py::str(v);
    }
    c.set(key, text);
  }
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Toy interpretable style-transfer stack: ControlVAE, VQ, diffusion refiner and bridge.";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<IndexError>(m, "IndexError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<EstimationError>(m, "EstimationError", base);
  py::register_exception<ContractViolation>(m, "ContractViolation", base);
  py::register_exception<IntegrityError>(m, "IntegrityError", base);
  py::register_exception<StateError>(m, "StateError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<UsageError>(m, "UsageError", base);

  m.attr("BANDS") = kBands;
  m.attr("FRAMES") = kFrames;
  m.attr("CONTENT_IDS") = kContentIds;

  // toy data
  py::class_<StyleFactors>(m, "StyleFactors")
      .def(py::init([](double energy, double pitch_level, double pitch_variation, int content) {
             StyleFactors f{energy, pitch_level, pitch_variation, content};
             f.validate();
             return f;
           }),
           py::arg("energy"), py::arg("pitch_level"), py::arg("pitch_variation"), py::arg("content") = 0)
      .def_readwrite("energy", &StyleFactors::energy)
      .def_readwrite("pitch_level", &StyleFactors::pitch_level)
      .def_readwrite("pitch_variation", &StyleFactors::pitch_variation)
      .def_readwrite("content", &StyleFactors::content);

  py::class_<FactorEstimate>(m, "FactorEstimate")
      .def_readonly("energy", &FactorEstimate::energy)
      .def_readonly("pitch_level", &FactorEstimate::pitch_level)
      .def_readonly("pitch_variation", &FactorEstimate::pitch_variation);

  py::class_<ToyDataset>(m, "ToyDataset")
      .def("__len__", &ToyDataset::size)
      .def_readonly("seed", &ToyDataset::seed)
      .def("mel", [](const ToyDataset& d, std::size_t i) { return d.samples.at(i).mel; })
      .def("factors", [](const ToyDataset& d, std::size_t i) { return d.samples.at(i).factors; })
      .def("split", [](const ToyDataset& d, const std::string& name) {
        if (name == "train") return d.indices(Split::train);
        if (name == "val") return d.indices(Split::val);
        if (name == "test") return d.indices(Split::test);
        throw ValidationError("split must be train, val or test");
      });

  m.def("gen_toy_mel", &gen_toy_mel, py::arg("factors"));
  m.def("estimate_factors", &estimate_factors, py::arg("mel"));
  m.def("make_dataset", &make_dataset, py::arg("n"), py::arg("seed"));

  // metrics
  m.def(
      "frechet_distance",
      [](const Vec& mean_a, const Mat& cov_a, const Vec& mean_b, const Mat& cov_b) {
        return frechet_distance(GaussianStats{mean_a, cov_a}, GaussianStats{mean_b, cov_b});
      },
      py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"));
  m.def("mcd", &mcd, py::arg("a"), py::arg("b"));
  m.def("mel_features", &mel_features, py::arg("mel"));
  m.def(
      "toy_fd", [](const std::vector<Mat>& gen, const std::vector<Mat>& tgt) { return toy_fd(gen, tgt); },
      py::arg("generated"), py::arg("target"));

  // quantizer and diffusion
  m.def(
      "nearest_code",
      [](const Mat& z, const Mat& entries) {
        if (entries.rows() < 1) throw DimensionError("nearest_code: empty codebook");
        RngStream rng(0);
        Codebook book("codebook", static_cast<int>(entries.rows()), static_cast<int>(entries.cols()), rng);
        book.entries.value = entries;
        const Quantized q = nearest_code(z, book);
        return py::make_tuple(q.q, q.index);
      },
      py::arg("z"), py::arg("codebook"));

  py::class_<DiffusionSchedule>(m, "DiffusionSchedule")
      .def_static("linear", &DiffusionSchedule::linear, py::arg("steps"), py::arg("beta_start"),
                  py::arg("beta_end"))
      .def_static("scaled_default", &DiffusionSchedule::scaled_default, py::arg("steps"))
      .def_property_readonly("steps", &DiffusionSchedule::steps)
      .def("beta", &DiffusionSchedule::beta)
      .def("alpha_bar", &DiffusionSchedule::alpha_bar)
      .def("sigma", &DiffusionSchedule::sigma);
  m.def(
      "q_sample", [](const Mat& x0, int t, const Mat& eps, const DiffusionSchedule& s) { return q_sample(x0, t, eps, s); },
      py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));

  // configuration
  m.def(
      "default_config", [](bool paper) { return config_dict(paper ? ModelConfig::paper_preset() : ModelConfig{}); },
      py::arg("paper") = false);
  m.def(
      "parse_config", [](const std::string& text) { return config_dict(parse_config(text)); }, py::arg("text"));

  // training and inference
  py::class_<TrainState>(m, "Model")
      .def(py::init([](const py::dict& config) { return TrainState::create(config_from(config, ModelConfig{})); }),
           py::arg("config") = py::dict())
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](TrainState& s, const std::filesystem::path& p) { save_checkpoint(s, p); }, py::arg("path"))
      .def_property_readonly("step", [](const TrainState& s) { return s.step; })
      .def_property_readonly("beta", &TrainState::current_beta)
      .def_property_readonly("kl_ema", [](const TrainState& s) { return s.kl_smoother.value; })
      .def_property_readonly("config", [](const TrainState& s) { return config_dict(s.config); })
      .def_property_readonly("total_steps", [](const TrainState& s) { return total_steps(s.config); })
      .def(
          "train",
          [](TrainState& s, const ToyDataset& data, std::int64_t until) {
            py::list out;
            {
              py::gil_scoped_release release;
              std::vector<LossRecord> records;
              run_training(s, data, until, [&](const LossRecord& r) { records.push_back(r); });
              py::gil_scoped_acquire acquire;
              for (const auto& r : records) out.append(loss_dict(r));
            }
            return out;
          },
          py::arg("data"), py::arg("until_step"))
      .def("train_bridge", &run_bridge_training, py::arg("data"), py::arg("iterations"))
      .def(
          "transfer",
          [](const TrainState& s, const Mat& reference, int content, std::uint64_t seed) {
            RngStream rng(seed);
            const std::vector<int> seq(kFrames, content);
            const Synthesis out = synthesize_from_reference(s.model, s.config, reference, seq, rng);
            return py::make_tuple(out.coarse, out.refined);
          },
          py::arg("reference"), py::arg("content"), py::arg("seed") = 0)
      .def(
          "sample",
          [](const TrainState& s, int content, std::uint64_t seed) {
            RngStream rng(seed);
            const std::vector<int> seq(kFrames, content);
            const Synthesis out = synthesize_from_bridge(s.model, s.config, seq, rng);
            return py::make_tuple(out.coarse, out.refined);
          },
          py::arg("content"), py::arg("seed") = 0)
      .def(
          "encode",
          [](const TrainState& s, const Mat& mel) {
            const GaussianPosterior p = encode_posterior(s.model, mel);
            return py::make_tuple(p.mu, p.sigma());
          },
          py::arg("mel"))
      .def(
          "evaluate",
          [](const TrainState& s, const ToyDataset& data, std::uint64_t seed) {
            const ReconstructionEval ev = evaluate_reconstruction(s.model, s.config, data, seed);
            py::dict d;
            d["n"] = ev.count;
            d["fd_coarse"] = ev.fd_coarse;
            d["fd_refined"] = ev.fd_refined;
            d["mse_coarse"] = ev.mse_coarse;
            d["mse_refined"] = ev.mse_refined;
            d["mcd_coarse"] = ev.mcd_coarse;
            d["mcd_refined"] = ev.mcd_refined;
            return d;
          },
          py::arg("data"), py::arg("seed") = 7);

  m.def(
      "gradient_suite",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& c : gradient_suite(seed)) {
          out.append(py::make_tuple(c.name, c.report.max_rel_error, c.report.passed));
        }
        return out;
      },
      py::arg("seed") = 1);

  m.def(
      "run_command",
      [](const std::string& command, const py::dict& config, const std::filesystem::path& out_dir,
         const std::optional<std::filesystem::path>& checkpoint, const py::dict& extra) {
        CommandOptions o;
        o.config = config_from(config, ModelConfig{});
        for (const auto& [k, v] : config) o.overrides.emplace_back(py::str(k), py::str(v));
        o.out_dir = out_dir;
        if (checkpoint) o.checkpoint = *checkpoint;
        for (const auto& [k, v] : extra) {
          const std::string key = py::str(k);
          if (key == "count") o.count = v.cast<int>();
          else if (key == "pairs") o.pairs = v.cast<int>();
          else if (key == "points") o.points = v.cast<int>();
          else if (key == "content") o.content = v.cast<int>();
          else if (key == "bridge_steps") o.bridge_steps = v.cast<int>();
          else if (key == "eval_seed") o.eval_seed = v.cast<std::uint64_t>();
          else if (key == "generated") o.generated = v.cast<std::string>();
          else if (key == "target") o.target = v.cast<std::string>();
          else if (key == "dataset") o.dataset = v.cast<std::string>();
          else if (key == "key") o.mels_key = v.cast<std::string>();
          else throw UsageError("unknown option '" + key + "'");
        }
        std::ostringstream log;
        const int code = run(command, o, log);
        return py::make_tuple(code, log.str());
      },
      py::arg("command"), py::arg("config") = py::dict(), py::arg("out_dir") = ".",
      py::arg("checkpoint") = py::none(), py::arg("options") = py::dict());
}
