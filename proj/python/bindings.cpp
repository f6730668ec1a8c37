#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "imfvqa/checkpoint.hpp"
#include "imfvqa/errors.hpp"
#include "imfvqa/evalkit.hpp"
#include "imfvqa/example_io.hpp"
#include "imfvqa/imf.hpp"
#include "imfvqa/run_config.hpp"
#include "imfvqa/selftest.hpp"
#include "imfvqa/svmgen.hpp"
#include "imfvqa/synthetic.hpp"
#include "imfvqa/training.hpp"

namespace py = pybind11;
using namespace imfvqa;

namespace {

imf::ModalityCondition condition_from_string(const std::string& s) {
  for (auto c : {imf::ModalityCondition::both, imf::ModalityCondition::image_only,
                 imf::ModalityCondition::point_only}) {
    if (s == imf::to_string(c)) return c;
  }
  throw ValidationError("unknown condition '" + s + "' (allowed: both, image-only, point-only)");
}

RunConfig run_config_from(const std::string& config_json) {
  RunConfig c;
  if (!config_json.empty()) apply_json(json::parse(config_json), c);
  c.finalize();
  return c;
}

py::dict qa_dict(const svmgen::QAPair& p) {
  return py::module_::import("json").attr("loads")(svmgen::corpus_record(p));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Incomplete multimodal fusion VQA toolkit";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<StateError>(m, "StateError", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<CorruptFileError>(m, "CorruptFileError", base);
  py::register_exception<VersionError>(m, "VersionError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<TransportError>(m, "TransportError", base);

  m.def(
      "kl_loss", [](std::vector<double> mu, std::vector<double> log_sigma) {
        return imf::kl_loss({std::move(mu), std::move(log_sigma)});
      },
      py::arg("mu"), py::arg("log_sigma"));
  m.def(
      "sample_z",
      [](std::vector<double> mu, std::vector<double> log_sigma, const std::vector<double>& eps) {
        return imf::sample_z({std::move(mu), std::move(log_sigma)}, eps);
      },
      py::arg("mu"), py::arg("log_sigma"), py::arg("eps"));

  m.def("normalize", [](const std::string& s) { return evalkit::normalize(s); });
  m.def(
      "build_judge_prompt",
      [](const std::string& question, const std::string& ground_truth, const std::string& model_output) {
        return evalkit::build_judge_prompt({question, ground_truth, model_output});
      },
      py::arg("question"), py::arg("ground_truth"), py::arg("model_output"));
  m.def("parse_verdict", [](const std::string& reply) {
    const auto v = evalkit::parse_verdict(reply);
    return py::make_tuple(v.same, v.rationale);
  });
  m.def(
      "evaluate_exact",
      [](const std::vector<std::tuple<std::string, std::string, std::string, std::string>>& rows) {
        std::vector<evalkit::Triplet> triplets;
        std::vector<std::optional<evalkit::Verdict>> verdicts;
        for (const auto& [q, gt, out, qtype] : rows) {
          triplets.push_back({q, gt, out, qtype});
          verdicts.emplace_back(evalkit::exact_judge(triplets.back()));
        }
        const auto report = evalkit::aggregate(triplets, verdicts, evalkit::JudgeMode::exact);
        return py::module_::import("json").attr("loads")(evalkit::report_json(report).dump());
      },
      py::arg("rows"), "Judge (question, ground_truth, model_output, qtype) rows by exact match; returns the report.");

  m.def(
      "generate_corpus",
      [](const std::string& scenes_text, std::uint64_t seed, const std::string& config_json) {
        const RunConfig cfg = run_config_from(config_json);
        py::list out;
        for (const auto& p : svmgen::generate_corpus(svmgen::parse_scenes(scenes_text), cfg.relations, seed)) {
          out.append(qa_dict(p));
        }
        return out;
      },
      py::arg("scenes_json"), py::arg("seed") = 7, py::arg("config_json") = "");

  py::class_<training::Checkpoint>(m, "Model")
      .def_static("load", &training::load_checkpoint, py::arg("path"))
      .def("save", [](training::Checkpoint& c, const std::string& path) { training::save_checkpoint(c, path); })
      .def(
          "predict",
          [](const training::Checkpoint& c, const std::string& question, std::optional<std::vector<double>> image,
             std::optional<std::vector<double>> point) {
            return training::predict(c.model, {std::move(image), std::move(point)}, question);
          },
          py::arg("question"), py::arg("image") = py::none(), py::arg("point") = py::none())
      .def(
          "accuracy",
          [](const training::Checkpoint& c, const std::string& data_path, const std::string& condition) {
            return training::accuracy(c.model, training::load_examples(data_path), condition_from_string(condition));
          },
          py::arg("data_path"), py::arg("condition") = "both")
      .def_property_readonly("rng_state", [](const training::Checkpoint& c) { return c.rng_state; });

  m.def(
      "train_synthetic",
      [](const std::string& config_json) {
        const RunConfig cfg = run_config_from(config_json);
        const auto data = synthetic::make_synthetic_dataset(cfg.synthetic, cfg.seed);
        training::TrainResult r;
        {
          py::gil_scoped_release release;
          r = training::train(cfg.train, data.train);
        }
        py::dict acc;
        for (auto c : {imf::ModalityCondition::both, imf::ModalityCondition::image_only,
                       imf::ModalityCondition::point_only}) {
          acc[imf::to_string(c)] = training::accuracy(r.model, data.test, c);
        }
        py::list trace;
        for (const auto& e : r.trace) trace.append(py::make_tuple(e.total, e.ce, e.kl));
        return py::make_tuple(training::Checkpoint{std::move(r.model), r.config, r.rng_state}, acc, trace);
      },
      py::arg("config_json") = "",
      "Train on the synthetic task; returns (model, test accuracy per condition, per-epoch (total, ce, kl)).");

  m.def(
      "selftest",
      [](std::uint64_t seed) {
        py::list out;
        std::vector<selftest::CheckResult> results;
        {
          py::gil_scoped_release release;
          results = selftest::run_all(seed);
        }
        for (const auto& r : results) out.append(py::make_tuple(r.name, r.passed, r.detail));
        return out;
      },
      py::arg("seed") = 7);
}
