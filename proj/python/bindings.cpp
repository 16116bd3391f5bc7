#include <sstream>

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "twincher/bench.hpp"
#include "twincher/cli.hpp"
#include "twincher/flow.hpp"
#include "twincher/forward_models.hpp"
#include "twincher/rng.hpp"
#include "twincher/solve.hpp"

namespace py = pybind11;

namespace twincher::python {
namespace {

py::dict trial_to_dict(const TrialRecord& r) {
  py::dict d;
  d["entangler_seed"] = r.entangler_seed;
  d["learner"] = to_string(r.learner);
  d["n_calls"] = r.n_calls;
  d["train_seed"] = r.train_seed;
  d["C"] = r.C;
  d["worst_residuals"] = r.worst_residuals;
  d["mean_final_residual"] = r.mean_final_residual;
  d["success"] = r.success;
  d["error"] = r.error;
  return d;
}

}  // namespace
}  // namespace twincher::python

PYBIND11_MODULE(_twincher, m) {
  using namespace twincher;
  m.doc() = "Invertible latent representations for black-box inverse problems";

  m.def("mix64", &mix64, py::arg("z"));
  m.def("derive_key", &derive_key, py::arg("seed"), py::arg("tag"), py::arg("index") = 0);
  m.def("squash", &squash, py::arg("z"));
  m.def("unsquash", &unsquash, py::arg("t"));

  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<ForwardProcess>(m, "ForwardProcess")
      .def_property_readonly("n_p", &ForwardProcess::n_p)
      .def_property_readonly("n_y", &ForwardProcess::n_y)
      .def("evaluate", &ForwardProcess::evaluate, py::arg("p"));

  py::class_<HarmonicEntangler, ForwardProcess>(m, "HarmonicEntangler")
      .def(py::init<std::uint64_t, int, int, int, double>(), py::arg("seed"), py::arg("n_p") = 2, py::arg("n_s") = 4,
           py::arg("e_n") = 3, py::arg("w_amp") = 1.0)
      .def_property_readonly("seed", &HarmonicEntangler::seed)
      .def_property_readonly("w_amp", &HarmonicEntangler::w_amp)
      .def_property_readonly("e_n", &HarmonicEntangler::e_n)
      .def("inverse", &HarmonicEntangler::inverse, py::arg("y"))
      .def("to_json", [](const HarmonicEntangler& e) { return e.to_json().dump(); })
      .def_static("from_json",
                  [](const std::string& text) { return HarmonicEntangler::from_json(nlohmann::json::parse(text)); });

  py::class_<SpiralProcess, ForwardProcess>(m, "SpiralProcess")
      .def(py::init<double, double, double>(), py::arg("turns") = 1.75 * std::numbers::pi, py::arg("r0") = 0.4,
           py::arg("r1") = 0.35);

  py::class_<TwincherModel>(m, "TwincherModel")
      .def(py::init<std::uint64_t, int, int, int, double, double, int>(), py::arg("arch_seed"), py::arg("n_y"),
           py::arg("n_p"), py::arg("n_layers") = 64, py::arg("s_max") = 1.0, py::arg("init_scale") = 0.01,
           py::arg("shift_features") = 0)
      .def_property_readonly("n_y", &TwincherModel::n_y)
      .def_property_readonly("n_p", &TwincherModel::n_p)
      .def_property_readonly("n_layers", &TwincherModel::n_layers)
      .def_property_readonly("parameter_count", &TwincherModel::parameter_count)
      .def_property("theta", &TwincherModel::theta, &TwincherModel::set_theta)
      .def("forward", &TwincherModel::forward, py::arg("y"))
      .def("inverse", &TwincherModel::inverse, py::arg("z"))
      .def("latent", &TwincherModel::latent, py::arg("y"))
      .def("jacobian", &TwincherModel::jacobian, py::arg("y"))
      .def("log_abs_det", &TwincherModel::log_abs_det, py::arg("y"))
      .def("save", [](const TwincherModel& model, const std::string& path) { checkpoint_save(model, path); })
      .def_static("load", [](const std::string& path) { return checkpoint_load(path); });

  py::class_<GnConfig>(m, "GnConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &GnConfig::lambda)
      .def_readwrite("delta_max", &GnConfig::delta_max)
      .def_readwrite("fd_step", &GnConfig::fd_step)
      .def_readwrite("lower", &GnConfig::lower)
      .def_readwrite("upper", &GnConfig::upper);

  m.def(
      "refine",
      [](const std::function<Vec(const Vec&)>& f, const Vec& target, const Vec& p0, const GnConfig& cfg, int n_steps) {
        const auto trace = refine(f, target, p0, cfg, n_steps);
        py::dict d;
        d["iterates"] = trace.iterates;
        d["residual_norms"] = trace.residual_norms;
        d["forward_evals"] = trace.forward_evals;
        return d;
      },
      py::arg("f"), py::arg("target"), py::arg("p0"), py::arg("config") = GnConfig{}, py::arg("n_steps") = 5);

  m.def(
      "estimate_complexity",
      [](const HarmonicEntangler& e, int n_trials) { return estimate_complexity(e, {n_trials, 50, 1e-2}).C; },
      py::arg("entangler"), py::arg("n_trials") = 4000);

  m.def(
      "run_trial",
      [](std::uint64_t entangler_seed, const std::string& learner, std::uint64_t n_calls, std::uint64_t train_seed,
         double w_amp, int n_test) {
        TrialOptions opts;
        opts.w_amp = w_amp;
        opts.n_test = n_test;
        py::gil_scoped_release release;
        const auto rec = run_trial(entangler_seed, parse_learner_kind(learner), n_calls, train_seed, opts);
        py::gil_scoped_acquire acquire;
        return python::trial_to_dict(rec);
      },
      py::arg("entangler_seed"), py::arg("learner"), py::arg("n_calls"), py::arg("train_seed"), py::arg("w_amp") = 1.0,
      py::arg("n_test") = 1000);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
