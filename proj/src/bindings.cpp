#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "covsteer/covariance_map.hpp"
#include "covsteer/errors.hpp"
#include "covsteer/io.hpp"
#include "covsteer/newton.hpp"
#include "covsteer/sdp.hpp"
#include "covsteer/simulator.hpp"

namespace py = pybind11;
using namespace covsteer;

namespace {

PYBIND11_CONSTINIT py::gil_safe_call_once_and_store<py::object> error_type;

[[noreturn]] void raise(const SteeringError& e) {
  py::object cls = error_type.get_stored();
  py::object err = cls(e.what());
  err.attr("kind") = to_string(e.kind());
  err.attr("step") = e.step();
  PyErr_SetObject(cls.ptr(), err.ptr());
  throw py::error_already_set();
}

py::dict certificate_dict(const FeasibilityCertificate& c) {
  py::dict d;
  d["feasible"] = c.feasible;
  d["boundary_test"] = c.boundary_test;
  d["factor_test"] = c.factor_test;
  d["spectrum_test"] = c.spectrum_test;
  d["agree"] = c.agree;
  d["boundary_margin"] = c.boundary_margin;
  d["factor_margin"] = c.factor_margin;
  d["spectrum_margin"] = c.spectrum_margin;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Discrete-time covariance steering: Newton and SDP solvers, Monte Carlo simulation.";

  error_type.call_once_and_store_result([&]() -> py::object {
    return py::exception<SteeringError>(m, "SteeringError", PyExc_RuntimeError);
  });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const SteeringError& e) {
      py::gil_scoped_acquire gil;
      try {
        raise(e);
      } catch (py::error_already_set& set) {
        set.restore();
      }
    }
  });

  py::class_<SteeringProblem>(m, "SteeringProblem")
      .def(py::init<>())
      .def_readwrite("N", &SteeringProblem::N)
      .def_readwrite("A", &SteeringProblem::A)
      .def_readwrite("B", &SteeringProblem::B)
      .def_readwrite("D", &SteeringProblem::D)
      .def_readwrite("Q", &SteeringProblem::Q)
      .def_readwrite("R", &SteeringProblem::R)
      .def_readwrite("mu0", &SteeringProblem::mu0)
      .def_readwrite("muN", &SteeringProblem::muN)
      .def_readwrite("Sigma0", &SteeringProblem::Sigma0)
      .def_readwrite("SigmaN", &SteeringProblem::SigmaN)
      .def_property_readonly("n", &SteeringProblem::n)
      .def_property_readonly("p", &SteeringProblem::p)
      .def_property_readonly("q", &SteeringProblem::q)
      .def_static("time_invariant", &SteeringProblem::time_invariant, py::arg("N"), py::arg("A"),
                  py::arg("B"), py::arg("D"), py::arg("Q"), py::arg("R"), py::arg("mu0"),
                  py::arg("muN"), py::arg("Sigma0"), py::arg("SigmaN"))
      .def_static(
          "from_json", [](const std::string& text) { return problem_from_json(Json::parse(text)); },
          "Parse the problem-file JSON format.")
      .def_static(
          "load", [](const std::string& path) { return problem_from_json(read_json_file(path)); },
          py::arg("path"))
      .def("to_json", [](const SteeringProblem& p) { return problem_to_json(p).dump(); });

  m.def(
      "validate",
      [](const SteeringProblem& p) {
        py::list out;
        for (const Violation& v : validate(p).violations) {
          py::dict d;
          d["invariant"] = v.invariant;
          d["step"] = v.step;
          d["margin"] = v.margin;
          d["message"] = v.message;
          out.append(d);
        }
        return out;
      },
      py::arg("problem"), "List of violated invariants; empty when the problem is valid.");
  m.def("symmetrized", [](const SteeringProblem& p) { return symmetrized(p); });

  py::class_<Controller>(m, "Controller")
      .def(py::init<>())
      .def_readwrite("K_seq", &Controller::K_seq)
      .def_readwrite("v_seq", &Controller::v_seq)
      .def_readwrite("mu_seq", &Controller::mu_seq)
      .def_readwrite("Sigma_seq", &Controller::Sigma_seq)
      .def_readwrite("Pi0", &Controller::Pi0)
      .def_property_readonly("N", &Controller::N)
      .def_static("from_json",
                  [](const std::string& text) { return controller_from_json(Json::parse(text)); })
      .def("to_json", [](const Controller& c) { return controller_to_json(c).dump(); });

  py::class_<NewtonReport>(m, "NewtonReport")
      .def_readonly("Pi0_star", &NewtonReport::Pi0_star)
      .def_readonly("converged", &NewtonReport::converged)
      .def_readonly("residual", &NewtonReport::residual)
      .def_readonly("quadratic_ratios", &NewtonReport::quadratic_ratios)
      .def_readonly("ill_conditioned", &NewtonReport::ill_conditioned)
      .def_property_readonly("iterations", &NewtonReport::iterations)
      .def_property_readonly("residual_history", [](const NewtonReport& r) {
        std::vector<double> h;
        for (const auto& it : r.history) h.push_back(it.residual);
        return h;
      });

  m.def("boundary_matrix",
        [](const SteeringProblem& p) { return TransitionCache(p).boundary_matrix(); },
        py::arg("problem"), "Π_b; raises NotControllable.");
  m.def("eval_f",
        [](const SteeringProblem& p, const Matrix& Pi0) { return eval_f(TransitionCache(p), Pi0); },
        py::arg("problem"), py::arg("Pi0"));
  m.def(
      "eval_jacobian",
      [](const SteeringProblem& p, const Matrix& Pi0) {
        return eval_jacobian(TransitionCache(p), Pi0);
      },
      py::arg("problem"), py::arg("Pi0"), "Column-major vec Jacobian, n²×n².");
  m.def(
      "check_feasibility",
      [](const SteeringProblem& p, const Matrix& Pi0) {
        return certificate_dict(check_feasibility(TransitionCache(p), Pi0));
      },
      py::arg("problem"), py::arg("Pi0"));

  m.def(
      "solve_newton",
      [](const SteeringProblem& p, double tol_residual, int max_iter,
         std::optional<Matrix> initial_guess) {
        NewtonOptions opt;
        opt.tol_residual = tol_residual;
        opt.max_iter = max_iter;
        opt.initial_guess = std::move(initial_guess);
        py::gil_scoped_release release;
        return solve_newton(TransitionCache(p), opt);
      },
      py::arg("problem"), py::arg("tol_residual") = 1e-10, py::arg("max_iter") = 100,
      py::arg("initial_guess") = py::none());
  m.def(
      "controller_from_pi0",
      [](const SteeringProblem& p, const Matrix& Pi0) {
        const TransitionCache cache(p);
        return assemble_controller(cache, pi_from_pi0(cache, Pi0));
      },
      py::arg("problem"), py::arg("Pi0"));

  py::class_<SdpSolution>(m, "SdpSolution")
      .def_readonly("Sigma_seq", &SdpSolution::Sigma_seq)
      .def_readonly("U_seq", &SdpSolution::U_seq)
      .def_readonly("Y_seq", &SdpSolution::Y_seq)
      .def_readonly("objective", &SdpSolution::objective)
      .def_readonly("lossless_gaps", &SdpSolution::lossless_gaps)
      .def_readonly("Lambda_seq", &SdpSolution::Lambda_seq)
      .def_readonly("converged", &SdpSolution::converged)
      .def_readonly("used_fallback", &SdpSolution::used_fallback)
      .def_readonly("newton_steps", &SdpSolution::newton_steps)
      .def_property_readonly("kkt_max_residual",
                             [](const SdpSolution& s) { return s.kkt.max_residual(); });

  m.def(
      "solve_sdp",
      [](const SteeringProblem& p, double tol_gap, bool force_fallback) {
        SdpOptions opt;
        opt.tol_gap = tol_gap;
        opt.force_fallback = force_fallback;
        py::gil_scoped_release release;
        return solve_sdp(p, opt);
      },
      py::arg("problem"), py::arg("tol_gap") = 1e-9, py::arg("force_fallback") = false);
  m.def("extract_controller",
        [](const SteeringProblem& p, const SdpSolution& s) { return extract_controller(p, s); },
        py::arg("problem"), py::arg("solution"));
  m.def(
      "write_sdpa",
      [](const SteeringProblem& p) {
        std::ostringstream os;
        write_sdpa(p, os);
        return os.str();
      },
      py::arg("problem"), "SDPA sparse text of the relaxed program.");

  m.def(
      "solve",
      [](const SteeringProblem& p, const std::string& method) {
        if (method != "newton" && method != "sdp")
          throw py::value_error("method must be 'newton' or 'sdp'");
        py::gil_scoped_release release;
        if (method == "sdp") return extract_controller(p, solve_sdp(p));
        const TransitionCache cache(p);
        return assemble_controller(cache, pi_from_pi0(cache, solve_newton(cache).Pi0_star));
      },
      py::arg("problem"), py::arg("method") = "newton", "Optimal controller by either method.");
  m.def("analytic_cost", &analytic_cost, py::arg("problem"), py::arg("controller"));

  py::class_<SimulationResult>(m, "SimulationResult")
      .def_readonly("sample_mean_seq", &SimulationResult::sample_mean_seq)
      .def_readonly("sample_cov_seq", &SimulationResult::sample_cov_seq)
      .def_readonly("mean_cost", &SimulationResult::mean_cost)
      .def_readonly("cost_stderr", &SimulationResult::cost_stderr)
      .def_readonly("paths_stored", &SimulationResult::paths_stored)
      .def_readonly("seed", &SimulationResult::seed)
      .def_readonly("num_paths", &SimulationResult::num_paths);

  m.def(
      "simulate",
      [](const SteeringProblem& p, const Controller& c, long num_paths, std::uint64_t seed,
         int store_paths, int threads) {
        SimulationOptions opt;
        opt.num_paths = num_paths;
        opt.seed = seed;
        opt.store_paths = store_paths;
        opt.threads = threads;
        py::gil_scoped_release release;
        return simulate(p, c, opt);
      },
      py::arg("problem"), py::arg("controller"), py::arg("num_paths") = 1000,
      py::arg("seed") = 0, py::arg("store_paths") = 0, py::arg("threads") = 0);
}
