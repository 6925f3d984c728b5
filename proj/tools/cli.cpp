#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "covsteer/errors.hpp"
#include "covsteer/io.hpp"
#include "covsteer/newton.hpp"
#include "covsteer/sdp.hpp"
#include "covsteer/simulator.hpp"

namespace covsteer {

namespace {

struct Config {
  std::string problem_path;
  std::string output_path;
  std::string method = "newton";
  std::string first = "newton";
  std::string controller_path;
  std::string paths_csv;
  std::string ellipse_csv;
  std::string ellipse_source = "planned";
  int ellipse_points = 128;
  long num_paths = 1000;
  std::uint64_t seed = 0;
  int store_paths = 10;
  int threads = 0;
  NewtonOptions newton;
  SdpOptions sdp;
};

/// A validation failure carried to the exit path with its report.
struct ValidationFailed {
  ValidationReport report;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidProblem:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::IndexOutOfRange:
    case ErrorKind::NotControllable:
      return kExitValidation;
    case ErrorKind::InfeasibleTarget:
      return kExitInfeasibleTarget;
    case ErrorKind::Io:
      return kExitIo;
    default:
      return kExitNotConverged;
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void emit(const Config& cfg, const Json& j, std::ostream& out) {
  if (cfg.output_path.empty())
    out << dump(j);
  else
    write_text_file(cfg.output_path, dump(j));
}

std::ostringstream csv_stream() {
  std::ostringstream os;
  os << std::setprecision(17);
  return os;
}

SteeringProblem load(const Config& cfg) {
  return symmetrized(problem_from_json(read_json_file(cfg.problem_path)));
}

// Everything except the terminal-noise check stops here; that one is left to
// the solvers, which report it as InfeasibleTarget.
SteeringProblem load_checked(const Config& cfg) {
  SteeringProblem p = load(cfg);
  ValidationReport report = validate(p);
  ValidationReport blocking;
  for (const Violation& v : report.violations)
    if (v.invariant != kTerminalCovarianceAboveNoise) blocking.violations.push_back(v);
  if (!blocking.ok()) throw ValidationFailed{blocking};
  return p;
}

struct Solved {
  Controller controller;
  Json diagnostics;
};

Solved solve_newton_method(const SteeringProblem& p, const NewtonOptions& opt) {
  const TransitionCache cache(p);
  const NewtonReport rep = solve_newton(cache, opt);
  Solved s{assemble_controller(cache, pi_from_pi0(cache, rep.Pi0_star, opt.tol)), Json()};
  Json& d = s.diagnostics;
  d["iterations"] = rep.iterations();
  d["converged"] = rep.converged;
  d["residual"] = rep.residual;
  d["quadratic_ratios"] = rep.quadratic_ratios;
  d["ill_conditioned"] = rep.ill_conditioned;
  d["symplectic_defect"] = cache.symplectic_defect();
  return s;
}

Solved solve_sdp_method(const SteeringProblem& p, const SdpOptions& opt) {
  const SdpSolution sol = solve_sdp(p, opt);
  Solved s{extract_controller(p, sol, opt.tol), Json()};
  Json& d = s.diagnostics;
  d["objective"] = sol.objective;
  d["converged"] = sol.converged;
  d["used_fallback"] = sol.used_fallback;
  d["newton_steps"] = sol.newton_steps;
  d["centerings"] = sol.centerings;
  d["barrier_mu_final"] = sol.barrier_mu_final;
  d["primal_infeasibility"] = sol.primal_infeasibility;
  d["dual_infeasibility"] = sol.dual_infeasibility;
  d["mean_qp_gap"] = sol.mean_qp_gap;
  d["lossless_gaps"] = sol.lossless_gaps;
  Json kkt;
  kkt["sigma_stationarity"] = sol.kkt.sigma_stationarity;
  kkt["sigma0_stationarity"] = sol.kkt.sigma0_stationarity;
  kkt["gain_stationarity"] = sol.kkt.gain_stationarity;
  kkt["input_stationarity"] = sol.kkt.input_stationarity;
  kkt["equality"] = sol.kkt.equality;
  kkt["multiplier_margin"] = sol.kkt.multiplier_margin;
  kkt["complementarity"] = sol.kkt.complementarity;
  kkt["max_lossless_gap"] = sol.kkt.max_lossless_gap;
  d["kkt"] = kkt;
  return s;
}

Solved solve_with(const std::string& method, const SteeringProblem& p, const Config& cfg) {
  return method == "sdp" ? solve_sdp_method(p, cfg.sdp) : solve_newton_method(p, cfg.newton);
}

double terminal_error(const SteeringProblem& p, const Controller& c) {
  return (c.Sigma_seq.back() - p.SigmaN).norm() / p.SigmaN.norm();
}

int cmd_validate(const Config& cfg, std::ostream& out, std::ostream& err) {
  ValidationReport report;
  try {
    report = validate(load(cfg));
  } catch (const SteeringError& e) {
    if (e.kind() != ErrorKind::DimensionMismatch) throw;
    report.violations.push_back({kDimension, e.step(), 0.0, e.what()});
  }
  emit(cfg, report_to_json(report), out);
  if (report.ok()) return kExitOk;
  Json e;
  e["error"] = "ValidationFailed";
  e["message"] = std::to_string(report.violations.size()) + " invariant(s) violated";
  e["violations"] = report_to_json(report)["violations"];
  err << e.dump() << "\n";
  return kExitValidation;
}

int cmd_solve(const Config& cfg, std::ostream& out) {
  const SteeringProblem p = load_checked(cfg);
  const Solved s = solve_with(cfg.method, p, cfg);
  Json j;
  j["method"] = cfg.method;
  j["N"] = p.N;
  j["n"] = p.n();
  j["p"] = p.p();
  const Json fields = controller_to_json(s.controller);
  for (const auto& [key, value] : fields.items()) j[key] = value;
  j["analytic_cost"] = analytic_cost(p, s.controller);
  j["terminal_covariance_error"] = terminal_error(p, s.controller);
  j["diagnostics"] = s.diagnostics;
  emit(cfg, j, out);
  return kExitOk;
}

void write_paths_csv(const std::string& path, const SimulationResult& r, Eigen::Index n) {
  std::ostringstream os = csv_stream();
  os << "path_id,k";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  os << "\n";
  for (std::size_t id = 0; id < r.paths_stored.size(); ++id)
    for (std::size_t k = 0; k < r.paths_stored[id].size(); ++k) {
      os << id << "," << k;
      for (Eigen::Index i = 0; i < n; ++i) os << "," << r.paths_stored[id][k](i);
      os << "\n";
    }
  write_text_file(path, os.str());
}

// μ_k + 3·V·diag(√λ)·(cos θ, sin θ) at θ = 2πj/points.
void write_ellipse_csv(const std::string& path, const std::vector<Vector>& mean,
                       const std::vector<Matrix>& cov, int points) {
  std::ostringstream os = csv_stream();
  os << "k,angle_index,x1,x2\n";
  for (std::size_t k = 0; k < mean.size(); ++k) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(cov[k]));
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix axes = 3.0 * eig.eigenvectors() * root.asDiagonal();
    for (int j = 0; j < points; ++j) {
      const double t = 2.0 * std::numbers::pi * j / points;
      const Vector x = mean[k] + axes.col(0) * std::cos(t) + axes.col(1) * std::sin(t);
      os << k << "," << j << "," << x(0) << "," << x(1) << "\n";
    }
  }
  write_text_file(path, os.str());
}

int cmd_simulate(const Config& cfg, std::ostream& out) {
  const SteeringProblem p = load_checked(cfg);
  if (!cfg.ellipse_csv.empty() && p.n() != 2)
    throw SteeringError(ErrorKind::DimensionMismatch,
                        "ellipse export needs a 2-D state, this problem has n = " +
                            std::to_string(p.n()));
  Controller c = cfg.controller_path.empty()
                     ? solve_with(cfg.method, p, cfg).controller
                     : controller_from_json(read_json_file(cfg.controller_path));
  SimulationOptions opt;
  opt.num_paths = cfg.num_paths;
  opt.seed = cfg.seed;
  opt.store_paths = cfg.store_paths;
  opt.threads = cfg.threads;
  const SimulationResult r = simulate(p, c, opt);

  std::vector<Vector> mean;
  std::vector<Matrix> cov;
  closed_loop_moments(p, c, mean, cov);
  Json j = simulation_to_json(r);
  j["analytic_cost"] = analytic_cost(p, c);
  j["terminal_covariance_error"] = (r.sample_cov_seq.back() - p.SigmaN).norm() / p.SigmaN.norm();
  Json z = Json::array();
  for (Eigen::Index i = 0; i < p.n(); ++i)
    z.push_back((r.sample_mean_seq.back()(i) - p.muN(i)) /
                std::sqrt(r.sample_cov_seq.back()(i, i) / static_cast<double>(r.num_paths)));
  j["terminal_mean_z"] = z;
  emit(cfg, j, out);

  if (!cfg.paths_csv.empty()) write_paths_csv(cfg.paths_csv, r, p.n());
  if (!cfg.ellipse_csv.empty()) {
    if (cfg.ellipse_source == "sample")
      write_ellipse_csv(cfg.ellipse_csv, r.sample_mean_seq, r.sample_cov_seq, cfg.ellipse_points);
    else
      write_ellipse_csv(cfg.ellipse_csv, mean, cov, cfg.ellipse_points);
  }
  return kExitOk;
}

int cmd_compare(const Config& cfg, std::ostream& out) {
  const SteeringProblem p = load_checked(cfg);
  const std::string second = cfg.first == "newton" ? "sdp" : "newton";
  const Solved a = solve_with(cfg.first, p, cfg);
  const Solved b = solve_with(second, p, cfg);
  Json gains = Json::array();
  double max_gain = 0.0, max_mean = 0.0, max_feedforward = 0.0, max_cov = 0.0;
  for (int k = 0; k < p.N; ++k) {
    const double d = (a.controller.K_seq[k] - b.controller.K_seq[k]).norm();
    gains.push_back(d);
    max_gain = std::max(max_gain, d);
    max_feedforward = std::max(max_feedforward, (a.controller.v_seq[k] - b.controller.v_seq[k]).norm());
  }
  for (int k = 0; k <= p.N; ++k) {
    max_mean = std::max(max_mean, (a.controller.mu_seq[k] - b.controller.mu_seq[k]).norm());
    max_cov = std::max(max_cov, (a.controller.Sigma_seq[k] - b.controller.Sigma_seq[k]).norm());
  }
  const double Ja = analytic_cost(p, a.controller), Jb = analytic_cost(p, b.controller);
  Json j;
  j["methods"] = {cfg.first, second};
  j["gain_delta_seq"] = gains;
  j["max_gain_delta"] = max_gain;
  j["max_feedforward_delta"] = max_feedforward;
  j["max_mean_delta"] = max_mean;
  j["max_covariance_delta"] = max_cov;
  j["cost"][cfg.first] = Ja;
  j["cost"][second] = Jb;
  j["cost_delta_relative"] = std::abs(Ja - Jb) / std::max(std::abs(Ja), std::abs(Jb));
  j["diagnostics"][cfg.first] = a.diagnostics;
  j["diagnostics"][second] = b.diagnostics;
  emit(cfg, j, out);
  return kExitOk;
}

int cmd_export_sdp(const Config& cfg, std::ostream& out) {
  const SteeringProblem p = load_checked(cfg);
  std::ostringstream os;
  write_sdpa(p, os);
  if (cfg.output_path.empty())
    out << os.str();
  else
    write_text_file(cfg.output_path, os.str());
  return kExitOk;
}

Json error_json(const char* kind, const std::string& message, int step = -1) {
  Json e;
  e["error"] = kind;
  e["message"] = message;
  e["step"] = step;
  return e;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Config cfg;
  CLI::App app{"Discrete-time covariance steering: solve, simulate and export."};
  app.require_subcommand(1);
  const std::vector<std::string> methods{"newton", "sdp"};

  auto common = [&](CLI::App* sub) {
    sub->add_option("problem", cfg.problem_path, "problem JSON")->required();
    sub->add_option("-o,--output", cfg.output_path, "output file (default: stdout)");
  };
  auto solver_options = [&](CLI::App* sub) {
    sub->add_option("--tol", cfg.newton.tol_residual, "Newton residual tolerance")
        ->capture_default_str();
    sub->add_option("--max-iter", cfg.newton.max_iter, "Newton iteration cap")
        ->capture_default_str();
    sub->add_option("--tol-gap", cfg.sdp.tol_gap, "SDP duality-gap tolerance")
        ->capture_default_str();
    sub->add_option("--max-newton", cfg.sdp.max_newton, "SDP Newton steps per centering")
        ->capture_default_str();
    sub->add_option("--epsilon", cfg.sdp.epsilon, "SDP interior-start noise inflation")
        ->capture_default_str();
    sub->add_flag("--force-fallback", cfg.sdp.force_fallback, "SDP: start from the big-M point");
  };

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a problem file");
  common(validate_cmd);

  CLI::App* solve_cmd = app.add_subcommand("solve", "write the optimal controller");
  common(solve_cmd);
  solve_cmd->add_option("--method", cfg.method)->check(CLI::IsMember(methods))->capture_default_str();
  solver_options(solve_cmd);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo rollouts under a controller");
  common(sim_cmd);
  sim_cmd->add_option("--controller", cfg.controller_path, "controller JSON (default: solve now)");
  sim_cmd->add_option("--method", cfg.method, "method used when no controller is given")
      ->check(CLI::IsMember(methods))
      ->capture_default_str();
  sim_cmd->add_option("--paths", cfg.num_paths)->check(CLI::PositiveNumber)->capture_default_str();
  sim_cmd->add_option("--seed", cfg.seed)->capture_default_str();
  sim_cmd->add_option("--store", cfg.store_paths, "sample paths kept for --paths-csv")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sim_cmd->add_option("--threads", cfg.threads, "0: all hardware threads")->capture_default_str();
  sim_cmd->add_option("--paths-csv", cfg.paths_csv, "stored paths: path_id,k,x1..xn");
  sim_cmd->add_option("--ellipse-csv", cfg.ellipse_csv, "3-sigma ellipses: k,angle_index,x1,x2");
  sim_cmd->add_option("--ellipse-points", cfg.ellipse_points)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim_cmd->add_option("--ellipse-source", cfg.ellipse_source, "planned moments or sample moments")
      ->check(CLI::IsMember({"planned", "sample"}))
      ->capture_default_str();
  solver_options(sim_cmd);

  CLI::App* compare_cmd = app.add_subcommand("compare", "Newton and SDP side by side");
  common(compare_cmd);
  compare_cmd->add_option("--first", cfg.first, "method listed first")
      ->check(CLI::IsMember(methods))
      ->capture_default_str();
  solver_options(compare_cmd);

  CLI::App* export_cmd = app.add_subcommand("export-sdp", "write the relaxed program as SDPA text");
  common(export_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(cfg, out, err);
    if (solve_cmd->parsed()) return cmd_solve(cfg, out);
    if (sim_cmd->parsed()) return cmd_simulate(cfg, out);
    if (compare_cmd->parsed()) return cmd_compare(cfg, out);
    return cmd_export_sdp(cfg, out);
  } catch (const ValidationFailed& v) {
    Json e = error_json("ValidationFailed", "problem failed validation");
    e["violations"] = report_to_json(v.report)["violations"];
    err << e.dump() << "\n";
    return kExitValidation;
  } catch (const SteeringError& e) {
    err << error_json(to_string(e.kind()), e.what(), e.step()).dump() << "\n";
    return exit_code(e.kind());
  } catch (const Json::exception& e) {
    err << error_json("InvalidProblem", e.what()).dump() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << error_json("Internal", e.what()).dump() << "\n";
    return 1;
  }
}

}  // namespace covsteer
