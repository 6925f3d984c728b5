#include "covsteer/io.hpp"

#include <fstream>
#include <sstream>

#include "covsteer/errors.hpp"

namespace covsteer {

namespace {

[[noreturn]] void invalid(const std::string& message) {
  throw SteeringError(ErrorKind::InvalidProblem, message);
}

[[noreturn]] void mismatch(const std::string& message) {
  throw SteeringError(ErrorKind::DimensionMismatch, message);
}

double number(const Json& j, const std::string& name) {
  if (!j.is_number()) invalid(name + ": expected a number");
  return j.get<double>();
}

const Json& field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) invalid(std::string("missing field \"") + key + "\"");
  return *it;
}

// A 2-D array is an array whose first element is an array of numbers; an
// array of those is a sequence.
bool is_sequence(const Json& j) {
  return j.is_array() && !j.empty() && j.front().is_array() && !j.front().empty() &&
         j.front().front().is_array();
}

std::vector<Matrix> matrix_sequence(const Json& j, const char* name, int N) {
  if (!is_sequence(j)) return std::vector<Matrix>(static_cast<std::size_t>(N),
                                                  matrix_from_json(j, name));
  if (static_cast<int>(j.size()) != N) {
    std::ostringstream os;
    os << name << " has " << j.size() << " entries, expected " << N;
    mismatch(os.str());
  }
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(matrix_from_json(j[k], std::string(name) + "[" + std::to_string(k) + "]"));
  return out;
}

void declared(const Json& j, const char* key, Eigen::Index actual) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_integer()) invalid(std::string(key) + ": expected an integer");
  if (it->get<long long>() != actual) {
    std::ostringstream os;
    os << "declared " << key << " = " << it->get<long long>() << " but the data give " << actual;
    mismatch(os.str());
  }
}

template <class T, class F>
Json array_of(const std::vector<T>& xs, F&& f) {
  Json a = Json::array();
  for (const auto& x : xs) a.push_back(f(x));
  return a;
}

}  // namespace

Matrix matrix_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) invalid(name + ": expected a 2-D array");
  if (j.empty()) return Matrix(0, 0);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array()) invalid(name + ": expected a 2-D array");
    if (j[r].size() != cols) mismatch(name + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], name);
  }
  return m;
}

Vector vector_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) invalid(name + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], name);
  return v;
}

Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

SteeringProblem problem_from_json(const Json& j) {
  if (!j.is_object()) invalid("problem file must hold a JSON object");
  const Json& jN = field(j, "N");
  if (!jN.is_number_integer()) invalid("N: expected an integer");
  SteeringProblem p;
  p.N = jN.get<int>();
  if (p.N < 1) invalid("N must be >= 1");
  p.A = matrix_sequence(field(j, "A"), "A", p.N);
  p.B = matrix_sequence(field(j, "B"), "B", p.N);
  p.D = matrix_sequence(field(j, "D"), "D", p.N);
  p.Q = matrix_sequence(field(j, "Q"), "Q", p.N);
  p.R = matrix_sequence(field(j, "R"), "R", p.N);
  p.mu0 = vector_from_json(field(j, "mu0"), "mu0");
  p.muN = vector_from_json(field(j, "muN"), "muN");
  p.Sigma0 = matrix_from_json(field(j, "Sigma0"), "Sigma0");
  p.SigmaN = matrix_from_json(field(j, "SigmaN"), "SigmaN");
  declared(j, "n", p.A.front().rows());
  declared(j, "p", p.B.front().cols());
  declared(j, "q", p.D.front().cols());
  return p;
}

Json problem_to_json(const SteeringProblem& p) {
  Json j;
  j["N"] = p.N;
  j["n"] = p.n();
  j["p"] = p.p();
  j["q"] = p.q();
  auto seq = [](const std::vector<Matrix>& ms) { return array_of(ms, [](const Matrix& m) { return to_json(m); }); };
  j["A"] = seq(p.A);
  j["B"] = seq(p.B);
  j["D"] = seq(p.D);
  j["Q"] = seq(p.Q);
  j["R"] = seq(p.R);
  j["mu0"] = to_json(p.mu0);
  j["muN"] = to_json(p.muN);
  j["Sigma0"] = to_json(p.Sigma0);
  j["SigmaN"] = to_json(p.SigmaN);
  return j;
}

Controller controller_from_json(const Json& j) {
  if (!j.is_object()) invalid("controller file must hold a JSON object");
  Controller c;
  auto matrices = [&](const char* key) {
    const Json& a = field(j, key);
    if (!a.is_array()) invalid(std::string(key) + ": expected an array");
    std::vector<Matrix> out;
    for (std::size_t k = 0; k < a.size(); ++k)
      out.push_back(matrix_from_json(a[k], std::string(key) + "[" + std::to_string(k) + "]"));
    return out;
  };
  auto vectors = [&](const char* key) {
    const Json& a = field(j, key);
    if (!a.is_array()) invalid(std::string(key) + ": expected an array");
    std::vector<Vector> out;
    for (std::size_t k = 0; k < a.size(); ++k)
      out.push_back(vector_from_json(a[k], std::string(key) + "[" + std::to_string(k) + "]"));
    return out;
  };
  c.K_seq = matrices("K_seq");
  c.v_seq = vectors("v_seq");
  c.mu_seq = vectors("mu_seq");
  if (j.contains("Sigma_seq")) c.Sigma_seq = matrices("Sigma_seq");
  if (j.contains("Pi0") && !j["Pi0"].is_null()) c.Pi0 = matrix_from_json(j["Pi0"], "Pi0");
  return c;
}

Json controller_to_json(const Controller& c) {
  Json j;
  j["K_seq"] = array_of(c.K_seq, [](const Matrix& m) { return to_json(m); });
  j["v_seq"] = array_of(c.v_seq, [](const Vector& v) { return to_json(v); });
  j["mu_seq"] = array_of(c.mu_seq, [](const Vector& v) { return to_json(v); });
  j["Sigma_seq"] = array_of(c.Sigma_seq, [](const Matrix& m) { return to_json(m); });
  j["Pi0"] = c.Pi0.size() ? to_json(c.Pi0) : Json(nullptr);
  return j;
}

Json report_to_json(const ValidationReport& report) {
  Json j;
  j["ok"] = report.ok();
  j["violations"] = array_of(report.violations, [](const Violation& v) {
    Json e;
    e["invariant"] = v.invariant;
    e["step"] = v.step;
    e["margin"] = v.margin;
    e["message"] = v.message;
    return e;
  });
  return j;
}

Json simulation_to_json(const SimulationResult& r) {
  Json j;
  j["num_paths"] = r.num_paths;
  j["seed"] = r.seed;
  j["mean_cost"] = r.mean_cost;
  j["cost_stderr"] = r.cost_stderr;
  j["sample_mean_seq"] = array_of(r.sample_mean_seq, [](const Vector& v) { return to_json(v); });
  j["sample_cov_seq"] = array_of(r.sample_cov_seq, [](const Matrix& m) { return to_json(m); });
  j["paths_stored"] = r.paths_stored.size();
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SteeringError(ErrorKind::Io, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SteeringError(ErrorKind::Io, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw SteeringError(ErrorKind::Io, "cannot write " + path);
  out << text;
  if (!out) throw SteeringError(ErrorKind::Io, "write failed for " + path);
}

}  // namespace covsteer
