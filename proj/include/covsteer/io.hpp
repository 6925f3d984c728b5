#pragma once

#include <string>

#include "json.hpp"

#include "covsteer/mean_steering.hpp"
#include "covsteer/problem.hpp"
#include "covsteer/simulator.hpp"

namespace covsteer {

using Json = nlohmann::ordered_json;

// Row-major nested arrays. Ragged rows throw DimensionMismatch.
Matrix matrix_from_json(const Json& j, const std::string& name);
Vector vector_from_json(const Json& j, const std::string& name);
Json to_json(const Matrix& m);
Json to_json(const Vector& v);

/**
 * Problem file: "N", optional "n"/"p"/"q", matrices "A","B","D","Q","R" as one
 * 2-D array (expanded to N copies) or an array of N of them, vectors
 * "mu0","muN", matrices "Sigma0","SigmaN".
 *
 * Throws InvalidProblem for missing or mistyped fields and DimensionMismatch for
 * ragged arrays, wrong sequence lengths or declared sizes that disagree with the
 * data. Shape consistency between fields is left to validate().
 */
SteeringProblem problem_from_json(const Json& j);
Json problem_to_json(const SteeringProblem& problem);

/// Reads K_seq, v_seq, mu_seq and, when present, Sigma_seq and Pi0.
Controller controller_from_json(const Json& j);
/// Writes K_seq, v_seq, mu_seq, Sigma_seq and Pi0 (null when empty).
Json controller_to_json(const Controller& controller);

Json report_to_json(const ValidationReport& report);
Json simulation_to_json(const SimulationResult& result);

/// Throws Io on unreadable files or malformed JSON.
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace covsteer
