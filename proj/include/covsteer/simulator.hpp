#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "covsteer/mean_steering.hpp"

namespace covsteer {

/**
 * Per-path Gaussian stream. The engine is std::mt19937_64 (fully specified by
 * the standard) seeded with the single value s = mix(seed XOR mix(path)), where
 * mix is the splitmix64 finalizer
 *   x += 0x9E3779B97F4A7C15; x = (x ^ x>>30)·0xBF58476D1CE4E5B9;
 *   x = (x ^ x>>27)·0x94D049BB133111EB; x ^= x>>31,
 * so a path's draws depend on (seed, path) only.
 *
 * Uniforms: u = ((x >> 11) + 0.5) · 2⁻⁵³ for each 64-bit output x, so u ∈ (0, 1).
 * Normals: Box–Muller on consecutive uniforms (u₁, u₂),
 *   z₁ = √(−2 ln u₁) cos(2πu₂),  z₂ = √(−2 ln u₁) sin(2πu₂),
 * returned in that order.
 */
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path);
  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct SimulationOptions {
  long num_paths = 1000;
  std::uint64_t seed = 0;
  int store_paths = 0;         // first paths kept whole, by path index
  bool zero_noise = false;     // test hook: w_k = 0
  bool start_at_mean = false;  // test hook: x₀ = μ̄₀
  int threads = 0;             // 0: hardware concurrency; results do not depend on it
};

struct SimulationResult {
  std::vector<Vector> sample_mean_seq;  // N+1
  std::vector<Matrix> sample_cov_seq;   // N+1, unbiased (zero for a single path)
  double mean_cost = 0.0;
  double cost_stderr = 0.0;
  std::vector<std::vector<Vector>> paths_stored;  // each N+1 states
  std::uint64_t seed = 0;
  long num_paths = 0;
};

/**
 * Closed-loop rollouts under u_k = K_k(x_k − μ_k) + v_k with cost
 * Σ_{k<N} x_kᵀQ_kx_k + u_kᵀR_ku_k. Paths are grouped in fixed chunks of
 * consecutive indices and the chunk statistics are merged in a fixed pairwise
 * tree, so results are bitwise independent of the thread count.
 *
 * Throws DimensionMismatch.
 */
SimulationResult simulate(const SteeringProblem& problem, const Controller& controller,
                          const SimulationOptions& options);

SimulationResult simulate(const SteeringProblem& problem, const Controller& controller,
                          long num_paths, std::uint64_t seed, int store_paths);

}  // namespace covsteer
