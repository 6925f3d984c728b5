#include "covsteer/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "covsteer/errors.hpp"

namespace covsteer {

namespace {

constexpr long kChunk = 1024;  // paths per accumulation chunk

// splitmix64 finalizer.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Running moments of the states and the path cost.
struct Moments {
  double count = 0.0;
  std::vector<Vector> mean;
  std::vector<Matrix> m2;
  double cost_mean = 0.0;
  double cost_m2 = 0.0;

  Moments(int N, Eigen::Index n)
      : mean(N + 1, Vector::Zero(n)), m2(N + 1, Matrix::Zero(n, n)) {}

  // Welford update with one path.
  void add(const std::vector<Vector>& x, double cost) {
    count += 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const Vector d = x[k] - mean[k];
      mean[k] += d / count;
      m2[k] += d * (x[k] - mean[k]).transpose();
    }
    const double dc = cost - cost_mean;
    cost_mean += dc / count;
    cost_m2 += dc * (cost - cost_mean);
  }

  // Pairwise combination (Chan et al.).
  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
      *this = o;
      return;
    }
    const double total = count + o.count;
    const double w = count * o.count / total;
    for (std::size_t k = 0; k < mean.size(); ++k) {
      const Vector d = o.mean[k] - mean[k];
      mean[k] += d * (o.count / total);
      m2[k] += o.m2[k] + w * d * d.transpose();
    }
    const double dc = o.cost_mean - cost_mean;
    cost_mean += dc * (o.count / total);
    cost_m2 += o.cost_m2 + w * dc * dc;
    count = total;
  }
};

void check_dimensions(const SteeringProblem& p, const Controller& c) {
  const Eigen::Index n = p.n(), m = p.p();
  bool ok = c.N() == p.N && static_cast<int>(c.v_seq.size()) == p.N &&
            static_cast<int>(c.mu_seq.size()) == p.N + 1;
  for (int k = 0; ok && k < p.N; ++k)
    ok = c.K_seq[k].rows() == m && c.K_seq[k].cols() == n && c.v_seq[k].size() == m &&
         c.mu_seq[k].size() == n;
  if (!ok)
    throw SteeringError(ErrorKind::DimensionMismatch,
                        "controller dimensions do not match the problem");
}

}  // namespace

PathRng::PathRng(std::uint64_t seed, std::uint64_t path) : engine_(mix(seed ^ mix(path))) {}

double PathRng::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double PathRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

SimulationResult simulate(const SteeringProblem& p, const Controller& c,
                          const SimulationOptions& opt) {
  check_dimensions(p, c);
  if (opt.num_paths < 1)
    throw SteeringError(ErrorKind::InvalidProblem, "num_paths must be at least 1");
  const int N = p.N;
  const Eigen::Index n = p.n(), q = p.q();
  const Matrix L0 = p.Sigma0.llt().matrixL();
  const long store = std::clamp<long>(opt.store_paths, 0, opt.num_paths);

  SimulationResult res;
  res.seed = opt.seed;
  res.num_paths = opt.num_paths;
  res.paths_stored.resize(store);

  const long chunks = (opt.num_paths + kChunk - 1) / kChunk;
  std::vector<Moments> partial(chunks, Moments(N, n));

  auto run_chunk = [&](long chunk) {
    Moments& acc = partial[chunk];
    std::vector<Vector> x(N + 1, Vector::Zero(n));
    Vector z0(n), w(q);
    const long first = chunk * kChunk;
    const long last = std::min(opt.num_paths, first + kChunk);
    for (long path = first; path < last; ++path) {
      PathRng rng(opt.seed, static_cast<std::uint64_t>(path));
      for (Eigen::Index i = 0; i < n; ++i) z0(i) = rng.normal();
      x[0] = opt.start_at_mean ? p.mu0 : Vector(p.mu0 + L0 * z0);
      double cost = 0.0;
      for (int k = 0; k < N; ++k) {
        const Vector u = c.K_seq[k] * (x[k] - c.mu_seq[k]) + c.v_seq[k];
        cost += x[k].dot(p.Q[k] * x[k]) + u.dot(p.R[k] * u);
        for (Eigen::Index i = 0; i < q; ++i) w(i) = rng.normal();
        x[k + 1] = p.A[k] * x[k] + p.B[k] * u;
        if (!opt.zero_noise) x[k + 1] += p.D[k] * w;
      }
      acc.add(x, cost);
      if (path < store) res.paths_stored[path] = x;
    }
  };

  int threads = opt.threads > 0 ? opt.threads
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<long>(threads, chunks));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long ch = next++; ch < chunks; ch = next++) run_chunk(ch);
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Fixed pairwise tree over chunk indices.
  for (long stride = 1; stride < chunks; stride *= 2)
    for (long i = 0; i + stride < chunks; i += 2 * stride) partial[i].merge(partial[i + stride]);
  const Moments& all = partial.front();

  const double denom = all.count > 1.0 ? all.count - 1.0 : 0.0;
  for (int k = 0; k <= N; ++k) {
    res.sample_mean_seq.push_back(all.mean[k]);
    res.sample_cov_seq.push_back(denom > 0.0 ? symmetrize(all.m2[k] / denom)
                                             : Matrix::Zero(n, n).eval());
  }
  res.mean_cost = all.cost_mean;
  res.cost_stderr = denom > 0.0 ? std::sqrt(all.cost_m2 / denom / all.count) : 0.0;
  return res;
}

SimulationResult simulate(const SteeringProblem& p, const Controller& c, long num_paths,
                          std::uint64_t seed, int store_paths) {
  SimulationOptions opt;
  opt.num_paths = num_paths;
  opt.seed = seed;
  opt.store_paths = store_paths;
  return simulate(p, c, opt);
}

}  // namespace covsteer
