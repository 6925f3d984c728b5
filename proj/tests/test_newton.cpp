#include "doctest.h"
#include "fixtures.hpp"

#include <chrono>

#include "covsteer/covariance_map.hpp"
#include "covsteer/errors.hpp"
#include "covsteer/newton.hpp"
#include "covsteer/riccati.hpp"

using namespace covsteer;
using namespace fixtures;

TEST_CASE("scalar fixture from 0.5") {
  const TransitionCache cache(s1());
  NewtonOptions opt;
  opt.initial_guess = m1(0.5);
  const NewtonReport r = solve_newton(cache, opt);
  REQUIRE(r.converged);
  REQUIRE(r.history.size() >= 2);
  CHECK(r.history[1].Pi0(0, 0) == doctest::Approx(-0.25));
  CHECK(r.history[1].damping == 1.0);
  CHECK(std::abs(r.Pi0_star(0, 0)) < 1e-10);
  CHECK(r.residual <= 1e-12);
}

TEST_CASE("starting at the root takes no steps") {
  const TransitionCache cache(s1());
  NewtonOptions opt;
  opt.initial_guess = m1(0.0);
  const NewtonReport r = solve_newton(cache, opt);
  CHECK(r.converged);
  CHECK(r.iterations() == 0);
}

TEST_CASE("default guess lies inside the feasible set") {
  Random rng(51);
  for (int t = 0; t < 30; ++t) {
    const TransitionCache cache(random_problem(rng));
    CHECK(check_feasibility(cache, default_initial_guess(cache)).feasible);
  }
}

TEST_CASE("double integrator converges and hits the target") {
  const SteeringProblem p = double_integrator();
  const TransitionCache cache(p);
  const auto t0 = std::chrono::steady_clock::now();
  const NewtonReport r = solve_newton(cache);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(r.converged);
  CHECK(r.iterations() <= 50);
  CHECK(secs < 1.0);
  const RiccatiSolution ric = pi_from_pi0(cache, r.Pi0_star);
  const Matrix SN = propagate_covariance(p, ric, p.Sigma0).back();
  CHECK((SN - p.SigmaN).norm() / p.SigmaN.norm() <= 1e-9);
  for (double q : r.quadratic_ratios) CHECK(q < 1e3);
  for (const auto& it : r.history) CHECK(check_feasibility(cache, it.Pi0).feasible);
}

TEST_CASE("root does not depend on the starting point") {
  Random rng(52);
  for (int t = 0; t < 30; ++t) {
    const Planted pl = planted_problem(rng);
    const SteeringProblem& p = pl.problem;
    const TransitionCache cache(p);
    NewtonOptions a, b;
    a.initial_guess = feasible_pi0(rng, cache, 0.01);
    b.initial_guess = feasible_pi0(rng, cache, 0.5);
    const NewtonReport ra = solve_newton(cache, a);
    const NewtonReport rb = solve_newton(cache, b);
    const NewtonReport rd = solve_newton(cache);
    const double scale = 1.0 + pl.Pi0_star.norm();
    CHECK((ra.Pi0_star - rb.Pi0_star).norm() <= 1e-8 * scale);
    CHECK((rd.Pi0_star - pl.Pi0_star).norm() <= 1e-8 * scale);
    CHECK((eval_f(cache, ra.Pi0_star) - p.SigmaN).norm() <= 1e-10 * (1.0 + p.SigmaN.norm()));
  }
}

TEST_CASE("error kinds") {
  SteeringProblem p = s1();
  p.SigmaN = m1(0.5);
  try {
    solve_newton(TransitionCache(p));
    FAIL("expected InfeasibleTarget");
  } catch (const SteeringError& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleTarget);
  }

  const TransitionCache cache(double_integrator());
  NewtonOptions few;
  few.max_iter = 1;
  try {
    solve_newton(cache, few);
    FAIL("expected MaxIterationsExceeded");
  } catch (const SteeringError& e) {
    CHECK(e.kind() == ErrorKind::MaxIterationsExceeded);
  }

  NewtonOptions outside;
  outside.initial_guess = m1(2.0);
  CHECK_THROWS_AS(solve_newton(TransitionCache(s1()), outside), SteeringError);
}
