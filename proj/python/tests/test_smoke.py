import json
import pathlib

import numpy as np
import pytest

import covsteer

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"


@pytest.fixture(scope="module")
def double_integrator():
    return covsteer.load_problem(DATA / "double_integrator.json")


@pytest.fixture(scope="module")
def newton_controller(double_integrator):
    return covsteer.solve(double_integrator, "newton")


def test_problem_loads_as_arrays(double_integrator):
    p = double_integrator
    assert (p.N, p.n, p.p, p.q) == (30, 2, 1, 2)
    assert len(p.A) == 30
    assert isinstance(p.A[0], np.ndarray)
    np.testing.assert_array_equal(p.A[0], [[1.0, 0.2], [0.0, 1.0]])
    assert covsteer.validate(p) == []


def test_validate_reports_dimension_errors():
    p = covsteer.load_problem(DATA / "nonsquare_A.json")
    kinds = {v["invariant"] for v in covsteer.validate(p)}
    assert "dimension" in kinds


def test_newton_hits_terminal_covariance(double_integrator, newton_controller):
    p = double_integrator
    c = newton_controller
    assert len(c.K_seq) == 30 and c.K_seq[0].shape == (1, 2)
    err = np.linalg.norm(c.Sigma_seq[-1] - p.SigmaN) / np.linalg.norm(p.SigmaN)
    assert err <= 1e-9
    assert np.max(np.abs(c.mu_seq[-1])) <= 1e-9
    rep = covsteer.solve_newton(p)
    assert rep.converged and rep.iterations <= 50
    np.testing.assert_allclose(rep.Pi0_star, c.Pi0, rtol=0, atol=1e-12)


def test_methods_agree(double_integrator, newton_controller):
    sdp = covsteer.solve(double_integrator, "sdp")
    for kn, ks in zip(newton_controller.K_seq, sdp.K_seq):
        assert np.linalg.norm(kn - ks) <= 1e-4
    jn = covsteer.analytic_cost(double_integrator, newton_controller)
    js = covsteer.analytic_cost(double_integrator, sdp)
    assert abs(jn - js) <= 1e-6 * abs(jn)


def test_feasibility_and_map(double_integrator):
    Pb = covsteer.boundary_matrix(double_integrator)
    inside = Pb - np.eye(2)
    cert = covsteer.check_feasibility(double_integrator, inside)
    assert cert["feasible"] and cert["agree"]
    assert not covsteer.check_feasibility(double_integrator, Pb + np.eye(2))["feasible"]
    J = covsteer.eval_jacobian(double_integrator, inside)
    assert J.shape == (4, 4)
    SN = covsteer.eval_f(double_integrator, inside)
    np.testing.assert_allclose(SN, SN.T, atol=1e-12)


def test_simulation_is_reproducible(double_integrator, newton_controller):
    a = covsteer.simulate(double_integrator, newton_controller, num_paths=3000, seed=11,
                          store_paths=2, threads=1)
    b = covsteer.simulate(double_integrator, newton_controller, num_paths=3000, seed=11,
                          store_paths=2, threads=3)
    assert a.mean_cost == b.mean_cost
    np.testing.assert_array_equal(a.sample_cov_seq[-1], b.sample_cov_seq[-1])
    assert len(a.paths_stored) == 2 and len(a.paths_stored[0]) == 31
    J = covsteer.analytic_cost(double_integrator, newton_controller)
    assert abs(a.mean_cost - J) <= 4 * a.cost_stderr


def test_errors_carry_kind():
    p = covsteer.load_problem(DATA / "infeasible_target.json")
    with pytest.raises(covsteer.SteeringError) as info:
        covsteer.solve_newton(p)
    assert info.value.kind == "InfeasibleTarget"
    assert info.value.step == 29
    with pytest.raises(ValueError):
        covsteer.solve(p, "simplex")


def test_json_round_trip(newton_controller, double_integrator):
    text = newton_controller.to_json()
    back = covsteer.Controller.from_json(text)
    for a, b in zip(back.K_seq, newton_controller.K_seq):
        np.testing.assert_array_equal(a, b)
    problem = covsteer.SteeringProblem.from_json(double_integrator.to_json())
    assert problem.N == 30
    assert json.loads(text)["Pi0"] is not None


def test_sdpa_header(double_integrator):
    lines = covsteer.write_sdpa(double_integrator).splitlines()
    assert int(lines[1]) == 93
    assert int(lines[2]) == 30
