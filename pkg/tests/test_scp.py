import numpy as np
import pytest

from flyby_guidance.attitude import InvalidInputError
from flyby_guidance.conic import cone_thresholds
from flyby_guidance.dynamics import propagate_nodes
from flyby_guidance.pointing import build_P, factor_cone
from flyby_guidance.scenario import build_benchmark
from flyby_guidance.scp import (CONVERGED, REJECTION_LIMIT, TERMINATIONS, TIME_LIMIT, ScpConfig,
                                feasibility_metric, initial_reference, run_scp,
                                trust_region_update)
from flyby_guidance.solvers import INFEASIBLE, SolverBackend, SolverResult


class AlwaysInfeasible(SolverBackend):
    name = "always-infeasible"

    def __init__(self):
        self.calls = 0

    def solve(self, problem, warm_start=None):
        self.calls += 1
        return SolverResult(INFEASIBLE, np.full(problem.n_var, np.nan), np.nan, 0.0, {})


def test_feasibility_metric_examples():
    assert feasibility_metric(np.zeros((3, 2)), np.zeros((3, 2))) == 0.0
    assert feasibility_metric([[3.0, 4.0], [0.0, 1.0]], np.zeros((2, 2))) == pytest.approx(6.0)
    with pytest.raises(InvalidInputError):
        feasibility_metric(np.zeros((3, 2)), np.zeros((2, 2)))


def test_trust_region_update_examples():
    cfg = ScpConfig()
    assert trust_region_update(0.6, (0.1, 0.2), cfg) == ((0.025, 0.05), False)
    assert trust_region_update(0.5, (0.1, 0.2), cfg) == ((0.2, 0.4), True)
    assert trust_region_update(float("nan"), (0.1, 0.2), cfg)[1] is False
    with pytest.raises(InvalidInputError):
        trust_region_update(0.1, (0.0, 0.2), cfg)


@pytest.mark.parametrize("bad", [dict(n_iter=0), dict(kappa_plus=0.5), dict(kappa_minus=1.5),
                                 dict(epsilon_max=0.0), dict(time_limit=-1.0),
                                 dict(beta=(1, 2, 3))])
def test_config_validation(bad):
    with pytest.raises(InvalidInputError):
        ScpConfig(**bad)


def test_rejections_contract_radii_geometrically(benchmark):
    backend = AlwaysInfeasible()
    cfg = ScpConfig(n_sol=6)
    sol = run_scp(benchmark, cfg, backend)
    assert sol.termination == REJECTION_LIMIT
    assert backend.calls == 6 and sol.iterations == 1
    radii = [rec.delta_xmax for rec in sol.history]
    np.testing.assert_allclose(radii, 0.1 * 0.25 ** np.arange(6))
    assert not any(rec.accepted for rec in sol.history)
    # with nothing accepted the reference is the coasting initial guess
    np.testing.assert_array_equal(sol.trajectory.x, initial_reference(benchmark).x)


def test_time_limit(benchmark):
    sol = run_scp(benchmark, ScpConfig(time_limit=1e-9), AlwaysInfeasible())
    assert sol.termination == TIME_LIMIT


def test_nominal_solution_invariants(benchmark, nominal_solution):
    sol = nominal_solution
    assert sol.termination == CONVERGED and sol.converged
    traj = sol.trajectory
    # the reference is always a nonlinear propagation of its own controls
    X = propagate_nodes(benchmark.x_init_scaled, benchmark.times, traj.u, benchmark.plant,
                        benchmark.scaling)
    np.testing.assert_allclose(traj.x, X, atol=1e-9)
    assert np.abs(np.linalg.norm(traj.x[:, :4], axis=1) - 1.0).max() < 1e-6
    assert np.abs(traj.u).max() <= 1.0 + 1e-7
    assert np.abs(traj.x[:, 4:]).max() <= 0.97 + 1e-3
    # sun keep-out holds at every node on the propagated attitude
    thr = cone_thresholds(benchmark)["sun"]
    for k, t in enumerate(benchmark.times):
        M = factor_cone(build_P(benchmark.sun_direction(t), benchmark.v_body), "-")
        assert np.linalg.norm(M @ traj.x[k, :4]) <= thr + 1e-6
    accepted = [r for r in sol.history if r.accepted]
    assert len(accepted) == sol.iterations
    assert all(r.epsilon_x <= 0.5 for r in accepted)
    assert accepted[-1].deviation_sum <= 1e-2
    assert len(sol.angle_history) == sol.iterations + 1
    assert len(sol.timings["linearization"]) == sol.iterations


def test_faulty_near_saturation_stays_in_envelope():
    sc = build_benchmark(fault=4)
    scenario = build_benchmark(fault=4, h0=0.9 * sc.scaling.h_max)
    sol = run_scp(scenario, ScpConfig(n_iter=8))
    assert sol.termination in TERMINATIONS
    assert sol.trajectory.n_w == 3
    assert np.abs(sol.trajectory.x[:, 7:]).max() <= 1.0
    assert np.all(np.isfinite(sol.trajectory.x))
