import numpy as np
import pytest
from oracles import cvxpy_subproblem, toy_instance

from flyby_guidance.attitude import InvalidInputError
from flyby_guidance.conic import (ConstructionError, VariableLayout, assemble_static,
                                  cone_thresholds, export_text, load_text, set_trust_region,
                                  update_dynamic, verify_solution)
from flyby_guidance.solvers import OPTIMAL, ClarabelBackend, EcosBackend


def solved_toy(rng, backend=None):
    scenario, reference, discrete, weights, trust = toy_instance(rng)
    problem = assemble_static(scenario)
    update_dynamic(problem, discrete, reference, weights, trust)
    result = (backend or EcosBackend()).solve(problem)
    return scenario, reference, discrete, weights, trust, problem, result


def test_layout_sizes(benchmark):
    lay = VariableLayout(40, 4)
    assert lay.n_x == 11 and lay.block == 21 and lay.size == 840
    problem = assemble_static(benchmark)
    assert problem.n_var == 840
    assert problem.A_eq.shape == (440, 840)
    # slack signs, box limits on u, h, omega, trust-region caps
    assert problem.cones.nonneg == 40 * (2 + 4 * 4 + 6 + 2)
    # sun, line of sight, visual, infrared, control energy, control deviation, then state deviation
    assert problem.cones.soc_dims == (5,) * 240 + (12,) * 40
    assert problem.G.shape[0] == problem.cones.rows


def test_layout_offsets_round_trip(rng):
    lay = VariableLayout(5, 3)
    parts = ((rng.normal(size=(5, 10)), rng.normal(size=(5, 3)))
             + tuple(rng.normal(size=5) for _ in range(6)))
    z = lay.pack(*parts)
    names = ("x", "u", "gamma", "zeta", "eta", "rho", "delta_x", "delta_u")
    parts_out = lay.unpack(z)
    for name, expected in zip(names, parts):
        np.testing.assert_array_equal(parts_out[name], expected)
    assert z[lay.gamma(2)] == parts[2][2]
    with pytest.raises(IndexError):
        lay.x(5)


def test_thresholds_tightening(benchmark):
    thr = cone_thresholds(benchmark)
    assert thr["visual"] == pytest.approx(np.sqrt(1 - np.cos(0.97 * np.deg2rad(0.46))))
    assert thr["infrared"] == pytest.approx(np.sqrt(1 - np.cos(0.97 * np.deg2rad(5.0))))
    assert thr["sun"] == pytest.approx(np.sqrt(1.5))


def test_matches_independent_model(rng):
    scenario, reference, discrete, weights, trust, problem, result = solved_toy(rng)
    assert result.status == OPTIMAL
    value, x, u, status = cvxpy_subproblem(scenario, discrete, reference, weights, trust,
                                           scenario.beta)
    assert status == "optimal"
    assert result.objective == pytest.approx(value, abs=1e-6)
    parts = problem.layout.unpack(result.primal)
    assert np.abs(parts["x"] - x).max() < 1e-4
    assert np.abs(parts["u"] - u).max() < 1e-4
    assert verify_solution(problem, result.primal).ok(1e-7)


def test_backends_agree(rng):
    a = solved_toy(np.random.default_rng(3))[-1]
    b = solved_toy(np.random.default_rng(3), ClarabelBackend())[-1]
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_in_place_updates_keep_structure(benchmark, rng):
    scenario, reference, discrete, weights, trust = toy_instance(rng)
    problem = assemble_static(scenario)
    nnz = problem.A_eq.nnz, problem.G.nnz
    update_dynamic(problem, discrete, reference, weights, trust)
    assert (problem.A_eq.nnz, problem.G.nnz) == nnz
    set_trust_region(problem, 0.3, 0.2)
    caps = problem.h[problem._h_trust]
    np.testing.assert_array_equal(caps, np.tile([0.3, 0.2], (scenario.N, 1)))
    with pytest.raises(InvalidInputError):
        set_trust_region(problem, 0.0, 1.0)


def test_export_round_trip(tmp_path, rng):
    problem = solved_toy(rng)[5]
    path = tmp_path / "problem.txt"
    export_text(problem, path)
    data = load_text(path)
    np.testing.assert_array_equal(data["c"], problem.c)
    np.testing.assert_array_equal(data["h"], problem.h)
    np.testing.assert_array_equal(data["b"], problem.b_eq)
    assert (data["A"] != problem.A_eq).nnz == 0
    assert (data["G"] != problem.G).nnz == 0
    assert data["nonneg"] == problem.cones.nonneg
    assert data["soc_dims"] == problem.cones.soc_dims


def test_verify_flags_infeasible_point(rng):
    problem = solved_toy(rng)[5]
    report = verify_solution(problem, np.zeros(problem.n_var))
    assert not report.ok()
    with pytest.raises(ConstructionError):
        verify_solution(problem, np.zeros(3))


def test_shape_mismatch_is_rejected(benchmark, rng):
    scenario, reference, discrete, weights, trust = toy_instance(rng)
    problem = assemble_static(benchmark)
    with pytest.raises(ConstructionError):
        update_dynamic(problem, discrete, reference, weights, trust)
    with pytest.raises(ConstructionError):
        assemble_static(benchmark, VariableLayout(10, 4))
