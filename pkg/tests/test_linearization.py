import numpy as np
import pytest

from flyby_guidance.attitude import InvalidInputError, quat_normalize
from flyby_guidance.dynamics import f_nonlinear
from flyby_guidance.linearization import (CardinalityWeights, affine_term, card_weight, jacobian_A,
                                          jacobian_B, linearize)


def central_difference(fun, z, h=1e-6):
    z = np.asarray(z, dtype=float)
    cols = []
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        cols.append((fun(z + e) - fun(z - e)) / (2 * h))
    return np.stack(cols, axis=1)


def random_state(rng, n_w=4):
    return np.concatenate([quat_normalize(rng.normal(size=4)), rng.uniform(-1, 1, 3),
                           rng.uniform(-1, 1, n_w)])


def test_jacobians_match_finite_differences(benchmark, rng):
    plant, sc = benchmark.plant, benchmark.scaling
    for _ in range(20):
        x, u = random_state(rng), rng.uniform(-1, 1, 4)
        A_fd = central_difference(lambda z: f_nonlinear(z, u, plant, sc), x)
        B_fd = central_difference(lambda v: f_nonlinear(x, v, plant, sc), u)
        np.testing.assert_allclose(jacobian_A(x, plant, sc), A_fd, atol=1e-7)
        np.testing.assert_allclose(jacobian_B(plant, sc), B_fd, atol=1e-7)


def test_jacobian_block_structure(benchmark):
    A = jacobian_A(benchmark.x_init_scaled, benchmark.plant, benchmark.scaling)
    B = jacobian_B(benchmark.plant, benchmark.scaling)
    # wheel momenta do not feed back on themselves and the quaternion ignores torque
    np.testing.assert_array_equal(A[7:, :], 0.0)
    np.testing.assert_array_equal(B[:4, :], 0.0)
    np.testing.assert_allclose(B[7:, :], np.diag(benchmark.scaling.tau_max / benchmark.scaling.h_max))


def test_affine_term_is_first_order_expansion(benchmark, rng):
    plant, sc = benchmark.plant, benchmark.scaling
    x, u = random_state(rng), rng.uniform(-1, 1, 4)
    A, B = jacobian_A(x, plant, sc), jacobian_B(plant, sc)
    s = affine_term(x, u, plant, sc)
    np.testing.assert_allclose(A @ x + B @ u + s, f_nonlinear(x, u, plant, sc), atol=1e-14)
    errors = []
    for eps in (1e-2, 1e-3):
        dx, du = eps * rng.normal(size=11), eps * rng.normal(size=4)
        exact = f_nonlinear(x + dx, u + du, plant, sc)
        errors.append(np.abs(exact - (A @ (x + dx) + B @ (u + du) + s)).max() / eps ** 2)
    # remainder is second order: normalised errors stay bounded
    assert max(errors) < 10.0


def test_linearize_wraps_reference_signals(benchmark, rng):
    x, u = random_state(rng), rng.uniform(-1, 1, 4)
    ltv = linearize(lambda t: x, lambda t: u, benchmark.plant, benchmark.scaling)
    np.testing.assert_array_equal(ltv.A_of_t(3.0), jacobian_A(x, benchmark.plant, benchmark.scaling))
    np.testing.assert_allclose(ltv.s_of_t(3.0), affine_term(x, u, benchmark.plant, benchmark.scaling))


def test_jacobian_rejects_non_finite(benchmark):
    x = benchmark.x_init_scaled.copy()
    x[5] = np.nan
    with pytest.raises(InvalidInputError):
        jacobian_A(x, benchmark.plant, benchmark.scaling)


def test_card_weight_examples():
    assert card_weight(0.0) == pytest.approx(1000.0)
    assert card_weight(1.0) == pytest.approx(1.0 / 1.001)
    np.testing.assert_allclose(card_weight([0.0, 1.0], epsilon=1.0), [1.0, 0.5])
    with pytest.raises(InvalidInputError):
        card_weight(-0.1)


def test_cardinality_weights_clip_round_off():
    w = CardinalityWeights.from_previous([-1e-12, 2.0], [0.0, 0.0])
    np.testing.assert_allclose(w.gamma_weights, [1000.0, 1.0 / 2.001])
    init = CardinalityWeights.initial(5)
    np.testing.assert_allclose(init.zeta_weights, 1.0 / 1.001)
