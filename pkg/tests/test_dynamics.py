import numpy as np
import pytest
from scipy.integrate import solve_ivp

from flyby_guidance.attitude import InvalidInputError, quat_normalize
from flyby_guidance.dynamics import (PlantModel, IntegratorSettings, ScaledModel, f_nonlinear,
                                     inertial_angular_momentum, propagate, propagate_dense,
                                     propagate_nodes)
from flyby_guidance.scenario import BENCHMARK_J, BENCHMARK_L, build_benchmark

VERY_TIGHT = IntegratorSettings(1e-12, 1e-12)


def physical_rhs(q, w, h, tau, J, L):
    """Physical-unit equations of motion, written with the rate-matrix form of the kinematics."""
    wx, wy, wz = w
    Omega = np.array([[0.0, wz, -wy, wx],
                      [-wz, 0.0, wx, wy],
                      [wy, -wx, 0.0, wz],
                      [-wx, -wy, -wz, 0.0]])
    qdot = 0.5 * Omega @ q
    wdot = np.linalg.solve(J, np.cross(J @ w + L @ h, w) - L @ tau)
    return qdot, wdot, tau


def random_scaled_state(rng, n_w=4):
    return np.concatenate([quat_normalize(rng.normal(size=4)), rng.uniform(-1, 1, 3),
                           rng.uniform(-1, 1, n_w)])


def test_equilibrium(benchmark):
    x = benchmark.x_init_scaled
    np.testing.assert_array_equal(f_nonlinear(x, np.zeros(4), benchmark.plant, benchmark.scaling), 0.0)


def test_principal_axis_spin_is_steady():
    plant = PlantModel(np.diag([3.0, 2.0, 1.0]), np.eye(3))
    sc = build_benchmark().scaling.without_wheel(3)
    x = np.concatenate([[0, 0, 0, 1.0], [0.0, 0.7, 0.0], np.zeros(3)])
    xdot = f_nonlinear(x, np.zeros(3), plant, sc)
    np.testing.assert_allclose(xdot[4:], 0.0, atol=1e-15)


def test_matches_independent_physical_model(benchmark, rng):
    sc = benchmark.scaling
    for _ in range(200):
        x = random_scaled_state(rng)
        u = rng.uniform(-1, 1, 4)
        q, w, h, tau = x[:4], x[4:7] * sc.omega_max, x[7:] * sc.h_max, u * sc.tau_max
        qd, wd, hd = physical_rhs(q, w, h, tau, BENCHMARK_J, BENCHMARK_L)
        expected = np.concatenate([qd, wd / sc.omega_max, hd / sc.h_max])
        got = f_nonlinear(x, u, benchmark.plant, benchmark.scaling)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_batch_matches_single(benchmark, rng):
    model = ScaledModel(benchmark.plant, benchmark.scaling)
    X = np.array([random_scaled_state(rng) for _ in range(20)])
    U = rng.uniform(-1, 1, (20, 4))
    F = model.f_batch(X, U)
    for k in range(20):
        np.testing.assert_allclose(F[k], model.f(X[k], U[k]), rtol=1e-13, atol=1e-15)


def test_zero_input_rest_is_constant(benchmark):
    x0 = benchmark.x_init_scaled
    xf = propagate(x0, np.zeros(4), np.zeros(4), 0.0, 200.0, benchmark.plant, benchmark.scaling)
    np.testing.assert_allclose(xf, x0, atol=1e-14)


def test_momentum_conservation_and_quaternion_norm(benchmark, rng):
    x0 = random_scaled_state(rng)
    H0 = inertial_angular_momentum(x0, benchmark.plant, benchmark.scaling)
    for u_a, u_b in ((np.zeros(4), np.zeros(4)), (rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4))):
        x1 = propagate(x0, u_a, u_b, 0.0, 50.0, benchmark.plant, benchmark.scaling, VERY_TIGHT)
        H1 = inertial_angular_momentum(x1, benchmark.plant, benchmark.scaling)
        np.testing.assert_allclose(H1, H0, atol=1e-9 * max(1.0, np.linalg.norm(H0)))
        assert abs(np.linalg.norm(x1[:4]) - 1.0) < 1e-9


def test_tolerance_self_convergence(benchmark, rng):
    x0 = random_scaled_state(rng)
    u_a, u_b = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
    loose = IntegratorSettings(1e-8, 1e-8)
    half = IntegratorSettings(0.5e-8, 0.5e-8)
    a = propagate(x0, u_a, u_b, 0.0, 20.0, benchmark.plant, benchmark.scaling, loose)
    b = propagate(x0, u_a, u_b, 0.0, 20.0, benchmark.plant, benchmark.scaling, half)
    assert np.abs(a - b).max() < 10 * 1e-8


def test_scaled_and_unscaled_propagation_agree(benchmark, rng):
    sc = benchmark.scaling
    x0 = random_scaled_state(rng)
    u_a, u_b = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
    t_b = 15.0

    def rhs(t, z):
        tau = (u_a + (u_b - u_a) * t / t_b) * sc.tau_max
        return np.concatenate(physical_rhs(z[:4], z[4:7], z[7:], tau, BENCHMARK_J, BENCHMARK_L))

    z0 = np.concatenate([x0[:4], x0[4:7] * sc.omega_max, x0[7:] * sc.h_max])
    z1 = solve_ivp(rhs, (0, t_b), z0, method="DOP853", rtol=1e-12, atol=1e-13).y[:, -1]
    x1 = propagate(x0, u_a, u_b, 0.0, t_b, benchmark.plant, sc, VERY_TIGHT)
    got = np.concatenate([x1[:4], x1[4:7] * sc.omega_max, x1[7:] * sc.h_max])
    np.testing.assert_allclose(got, z1, atol=1e-10)


def test_propagation_is_deterministic(benchmark, rng):
    U = rng.uniform(-1, 1, (benchmark.N, 4))
    a = propagate_nodes(benchmark.x_init_scaled, benchmark.times, U, benchmark.plant, benchmark.scaling)
    b = propagate_nodes(benchmark.x_init_scaled, benchmark.times, U, benchmark.plant, benchmark.scaling)
    np.testing.assert_array_equal(a, b)
    t, X = propagate_dense(benchmark.x_init_scaled, benchmark.times, U, benchmark.plant,
                           benchmark.scaling, supersample=4)
    assert t.size == 1 + 4 * (benchmark.N - 1)
    np.testing.assert_allclose(X[::4], a, atol=1e-12)


def test_disturbance_plug_point(benchmark):
    d = np.array([0.01, 0.0, 0.0])
    plant = PlantModel(BENCHMARK_J, BENCHMARK_L, disturbance=lambda t: d)
    x = benchmark.x_init_scaled
    xdot = f_nonlinear(x, np.zeros(4), plant, benchmark.scaling)
    np.testing.assert_allclose(xdot[4:7] * benchmark.scaling.omega_max, np.linalg.solve(BENCHMARK_J, d))


def test_plant_validation_and_faults():
    with pytest.raises(InvalidInputError):
        PlantModel(BENCHMARK_J + np.triu(np.ones((3, 3)), 1), BENCHMARK_L)
    with pytest.raises(InvalidInputError):
        PlantModel(-BENCHMARK_J, BENCHMARK_L)
    with pytest.raises(InvalidInputError):
        PlantModel(BENCHMARK_J, 2 * BENCHMARK_L)
    plant = PlantModel(BENCHMARK_J, BENCHMARK_L).without_wheel(3)
    assert plant.n_w == 3 and plant.active_wheels == (0, 1, 2)
    np.testing.assert_array_equal(plant.L, BENCHMARK_L[:, :3])
    with pytest.raises(InvalidInputError):
        propagate(np.zeros(11), np.zeros(4), np.zeros(4), 1.0, 1.0, plant,
                  build_benchmark().scaling)
