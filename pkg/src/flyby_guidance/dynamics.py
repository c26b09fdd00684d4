"""
Rigid spacecraft with a reaction wheel assembly, in scaled coordinates.

The scaled state is ``x = [q; W_w w; W_h h]`` and the scaled control is
``u = W_tau tau``. Physical equations::

    q_dot   = 0.5 q (x) [w; 0]
    J w_dot = (J w + L h) x w - L tau + d(t)
    h_dot   = tau
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .attitude import InvalidInputError, ScalingSet, state_dim


class IntegrationError(RuntimeError):
    """Adaptive integration could not reach the requested end time."""

    def __init__(self, message: str, t_fail: float):
        super().__init__(f"{message} (t = {t_fail:.6g} s)")
        self.t_fail = t_fail


@dataclass(frozen=True, eq=False)
class PlantModel:
    """
    Inertia, wheel geometry and disturbance model.

    Parameters
    ----------
    J : array_like, shape (3, 3)
        Inertia in body axes, kg m^2. Must be symmetric positive definite.
    L : array_like, shape (3, n_w)
        Torque distribution matrix with unit spin-axis columns.
    disturbance : callable, optional
        ``d(t) -> (3,)`` torque in N m. ``None`` means identically zero.
    active_wheels : tuple of int, optional
        Original wheel indices of the columns of ``L`` (bookkeeping for faults).
    """

    J: np.ndarray
    L: np.ndarray
    disturbance: Optional[Callable[[float], np.ndarray]] = None
    active_wheels: tuple = ()

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        L = np.array(self.L, dtype=float)
        if J.shape != (3, 3):
            raise InvalidInputError("J must be 3x3")
        if not np.allclose(J, J.T, rtol=0.0, atol=1e-12 * np.abs(J).max()):
            raise InvalidInputError("J must be symmetric")
        if np.linalg.eigvalsh(J).min() <= 0.0:
            raise InvalidInputError("J must be positive definite")
        if L.ndim != 2 or L.shape[0] != 3 or L.shape[1] < 1:
            raise InvalidInputError("L must have shape (3, n_w)")
        if not np.allclose(np.linalg.norm(L, axis=0), 1.0, atol=1e-9):
            raise InvalidInputError("columns of L must be unit vectors")
        J.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "L", L)
        wheels = tuple(self.active_wheels) or tuple(range(L.shape[1]))
        if len(wheels) != L.shape[1]:
            raise InvalidInputError("active_wheels must list one index per column of L")
        object.__setattr__(self, "active_wheels", wheels)

    @property
    def n_w(self) -> int:
        return self.L.shape[1]

    @cached_property
    def J_inv(self):
        return np.linalg.inv(self.J)

    def d(self, t: float):
        if self.disturbance is None:
            return np.zeros(3)
        return np.asarray(self.disturbance(t), dtype=float)

    def without_wheel(self, index: int) -> "PlantModel":
        """Remove the wheel at column ``index`` (zero based), e.g. a blocked wheel."""
        if not 0 <= index < self.n_w:
            raise InvalidInputError(f"wheel index {index} out of range for {self.n_w} wheels")
        keep = [i for i in range(self.n_w) if i != index]
        return PlantModel(self.J, self.L[:, keep], self.disturbance,
                          tuple(self.active_wheels[i] for i in keep))


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float
    abs_tol: float
    max_step: float = np.inf
    method: str = "DOP853"

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise InvalidInputError("integration tolerances must be positive")
        if self.max_step <= 0.0:
            raise InvalidInputError("max_step must be positive")


#: tolerances used around linearization trajectories
LOOSE = IntegratorSettings(rel_tol=1e-5, abs_tol=1e-5)
#: tolerances used for truth propagation
TIGHT = IntegratorSettings(rel_tol=1e-10, abs_tol=1e-10)


class ScaledModel:
    """Precomputed constants for fast evaluation of the scaled dynamics."""

    def __init__(self, plant: PlantModel, scaling: ScalingSet):
        if plant.n_w != scaling.n_w:
            raise InvalidInputError(
                f"plant has {plant.n_w} wheels but scaling has {scaling.n_w}")
        self.plant = plant
        self.scaling = scaling
        self.n_w = plant.n_w
        self.n_x = state_dim(plant.n_w)
        self.J = plant.J
        self.J_inv = plant.J_inv
        self.L = plant.L
        self.w_max = scaling.omega_max
        self.h_max = scaling.h_max
        self.tau_max = scaling.tau_max
        self.has_disturbance = plant.disturbance is not None
        # constant input matrix
        B = np.zeros((self.n_x, self.n_w))
        B[4:7] = -(self.J_inv @ self.L * self.tau_max) / self.w_max[:, None]
        B[7:] = np.diag(self.tau_max / self.h_max)
        self.B = B

    def f(self, x, u, t=0.0):
        q = x[:4]
        w = x[4:7] * self.w_max
        tau = u * self.tau_max
        w0, w1, w2 = w
        q0, q1, q2, qs = q
        out = np.empty(self.n_x)
        # cross products written out: np.cross dominates the cost at this size
        out[0] = 0.5 * (qs * w0 + q1 * w2 - q2 * w1)
        out[1] = 0.5 * (qs * w1 + q2 * w0 - q0 * w2)
        out[2] = 0.5 * (qs * w2 + q0 * w1 - q1 * w0)
        out[3] = -0.5 * (q0 * w0 + q1 * w1 + q2 * w2)
        H0, H1, H2 = self.J @ w + self.L @ (x[7:] * self.h_max)
        torque = np.array([H1 * w2 - H2 * w1, H2 * w0 - H0 * w2, H0 * w1 - H1 * w0])
        torque -= self.L @ tau
        if self.has_disturbance:
            torque = torque + self.plant.d(t)
        out[4:7] = (self.J_inv @ torque) / self.w_max
        out[7:] = tau / self.h_max
        return out

    def f_batch(self, X, U, T=None):
        """Vectorised ``f`` over rows of ``X`` (K, n_x) and ``U`` (K, n_w) at times ``T``."""
        q = X[:, :4]
        w = X[:, 4:7] * self.w_max
        h = X[:, 7:] * self.h_max
        tau = U * self.tau_max
        qv, qs = q[:, :3], q[:, 3:4]
        out = np.empty_like(X)
        out[:, :3] = 0.5 * (qs * w + np.cross(qv, w))
        out[:, 3] = -0.5 * np.einsum("ij,ij->i", qv, w)
        H = w @ self.J.T + h @ self.L.T
        torque = np.cross(H, w) - tau @ self.L.T
        if self.has_disturbance:
            T = np.zeros(X.shape[0]) if T is None else T
            torque = torque + np.array([self.plant.d(t) for t in T])
        out[:, 4:7] = (torque @ self.J_inv.T) / self.w_max
        out[:, 7:] = tau / self.h_max
        return out

    def jac_A(self, x):
        """Analytic state Jacobian of the scaled dynamics at ``x``."""
        return self.jac_A_batch(x[None, :])[0]

    def jac_A_batch(self, X):
        K = X.shape[0]
        n_x = self.n_x
        q = X[:, :4]
        w = X[:, 4:7] * self.w_max
        h = X[:, 7:] * self.h_max
        qv, qs = q[:, :3], q[:, 3]
        A = np.zeros((K, n_x, n_x))
        wx = _cross_batch(w)
        # kinematics w.r.t. q
        A[:, :3, :3] = -0.5 * wx
        A[:, :3, 3] = 0.5 * w
        A[:, 3, :3] = -0.5 * w
        # kinematics w.r.t. scaled rates
        A[:, :3, 4:7] = 0.5 * (qs[:, None, None] * np.eye(3) + _cross_batch(qv)) * self.w_max
        A[:, 3, 4:7] = -0.5 * qv * self.w_max
        # rate dynamics
        Jw = w @ self.J.T
        Lh = h @ self.L.T
        D = _cross_batch(Jw) - wx @ self.J + _cross_batch(Lh)
        A[:, 4:7, 4:7] = (self.J_inv @ D) * (self.w_max[None, :] / self.w_max[:, None])
        A[:, 4:7, 7:] = -(self.J_inv @ wx @ self.L) * (self.h_max[None, :] / self.w_max[:, None])
        return A


def _cross_batch(a):
    K = a.shape[0]
    out = np.zeros((K, 3, 3))
    out[:, 0, 1] = -a[:, 2]
    out[:, 0, 2] = a[:, 1]
    out[:, 1, 0] = a[:, 2]
    out[:, 1, 2] = -a[:, 0]
    out[:, 2, 0] = -a[:, 1]
    out[:, 2, 1] = a[:, 0]
    return out


def f_nonlinear(x_scaled, u_scaled, plant: PlantModel, scaling: ScalingSet, t: float = 0.0):
    """Time derivative of the scaled state."""
    x_scaled = np.asarray(x_scaled, dtype=float)
    u_scaled = np.asarray(u_scaled, dtype=float)
    if x_scaled.shape != (state_dim(plant.n_w),) or u_scaled.shape != (plant.n_w,):
        raise InvalidInputError("state/control dimensions do not match the wheel count")
    return ScaledModel(plant, scaling).f(x_scaled, u_scaled, t)


def _as_model(plant, scaling):
    if isinstance(plant, ScaledModel):
        return plant
    return ScaledModel(plant, scaling)


def propagate(x0, u_a, u_b, t_a, t_b, plant, scaling=None,
              settings: IntegratorSettings = TIGHT, dense_output=False):
    """
    Integrate the nonlinear dynamics over ``[t_a, t_b]`` under a first-order-hold
    control ramping linearly from ``u_a`` to ``u_b``.

    Returns the scaled state at ``t_b``; with ``dense_output=True`` returns
    ``(x_b, sol)`` where ``sol(t)`` evaluates the continuous solution.
    """
    if not t_b > t_a:
        raise InvalidInputError("t_b must be greater than t_a")
    model = _as_model(plant, scaling)
    u_a = np.asarray(u_a, dtype=float)
    du = (np.asarray(u_b, dtype=float) - u_a) / (t_b - t_a)
    f = model.f

    def rhs(t, x):
        return f(x, u_a + (t - t_a) * du, t)

    sol = solve_ivp(rhs, (t_a, t_b), np.asarray(x0, dtype=float), method=settings.method,
                    rtol=settings.rel_tol, atol=settings.abs_tol,
                    max_step=settings.max_step, dense_output=dense_output)
    if sol.status != 0:
        raise IntegrationError(sol.message, float(sol.t[-1]))
    x_b = sol.y[:, -1]
    if dense_output:
        return x_b, sol.sol
    return x_b


def propagate_nodes(x0, times, u_nodes, plant, scaling=None,
                    settings: IntegratorSettings = TIGHT):
    """Propagate node to node with first-order-hold controls; returns (N, n_x) states."""
    model = _as_model(plant, scaling)
    times = np.asarray(times, dtype=float)
    u_nodes = np.asarray(u_nodes, dtype=float)
    X = np.empty((times.size, model.n_x))
    X[0] = x0
    for k in range(times.size - 1):
        X[k + 1] = propagate(X[k], u_nodes[k], u_nodes[k + 1], times[k], times[k + 1],
                             model, settings=settings)
    return X


def propagate_dense(x0, times, u_nodes, plant, scaling=None,
                    settings: IntegratorSettings = TIGHT, supersample: int = 10):
    """
    Node-to-node propagation that also samples ``supersample`` points per interval.

    Returns ``(t_dense, X_dense)`` including the nodes themselves.
    """
    model = _as_model(plant, scaling)
    times = np.asarray(times, dtype=float)
    u_nodes = np.asarray(u_nodes, dtype=float)
    ts = [times[:1]]
    xs = [np.asarray(x0, dtype=float)[None, :]]
    x = np.asarray(x0, dtype=float)
    for k in range(times.size - 1):
        x, sol = propagate(x, u_nodes[k], u_nodes[k + 1], times[k], times[k + 1],
                           model, settings=settings, dense_output=True)
        tk = np.linspace(times[k], times[k + 1], supersample + 1)[1:]
        ts.append(tk)
        xs.append(sol(tk).T)
        xs[-1][-1] = x
    return np.concatenate(ts), np.vstack(xs)


def inertial_angular_momentum(x_scaled, plant: PlantModel, scaling: ScalingSet):
    """Total angular momentum ``J w + L h`` expressed in inertial axes (N m s)."""
    from .attitude import body_to_inertial
    x_scaled = np.asarray(x_scaled, dtype=float)
    w = x_scaled[4:7] * scaling.omega_max
    h = x_scaled[7:] * scaling.h_max
    H_body = plant.J @ w + plant.L @ h
    q = x_scaled[:4] / np.linalg.norm(x_scaled[:4])
    return body_to_inertial(q, H_body)
