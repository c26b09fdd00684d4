"""
Exact first-order-hold discretization of the linearized dynamics.

On each interval ``[t_k, t_k+1]`` the state transition matrix ``Phi``, the
three input/offset quadratures and the nonlinear reference itself are
integrated together as one augmented ODE on normalised time
``tau = (t - t_k) / (t_k+1 - t_k)``::

    x_k+1 = A_k x_k + B-_k u_k + B+_k u_k+1 + s_k

with ``A_k = Phi(1)``, ``B-_k = Phi(1) int Phi^-1 (1 - tau) B``,
``B+_k = Phi(1) int Phi^-1 tau B`` and ``s_k = Phi(1) int Phi^-1 s``.
The inverse of ``Phi`` is applied through an LU solve at every right-hand
side evaluation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .attitude import InvalidInputError, Trajectory
from .dynamics import LOOSE, IntegrationError, IntegratorSettings, ScaledModel


class DiscretizationError(RuntimeError):
    def __init__(self, message, interval):
        super().__init__(f"interval {interval}: {message}")
        self.interval = interval


def foh_interpolate(u_k, u_k1, t, t_k, t_k1):
    """First-order-hold control at ``t`` in ``(t_k, t_k1]``."""
    if not t_k < t <= t_k1:
        raise InvalidInputError(f"t = {t} outside the interval ({t_k}, {t_k1}]")
    lam_minus = (t_k1 - t) / (t_k1 - t_k)
    return lam_minus * np.asarray(u_k, dtype=float) + (1.0 - lam_minus) * np.asarray(u_k1, dtype=float)


@dataclass(frozen=True)
class DiscreteLTV:
    """
    Per-interval discrete dynamics, stacked along the first axis.

    ``x_end`` holds the nonlinear reference propagated across each interval,
    which is what the discrete map reproduces when fed the reference nodes.
    """

    A: np.ndarray
    B_minus: np.ndarray
    B_plus: np.ndarray
    s: np.ndarray
    x_end: np.ndarray
    times: np.ndarray

    @property
    def n_intervals(self) -> int:
        return self.A.shape[0]

    def step(self, k, x_k, u_k, u_k1):
        return self.A[k] @ x_k + self.B_minus[k] @ u_k + self.B_plus[k] @ u_k1 + self.s[k]

    def apply(self, X, U):
        """Map every node ``x_k`` to its successor prediction; returns (K, n_x)."""
        X = np.asarray(X, dtype=float)
        U = np.asarray(U, dtype=float)
        return (np.einsum("kij,kj->ki", self.A, X[:-1])
                + np.einsum("kij,kj->ki", self.B_minus, U[:-1])
                + np.einsum("kij,kj->ki", self.B_plus, U[1:]) + self.s)


def _integrate_batch(model: ScaledModel, X0, U0, U1, t0, dt, settings):
    """Integrate the augmented ODE for a batch of intervals at once."""
    K = X0.shape[0]
    n, m = model.n_x, model.n_w
    D = n + n * n + 2 * n * m + n
    B = model.B
    eye = np.eye(n)
    dt_col = dt[:, None]
    B_rep = np.broadcast_to(B, (K, n, m))

    def rhs(tau, z):
        Z = z.reshape(K, D)
        X = Z[:, :n]
        Phi = Z[:, n:n + n * n].reshape(K, n, n)
        U = (1.0 - tau) * U0 + tau * U1
        F = model.f_batch(X, U, t0 + tau * dt)
        A = model.jac_A_batch(X)
        S = F - np.einsum("kij,kj->ki", A, X) - U @ B.T
        cols = np.concatenate([(1.0 - tau) * B_rep, tau * B_rep, S[:, :, None]], axis=2)
        Y = np.linalg.solve(Phi, cols)
        out = np.empty_like(Z)
        out[:, :n] = F
        out[:, n:n + n * n] = (A @ Phi).reshape(K, n * n)
        out[:, n + n * n:n + n * n + n * m] = Y[:, :, :m].reshape(K, n * m)
        out[:, n + n * n + n * m:n + n * n + 2 * n * m] = Y[:, :, m:2 * m].reshape(K, n * m)
        out[:, -n:] = Y[:, :, -1]
        out *= dt_col
        return out.ravel()

    Z0 = np.zeros((K, D))
    Z0[:, :n] = X0
    Z0[:, n:n + n * n] = eye.ravel()
    sol = solve_ivp(rhs, (0.0, 1.0), Z0.ravel(), method=settings.method,
                    rtol=settings.rel_tol, atol=settings.abs_tol,
                    max_step=settings.max_step)
    if sol.status != 0:
        raise IntegrationError(sol.message, float(sol.t[-1]))
    Z = sol.y[:, -1].reshape(K, D)
    x_end = Z[:, :n]
    Phi = Z[:, n:n + n * n].reshape(K, n, n)
    Im = Z[:, n + n * n:n + n * n + n * m].reshape(K, n, m)
    Ip = Z[:, n + n * n + n * m:n + n * n + 2 * n * m].reshape(K, n, m)
    Is = Z[:, -n:]
    return Phi, Phi @ Im, Phi @ Ip, np.einsum("kij,kj->ki", Phi, Is), x_end


def discretize_interval(x_bar_k, u_bar_k, u_bar_k1, t_k, t_k1, plant, scaling=None,
                        settings: IntegratorSettings = LOOSE):
    """
    Discrete matrices of one interval around the reference ``x_bar_k``, ``u_bar``.

    Returns
    -------
    A_k, B_minus_k, B_plus_k, s_k : ndarray
    """
    model = plant if isinstance(plant, ScaledModel) else ScaledModel(plant, scaling)
    x_bar_k = np.asarray(x_bar_k, dtype=float)
    if not (np.all(np.isfinite(x_bar_k)) and np.all(np.isfinite(u_bar_k))
            and np.all(np.isfinite(u_bar_k1))):
        raise InvalidInputError("reference node values must be finite")
    if not t_k1 > t_k:
        raise InvalidInputError("interval end must follow its start")
    A, Bm, Bp, s, _ = _integrate_batch(
        model, x_bar_k[None, :], np.asarray(u_bar_k, dtype=float)[None, :],
        np.asarray(u_bar_k1, dtype=float)[None, :], np.array([float(t_k)]),
        np.array([float(t_k1 - t_k)]), settings)
    if abs(np.linalg.det(A[0])) < 1e-300:
        raise np.linalg.LinAlgError("singular state transition matrix")
    return A[0], Bm[0], Bp[0], s[0]


def discretize_trajectory(reference: Trajectory, plant, scaling=None,
                          settings: IntegratorSettings = LOOSE, mode="batched",
                          workers=None) -> DiscreteLTV:
    """
    Discretize every interval of ``reference``.

    Parameters
    ----------
    mode : {"batched", "intervals"}
        ``"batched"`` integrates all intervals as one vectorised ODE sharing a
        step size. ``"intervals"`` integrates each interval on its own, which
        makes each result independent of the others; ``workers`` then sets
        the size of a thread pool used for the map.
    """
    model = plant if isinstance(plant, ScaledModel) else ScaledModel(plant, scaling)
    times = reference.times
    X, U = reference.x, reference.u
    if X.shape[1] != model.n_x:
        raise InvalidInputError("reference state width does not match the plant")
    K = times.size - 1
    t0, dt = times[:-1], np.diff(times)

    if mode == "batched":
        try:
            A, Bm, Bp, s, x_end = _integrate_batch(model, X[:-1], U[:-1], U[1:], t0, dt, settings)
        except IntegrationError:
            # locate the offending interval
            return discretize_trajectory(reference, model, settings=settings, mode="intervals")
        return DiscreteLTV(A, Bm, Bp, s, x_end, times.copy())
    if mode != "intervals":
        raise InvalidInputError(f"unknown discretization mode {mode!r}")

    def one(k):
        try:
            return _integrate_batch(model, X[k:k + 1], U[k:k + 1], U[k + 1:k + 2],
                                    t0[k:k + 1], dt[k:k + 1], settings)
        except IntegrationError as exc:
            raise DiscretizationError(str(exc), k) from exc

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(K)))
    else:
        parts = [one(k) for k in range(K)]
    A, Bm, Bp, s, x_end = (np.concatenate([p[i] for p in parts]) for i in range(5))
    return DiscreteLTV(A, Bm, Bp, s, x_end, times.copy())
