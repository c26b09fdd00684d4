"""
Quaternion algebra, unit scaling and the state containers shared by the
rest of the package.

Quaternions are stored vector-first, ``[v1, v2, v3, s]``, and rotate
inertial coordinates into the body frame::

    [r_B; 0] = q* (x) [r_I; 0] (x) q

which is the convention consistent with the kinematics
``q_dot = 0.5 * q (x) [omega; 0]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY_QUATERNION = np.array([0.0, 0.0, 0.0, 1.0])


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


def quat_multiply(p, q):
    """Hamilton product ``p (x) q`` for vector-first quaternions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pv, ps = p[:3], p[3]
    qv, qs = q[:3], q[3]
    out = np.empty(4)
    out[:3] = ps * qv + qs * pv + np.cross(pv, qv)
    out[3] = ps * qs - pv @ qv
    return out


def quat_conjugate(q):
    q = np.asarray(q, dtype=float)
    return np.concatenate([-q[:3], q[3:]])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise InvalidInputError("cannot normalize a zero quaternion")
    return q / n


def cross_matrix(a):
    """Skew-symmetric matrix ``[a]x`` such that ``[a]x @ b == cross(a, b)``."""
    a1, a2, a3 = np.asarray(a, dtype=float)
    return np.array([[0.0, -a3, a2],
                     [a3, 0.0, -a1],
                     [-a2, a1, 0.0]])


def _check_unit_quaternion(q, tol=1e-6):
    n = np.linalg.norm(q)
    if abs(n - 1.0) > tol:
        raise InvalidInputError(f"quaternion norm {n:.9f} is not within {tol} of 1")


def rotate_by_quaternion(q, r):
    """
    Express the inertial vector ``r`` in body axes.

    Parameters
    ----------
    q : array_like, shape (4,)
        Unit quaternion rotating inertial to body coordinates.
    r : array_like, shape (3,)
        Inertial-frame coordinates.

    Returns
    -------
    numpy.ndarray, shape (3,)
    """
    q = np.asarray(q, dtype=float)
    _check_unit_quaternion(q)
    r = np.asarray(r, dtype=float)
    qv, qs = q[:3], q[3]
    # q* (x) [r; 0] (x) q, expanded
    return (qs * qs - qv @ qv) * r + 2.0 * (qv @ r) * qv - 2.0 * qs * np.cross(qv, r)


def body_to_inertial(q, v):
    """Inverse of :func:`rotate_by_quaternion`."""
    return rotate_by_quaternion(quat_conjugate(q), v)


@dataclass(frozen=True)
class ScalingSet:
    """Maximum expected magnitudes used to normalise rates, momenta and torques.

    ``omega_max`` is in rad/s, ``h_max`` in N m s and ``tau_max`` in N m.
    """

    omega_max: np.ndarray
    h_max: np.ndarray
    tau_max: np.ndarray

    def __post_init__(self):
        for name in ("omega_max", "h_max", "tau_max"):
            val = np.array(getattr(self, name), dtype=float).ravel()
            if np.any(val <= 0.0) or not np.all(np.isfinite(val)):
                raise InvalidInputError(f"{name} entries must be finite and positive")
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        if self.omega_max.size != 3:
            raise InvalidInputError("omega_max must have 3 entries")
        if self.h_max.size != self.tau_max.size:
            raise InvalidInputError("h_max and tau_max must have one entry per wheel")

    @property
    def n_w(self) -> int:
        return self.h_max.size

    @property
    def W_omega(self):
        return np.diag(1.0 / self.omega_max)

    @property
    def W_h(self):
        return np.diag(1.0 / self.h_max)

    @property
    def W_tau(self):
        return np.diag(1.0 / self.tau_max)

    def without_wheel(self, index: int) -> "ScalingSet":
        """Drop the limits of wheel ``index`` (zero based)."""
        if not 0 <= index < self.n_w:
            raise InvalidInputError(f"wheel index {index} out of range for {self.n_w} wheels")
        keep = [i for i in range(self.n_w) if i != index]
        return ScalingSet(self.omega_max, self.h_max[keep], self.tau_max[keep])


@dataclass(frozen=True)
class SpacecraftState:
    """Physical state: attitude quaternion, body rates (rad/s), wheel momenta (N m s)."""

    q: np.ndarray
    omega: np.ndarray
    h_wheels: np.ndarray

    def __post_init__(self):
        for name in ("q", "omega", "h_wheels"):
            val = np.array(getattr(self, name), dtype=float).ravel()
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        if self.q.size != 4 or self.omega.size != 3:
            raise InvalidInputError("state needs a 4-element quaternion and 3 body rates")

    @property
    def n_w(self) -> int:
        return self.h_wheels.size


@dataclass(frozen=True)
class ControlInput:
    """Wheel motor torques in N m."""

    tau: np.ndarray

    def __post_init__(self):
        val = np.array(self.tau, dtype=float).ravel()
        val.setflags(write=False)
        object.__setattr__(self, "tau", val)


def state_dim(n_w: int) -> int:
    return 7 + n_w


def scale_state(state: SpacecraftState, scaling: ScalingSet):
    """Pack a physical state into the scaled vector ``[q; W_w w; W_h h]``."""
    if state.n_w != scaling.n_w:
        raise InvalidInputError(
            f"state has {state.n_w} wheel momenta, scaling expects {scaling.n_w}")
    return np.concatenate([state.q, state.omega / scaling.omega_max,
                           state.h_wheels / scaling.h_max])


def unscale_state(x, scaling: ScalingSet) -> SpacecraftState:
    x = np.asarray(x, dtype=float)
    if x.shape != (state_dim(scaling.n_w),):
        raise InvalidInputError(
            f"scaled state has shape {x.shape}, expected ({state_dim(scaling.n_w)},)")
    return SpacecraftState(q=x[:4], omega=x[4:7] * scaling.omega_max,
                           h_wheels=x[7:] * scaling.h_max)


def scale_control(control: ControlInput, scaling: ScalingSet):
    if control.tau.size != scaling.n_w:
        raise InvalidInputError("control dimension does not match wheel count")
    return control.tau / scaling.tau_max


def unscale_control(u, scaling: ScalingSet) -> ControlInput:
    u = np.asarray(u, dtype=float)
    if u.shape != (scaling.n_w,):
        raise InvalidInputError("scaled control dimension does not match wheel count")
    return ControlInput(u * scaling.tau_max)


@dataclass(frozen=True)
class Trajectory:
    """
    Node-sampled trajectory in scaled units.

    Attributes
    ----------
    times : ndarray, shape (N,)
        Strictly increasing sample times starting at 0 s.
    x : ndarray, shape (N, 7 + n_w)
        Scaled states.
    u : ndarray, shape (N, n_w)
        Scaled controls, linearly interpolated between nodes.
    """

    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        x = np.array(self.x, dtype=float)
        u = np.array(self.u, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise InvalidInputError("a trajectory needs at least two nodes")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0.0):
            raise InvalidInputError("times must start at 0 and be strictly increasing")
        if x.shape[0] != times.size or u.shape[0] != times.size:
            raise InvalidInputError("states and controls must have one row per node")
        if x.shape[1] != 7 + u.shape[1]:
            raise InvalidInputError("state width must equal 7 + control width")
        for name, val in (("times", times), ("x", x), ("u", u)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def N(self) -> int:
        return self.times.size

    @property
    def t_f(self) -> float:
        return float(self.times[-1])

    @property
    def n_w(self) -> int:
        return self.u.shape[1]

    def state(self, k: int, scaling: ScalingSet) -> SpacecraftState:
        return unscale_state(self.x[k], scaling)

    def physical(self, scaling: ScalingSet):
        """Return ``(q, omega, h, tau)`` arrays in physical units."""
        return (self.x[:, :4].copy(), self.x[:, 4:7] * scaling.omega_max,
                self.x[:, 7:] * scaling.h_max, self.u * scaling.tau_max)
