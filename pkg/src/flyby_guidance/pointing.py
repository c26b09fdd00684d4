"""
Pointing constraints as second-order cones.

For an inertial unit target ``r`` and body unit boresight ``nu`` the cosine of
the angle between them is the quadratic form ``cos(theta) = -q^T P q``.
Since ``I + P`` and ``I - P`` are positive semidefinite, keep-in and keep-out
conditions become norm bounds on ``N q`` and ``M q`` with ``N^T N = I + P`` and
``M^T M = I - P``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attitude import InvalidInputError, cross_matrix, rotate_by_quaternion

_EIG_CLAMP = 1e-9


class FactorizationError(ArithmeticError):
    """A matrix expected to be positive semidefinite is not."""


def _check_unit(v, name, tol=1e-9):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > tol:
        raise InvalidInputError(f"{name} must be a unit 3-vector")
    return v


def build_P(r, nu):
    """
    Quadratic form matrix with ``cos(theta) = -q^T P(r, nu) q``.

    Parameters
    ----------
    r : array_like, shape (3,)
        Inertial unit vector to the target.
    nu : array_like, shape (3,)
        Body-frame unit vector of the instrument.
    """
    r = _check_unit(r, "r")
    nu = _check_unit(nu, "nu")
    left = np.zeros((4, 4))
    left[:3, :3] = cross_matrix(r)
    left[:3, 3] = r
    left[3, :3] = -r
    right = np.zeros((4, 4))
    right[:3, :3] = -cross_matrix(nu)
    right[:3, 3] = nu
    right[3, :3] = -nu
    return left @ right


def factor_cone(P, sign):
    """
    Factor ``I + P`` (``sign='+'``) or ``I - P`` (``sign='-'``) as ``F^T F``.

    The factor is a full 4x4 matrix; eigenvalues under ``1e-9`` in magnitude are
    clamped to zero so the rank-2 structure is exact.
    """
    if sign not in ("+", "-"):
        raise InvalidInputError("sign must be '+' or '-'")
    P = np.asarray(P, dtype=float)
    S = np.eye(4) + P if sign == "+" else np.eye(4) - P
    S = 0.5 * (S + S.T)
    lam, V = np.linalg.eigh(S)
    if lam.min() < -_EIG_CLAMP:
        raise FactorizationError(f"I {sign} P has eigenvalue {lam.min():.3e} < 0")
    lam = np.where(lam < _EIG_CLAMP, 0.0, lam)
    return np.sqrt(lam)[:, None] * V.T


@dataclass(frozen=True)
class ConeFactor:
    """
    Norm bound ``||matrix @ q|| <= rhs`` encoding a pointing condition.

    ``kind`` is ``"keep-in"`` (angle below the limit, uses N) or ``"keep-out"``
    (angle above the limit, uses M).
    """

    kind: str
    matrix: np.ndarray
    rhs: float
    target_time: float = 0.0

    def value(self, q):
        return float(np.linalg.norm(self.matrix @ q))

    def satisfied(self, q, tol=0.0) -> bool:
        return self.value(q) <= self.rhs + tol


def keep_in_cone(r, nu, theta_max, target_time=0.0) -> ConeFactor:
    N = factor_cone(build_P(r, nu), "+")
    return ConeFactor("keep-in", N, float(np.sqrt(1.0 - np.cos(theta_max))), target_time)


def keep_out_cone(r, nu, theta_min, target_time=0.0) -> ConeFactor:
    M = factor_cone(build_P(r, nu), "-")
    return ConeFactor("keep-out", M, float(np.sqrt(1.0 + np.cos(theta_min))), target_time)


def pointing_angle(q, r_inertial, v_body):
    """Angle in radians between the boresight and an inertial direction."""
    c = rotate_by_quaternion(q, r_inertial) @ np.asarray(v_body, dtype=float)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def pointing_angles(Q, r_inertial, v_body):
    """
    Vectorised :func:`pointing_angle` via the quadratic form.

    ``Q`` has shape (K, 4) and ``r_inertial`` shape (K, 3) or (3,).
    Quaternions are normalised first so that slightly non-unit iterates still
    give a well defined angle.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    R = np.broadcast_to(np.asarray(r_inertial, dtype=float), (Q.shape[0], 3))
    cos = np.array([-(q @ build_P(r, v_body) @ q) for q, r in zip(Q, R)])
    return np.arccos(np.clip(cos, -1.0, 1.0))
