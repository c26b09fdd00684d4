"""Jacobians of the scaled dynamics and reweighted-l1 weights for the outage terms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .attitude import InvalidInputError, ScalingSet
from .dynamics import PlantModel, ScaledModel

#: regulariser of the reweighted-l1 cardinality surrogate
CARD_EPSILON = 1e-3


def jacobian_A(x_ref, plant: PlantModel, scaling: ScalingSet):
    """State Jacobian ``df/dx`` of the scaled dynamics at ``x_ref``."""
    x_ref = np.asarray(x_ref, dtype=float)
    if not np.all(np.isfinite(x_ref)):
        raise InvalidInputError("reference state must be finite")
    return ScaledModel(plant, scaling).jac_A(x_ref)


def jacobian_B(plant: PlantModel, scaling: ScalingSet):
    """Control Jacobian ``df/du``; constant because the torque enters linearly."""
    return ScaledModel(plant, scaling).B.copy()


def affine_term(x_ref, u_ref, plant: PlantModel, scaling: ScalingSet):
    """
    Offset ``s`` making ``A x + B u + s`` the first-order expansion of ``f``
    about ``(x_ref, u_ref)``, i.e. ``s = f(x_ref, u_ref) - A x_ref - B u_ref``.
    """
    model = ScaledModel(plant, scaling)
    x_ref = np.asarray(x_ref, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    return model.f(x_ref, u_ref) - model.jac_A(x_ref) @ x_ref - model.B @ u_ref


@dataclass(frozen=True)
class LtvMatrices:
    """Linear time-varying model ``x_dot = A(t) x + B u + s(t)`` along a reference."""

    A_of_t: Callable[[float], np.ndarray]
    B: np.ndarray
    s_of_t: Callable[[float], np.ndarray]


def linearize(x_ref_of_t, u_ref_of_t, plant: PlantModel, scaling: ScalingSet) -> LtvMatrices:
    """Build the LTV model around continuous reference signals ``x_ref(t)``, ``u_ref(t)``."""
    model = ScaledModel(plant, scaling)

    def A_of_t(t):
        return model.jac_A(np.asarray(x_ref_of_t(t), dtype=float))

    def s_of_t(t):
        x = np.asarray(x_ref_of_t(t), dtype=float)
        u = np.asarray(u_ref_of_t(t), dtype=float)
        return model.f(x, u, t) - model.jac_A(x) @ x - model.B @ u

    return LtvMatrices(A_of_t, model.B.copy(), s_of_t)


def card_weight(value_prev, epsilon=CARD_EPSILON):
    """Reweighted-l1 weight ``1 / (epsilon + value_prev)``; works elementwise."""
    value_prev = np.asarray(value_prev, dtype=float)
    if np.any(value_prev < 0.0):
        raise InvalidInputError("previous slack values must be nonnegative")
    w = 1.0 / (epsilon + value_prev)
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class CardinalityWeights:
    """Per-node weights for the visual (gamma) and infrared (zeta) outage slacks."""

    gamma_weights: np.ndarray
    zeta_weights: np.ndarray
    epsilon: float = CARD_EPSILON

    @classmethod
    def from_previous(cls, gamma_prev, zeta_prev, epsilon=CARD_EPSILON):
        # solver output may carry tiny negative round-off
        g = np.maximum(np.asarray(gamma_prev, dtype=float), 0.0)
        z = np.maximum(np.asarray(zeta_prev, dtype=float), 0.0)
        return cls(card_weight(g, epsilon), card_weight(z, epsilon), epsilon)

    @classmethod
    def initial(cls, N, epsilon=CARD_EPSILON):
        """Weights for the first iteration, where previous slacks are taken as 1."""
        return cls.from_previous(np.ones(N), np.ones(N), epsilon)
