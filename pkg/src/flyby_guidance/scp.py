"""
Sequential convex programming loop.

Each outer iteration discretizes the dynamics around the current reference,
then solves the convex subproblem repeatedly, shrinking the trust region
after every rejected solution. A solution is accepted when its nonlinear
re-propagation stays within ``epsilon_max`` of the convex prediction; the
re-propagated states then become the next reference.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .attitude import InvalidInputError, Trajectory
from .conic import (assemble_static, set_trust_region, update_linearization, verify_solution)
from .discretization import DiscretizationError, discretize_trajectory
from .dynamics import LOOSE, TIGHT, IntegrationError, IntegratorSettings, ScaledModel, propagate_nodes
from .linearization import CARD_EPSILON, CardinalityWeights
from .scenario import OutageMetrics, Scenario, comet_angles, evaluate_outages
from .solvers import INACCURATE, OPTIMAL, SolverBackend, get_backend

log = logging.getLogger(__name__)

CONVERGED = "converged"
ITER_LIMIT = "iter-limit"
REJECTION_LIMIT = "rejection-limit"
TIME_LIMIT = "time-limit"
TERMINATIONS = (CONVERGED, ITER_LIMIT, REJECTION_LIMIT, TIME_LIMIT)


@dataclass(frozen=True)
class ScpConfig:
    """Algorithm settings; radii are in scaled units."""

    n_iter: int = 30
    n_sol: int = 20
    delta_xmax0: float = 0.1
    delta_umax0: float = 0.1
    kappa_plus: float = 2.0
    kappa_minus: float = 0.25
    epsilon_max: float = 0.5
    delta_convergence: float = 1e-2
    time_limit: Optional[float] = None
    beta: Optional[tuple] = None
    card_epsilon: float = CARD_EPSILON
    linearization: IntegratorSettings = LOOSE
    integration: IntegratorSettings = TIGHT
    inaccurate_tol: float = 1e-5

    def __post_init__(self):
        if self.n_iter < 1 or self.n_sol < 1:
            raise InvalidInputError("n_iter and n_sol must be at least 1")
        for name in ("delta_xmax0", "delta_umax0", "epsilon_max", "delta_convergence",
                     "card_epsilon"):
            if not getattr(self, name) > 0.0:
                raise InvalidInputError(f"{name} must be positive")
        if self.kappa_plus < 1.0:
            raise InvalidInputError("kappa_plus must be >= 1")
        if not 0.0 < self.kappa_minus <= 1.0:
            raise InvalidInputError("kappa_minus must lie in (0, 1]")
        if self.time_limit is not None and self.time_limit <= 0.0:
            raise InvalidInputError("time_limit must be positive")
        if self.beta is not None and len(self.beta) != 6:
            raise InvalidInputError("beta must have 6 entries")


@dataclass
class IterationRecord:
    iteration: int
    attempt: int
    status: str
    epsilon_x: float
    objective: float
    delta_xmax: float
    delta_umax: float
    accepted: bool
    solve_time: float
    deviation_sum: float = float("nan")


@dataclass
class ScpState:
    reference: Trajectory
    gamma_bar: np.ndarray
    zeta_bar: np.ndarray
    delta_xmax: float
    delta_umax: float
    iteration: int = 0
    rejections: int = 0
    history: list = field(default_factory=list)


@dataclass
class GuidanceSolution:
    """
    Result of one guidance run.

    ``trajectory`` is the last accepted reference: nonlinear-propagated states
    with the first-order-hold controls that produced them. Slacks come from
    the convex solution that was accepted last (``None`` if none was).
    """

    trajectory: Trajectory
    termination: str
    iterations: int
    history: list
    outages: OutageMetrics
    gamma: Optional[np.ndarray] = None
    zeta: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    epsilon_x: float = float("nan")
    timings: dict = field(default_factory=lambda: {"linearization": [], "optimization": [],
                                                   "integration": []})
    angle_history: list = field(default_factory=list)
    backend: str = ""

    @property
    def converged(self) -> bool:
        return self.termination == CONVERGED

    def mean_timings_ms(self) -> dict:
        return {k: (1e3 * float(np.mean(v)) if v else float("nan"))
                for k, v in self.timings.items()}


def feasibility_metric(x_convex, x_true) -> float:
    """Sum over nodes of the Euclidean gap between convex and propagated states."""
    x_convex = np.asarray(x_convex, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x_convex.shape != x_true.shape:
        raise InvalidInputError("state trajectories differ in shape")
    return float(np.linalg.norm(x_convex - x_true, axis=1).sum())


def trust_region_update(epsilon_x: float, radii, config: ScpConfig):
    """Contract the radii and reject when ``epsilon_x > epsilon_max``; otherwise expand and accept."""
    dx, du = radii
    if dx <= 0.0 or du <= 0.0:
        raise InvalidInputError("trust-region radii must be positive")
    if epsilon_x > config.epsilon_max or not np.isfinite(epsilon_x):
        return (dx * config.kappa_minus, du * config.kappa_minus), False
    return (dx * config.kappa_plus, du * config.kappa_plus), True


def initial_reference(scenario: Scenario, settings: IntegratorSettings = TIGHT) -> Trajectory:
    """Reference produced by propagating the initial state under zero control."""
    U = np.zeros((scenario.N, scenario.n_w))
    X = propagate_nodes(scenario.x_init_scaled, scenario.times, U, scenario.plant,
                        scenario.scaling, settings)
    return Trajectory(scenario.times, X, U)


def run_scp(scenario: Scenario, config: Optional[ScpConfig] = None,
            backend: Optional[SolverBackend] = None) -> GuidanceSolution:
    """Run the sequential convex programming loop on ``scenario``."""
    config = config or ScpConfig()
    backend = backend or get_backend()
    t_start = time.perf_counter()
    model = ScaledModel(scenario.plant, scenario.scaling)
    beta = np.asarray(config.beta if config.beta is not None else scenario.beta, dtype=float)
    problem = assemble_static(scenario)
    lay = problem.layout

    state = ScpState(initial_reference(scenario, config.integration),
                     np.ones(scenario.N), np.ones(scenario.N),
                     config.delta_xmax0, config.delta_umax0)
    timings = {"linearization": [], "optimization": [], "integration": []}
    angle_history = [comet_angles(scenario, state.reference.x[:, :4])]
    slacks = {}
    eps_accepted = float("nan")
    warm = None

    def timed_out():
        return (config.time_limit is not None
                and time.perf_counter() - t_start > config.time_limit)

    def finish(reason):
        log.info("scp finished: %s after %d iterations", reason, state.iteration)
        return GuidanceSolution(
            trajectory=state.reference, termination=reason, iterations=state.iteration,
            history=state.history, outages=evaluate_outages(state.reference, scenario),
            gamma=slacks.get("gamma"), zeta=slacks.get("zeta"), eta=slacks.get("eta"),
            rho=slacks.get("rho"), epsilon_x=eps_accepted, timings=timings,
            angle_history=angle_history, backend=backend.identity())

    for i in range(1, config.n_iter + 1):
        state.iteration = i
        ref = state.reference
        t0 = time.perf_counter()
        try:
            discrete = discretize_trajectory(ref, model, settings=config.linearization)
        except (DiscretizationError, IntegrationError) as exc:
            log.warning("discretization failed at iteration %d: %s", i, exc)
            return finish(REJECTION_LIMIT)
        weights = CardinalityWeights.from_previous(state.gamma_bar, state.zeta_bar,
                                                   config.card_epsilon)
        update_linearization(problem, discrete, ref, weights, beta)
        timings["linearization"].append(time.perf_counter() - t0)

        accepted = None
        for j in range(1, config.n_sol + 1):
            set_trust_region(problem, state.delta_xmax, state.delta_umax)
            result = backend.solve(problem, warm_start=warm)
            timings["optimization"].append(result.solve_time)
            usable = result.status == OPTIMAL
            if result.status == INACCURATE and np.all(np.isfinite(result.primal)):
                usable = verify_solution(problem, result.primal).ok(config.inaccurate_tol)
            eps = float("inf")
            sol = None
            if usable:
                warm = result.primal
                sol = lay.unpack(result.primal)
                t0 = time.perf_counter()
                try:
                    x_true = propagate_nodes(scenario.x_init_scaled, scenario.times, sol["u"],
                                             model, settings=config.integration)
                    eps = feasibility_metric(sol["x"], x_true)
                except IntegrationError as exc:
                    log.warning("truth propagation failed: %s", exc)
                timings["integration"].append(time.perf_counter() - t0)
            radii, ok = trust_region_update(eps, (state.delta_xmax, state.delta_umax), config)
            dev = float(np.sum(sol["delta_x"] + sol["delta_u"])) if sol is not None else float("nan")
            state.history.append(IterationRecord(
                i, j, result.status, eps, result.objective, state.delta_xmax, state.delta_umax,
                ok, result.solve_time, dev))
            log.debug("iter %d.%d status=%s eps=%.3g obj=%.4g radii=(%.3g, %.3g) %s", i, j,
                      result.status, eps, result.objective, state.delta_xmax, state.delta_umax,
                      "accept" if ok else "reject")
            state.delta_xmax, state.delta_umax = radii
            if ok:
                state.reference = Trajectory(scenario.times, x_true, sol["u"])
                state.gamma_bar, state.zeta_bar = sol["gamma"], sol["zeta"]
                slacks = {k: sol[k] for k in ("gamma", "zeta", "eta", "rho")}
                eps_accepted = eps
                angle_history.append(comet_angles(scenario, x_true[:, :4]))
                accepted = sol
                break
            state.rejections += 1
            if timed_out():
                return finish(TIME_LIMIT)
            if j == config.n_sol:
                return finish(REJECTION_LIMIT)

        if np.sum(accepted["delta_u"] + accepted["delta_x"]) <= config.delta_convergence:
            return finish(CONVERGED)
        if timed_out():
            return finish(TIME_LIMIT)
    return finish(ITER_LIMIT)
