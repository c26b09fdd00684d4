"""
Flyby benchmark: geometry, wheel assembly, faults, dust-impact momentum
sampling and science-outage metrics.

Geometry. The comet's position relative to the spacecraft moves on a
straight line, ``p(t) = p0 + v t`` km. With the defaults
``p0 = [7000, -1000, 0]`` and ``v = [-70, 0, 0]`` closest approach happens
at ``t = 100 s`` at 1000 km.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import Delaunay

from .attitude import (InvalidInputError, ScalingSet, SpacecraftState, quat_normalize,
                       scale_state)
from .dynamics import PlantModel, propagate_dense
from .pointing import pointing_angle, pointing_angles

PRESET_NAME = "comet-interceptor"

BENCHMARK_J = np.array([[225.0, 10.0, -10.0],
                        [10.0, 128.0, 10.0],
                        [-10.0, 10.0, 223.0]])
_S6 = np.sqrt(6.0)
BENCHMARK_L = np.sqrt(2.0) / 4.0 * np.array([[1.0, -1.0, -1.0, 1.0],
                                             [_S6, _S6, _S6, _S6],
                                             [1.0, 1.0, -1.0, -1.0]])
BENCHMARK_Q0 = np.array([-0.7, 0.05, -0.05, 0.7])
DEFAULT_BETA = (1.0, 1.0, 0.1, 0.01, 0.1, 0.1)
MOMENTUM_FRACTION = 0.9


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Everything that defines one flyby guidance problem.

    Angles are in radians, momenta in N m s, times in seconds, positions in km.
    ``fault`` is the one-based index of a blocked wheel, already removed from
    ``plant`` and ``scaling``.
    """

    t_f: float
    N: int
    comet_position0: np.ndarray
    comet_velocity: np.ndarray
    r_sun: np.ndarray
    v_body: np.ndarray
    theta_vmax: float
    theta_imax: float
    theta_sun: float
    x_init: SpacecraftState
    plant: PlantModel
    scaling: ScalingSet
    beta: tuple = DEFAULT_BETA
    tightening: float = 0.03
    fault: Optional[int] = None
    name: str = PRESET_NAME
    times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("comet_position0", "comet_velocity", "r_sun", "v_body"):
            val = np.array(getattr(self, name), dtype=float).ravel()
            if val.size != 3:
                raise InvalidInputError(f"{name} must have 3 components")
            object.__setattr__(self, name, val)
        for name in ("r_sun", "v_body"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-9:
                raise InvalidInputError(f"{name} must be a unit vector")
        for name in ("theta_vmax", "theta_imax", "theta_sun"):
            if not 0.0 < getattr(self, name) < np.pi:
                raise InvalidInputError(f"{name} must lie in (0, pi)")
        if self.N < 2 or self.t_f <= 0.0:
            raise InvalidInputError("need N >= 2 and t_f > 0")
        if not 0.0 <= self.tightening < 1.0:
            raise InvalidInputError("tightening must be in [0, 1)")
        if len(self.beta) != 6:
            raise InvalidInputError("beta must have 6 entries")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.plant.n_w != self.scaling.n_w or self.x_init.n_w != self.plant.n_w:
            raise InvalidInputError("plant, scaling and initial state disagree on wheel count")
        object.__setattr__(self, "times", np.linspace(0.0, self.t_f, self.N))

    @property
    def n_w(self) -> int:
        return self.plant.n_w

    @property
    def dt(self) -> float:
        return self.t_f / (self.N - 1)

    @property
    def x_init_scaled(self):
        return scale_state(self.x_init, self.scaling)

    def comet_position(self, t):
        return self.comet_position0 + self.comet_velocity * t

    def comet_direction(self, t):
        p = self.comet_position(t)
        return p / np.linalg.norm(p)

    def sun_direction(self, t=0.0):
        return self.r_sun

    def with_h0(self, h0) -> "Scenario":
        return replace(self, x_init=SpacecraftState(self.x_init.q, self.x_init.omega,
                                                    _check_h0(h0, self.scaling.h_max)))


def comet_direction(t, position0=(7000.0, -1000.0, 0.0), velocity=(-70.0, 0.0, 0.0)):
    """Inertial unit vector from the spacecraft towards the comet at time ``t``."""
    p = np.asarray(position0, dtype=float) + np.asarray(velocity, dtype=float) * t
    return p / np.linalg.norm(p)


def _check_h0(h0, h_max):
    h0 = np.array(h0, dtype=float).ravel()
    if h0.shape != h_max.shape:
        raise InvalidInputError(f"h0 needs {h_max.size} entries, got {h0.size}")
    if np.any(np.abs(h0) > MOMENTUM_FRACTION * h_max * (1.0 + 1e-12)):
        raise InvalidInputError("initial wheel momentum lies outside 0.9 h_max")
    return h0


def build_benchmark(fault: Optional[int] = None, h0=None, **overrides) -> Scenario:
    """
    Comet flyby benchmark with a four-wheel pyramid.

    Parameters
    ----------
    fault : int, optional
        One-based index of a blocked wheel to remove.
    h0 : array_like, optional
        Initial momenta of the active wheels (N m s); zeros by default.
    **overrides
        Any other :class:`Scenario` field.
    """
    plant = PlantModel(BENCHMARK_J, BENCHMARK_L)
    scaling = ScalingSet(omega_max=np.deg2rad([5.0, 5.0, 5.0]), h_max=3.2 * np.ones(4),
                         tau_max=0.172 * np.ones(4))
    if fault is not None:
        if not 1 <= int(fault) <= plant.n_w:
            raise InvalidInputError(f"fault index {fault} outside 1..{plant.n_w}")
        plant = plant.without_wheel(int(fault) - 1)
        scaling = scaling.without_wheel(int(fault) - 1)
    h0 = np.zeros(plant.n_w) if h0 is None else _check_h0(h0, scaling.h_max)
    x_init = SpacecraftState(quat_normalize(BENCHMARK_Q0), np.zeros(3), h0)
    params = dict(
        t_f=200.0, N=40,
        comet_position0=np.array([7000.0, -1000.0, 0.0]),
        comet_velocity=np.array([-70.0, 0.0, 0.0]),
        r_sun=np.array([0.0, 0.0, -1.0]),
        v_body=np.array([1.0, 0.0, 0.0]),
        theta_vmax=np.deg2rad(0.46), theta_imax=np.deg2rad(5.0), theta_sun=np.deg2rad(60.0),
        x_init=x_init, plant=plant, scaling=scaling, fault=fault)
    params.update(overrides)
    return Scenario(**params)


# --- configuration files -------------------------------------------------

_CONFIG_KEYS = {
    "name", "t_f", "N", "comet_position_km", "comet_velocity_km_s", "sun_direction",
    "boresight", "theta_vmax_deg", "theta_imax_deg", "theta_sun_deg", "q0",
    "omega0_rad_s", "h0_Nms", "inertia_kg_m2", "wheel_axes", "tau_max_Nm", "h_max_Nms",
    "omega_max_deg_s", "beta", "tightening", "fault",
}


def preset_config(name=PRESET_NAME) -> dict:
    """Physical-unit configuration of a built-in preset."""
    if name != PRESET_NAME:
        raise KeyError(f"unknown scenario preset {name!r}")
    return {
        "name": PRESET_NAME,
        "t_f": 200.0,
        "N": 40,
        "comet_position_km": [7000.0, -1000.0, 0.0],
        "comet_velocity_km_s": [-70.0, 0.0, 0.0],
        "sun_direction": [0.0, 0.0, -1.0],
        "boresight": [1.0, 0.0, 0.0],
        "theta_vmax_deg": 0.46,
        "theta_imax_deg": 5.0,
        "theta_sun_deg": 60.0,
        "q0": BENCHMARK_Q0.tolist(),
        "omega0_rad_s": [0.0, 0.0, 0.0],
        "h0_Nms": [0.0, 0.0, 0.0, 0.0],
        "inertia_kg_m2": BENCHMARK_J.tolist(),
        "wheel_axes": BENCHMARK_L.tolist(),
        "tau_max_Nm": [0.172] * 4,
        "h_max_Nms": [3.2] * 4,
        "omega_max_deg_s": [5.0, 5.0, 5.0],
        "beta": list(DEFAULT_BETA),
        "tightening": 0.03,
        "fault": None,
    }


def scenario_from_config(config: dict) -> Scenario:
    """
    Build a scenario from a physical-unit mapping; missing keys take preset values.

    ``h0_Nms`` may list either the active wheels or every wheel (the blocked
    wheel's entry is then dropped).
    """
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise InvalidInputError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    cfg = preset_config()
    cfg.update(config)
    L = np.array(cfg["wheel_axes"], dtype=float)
    plant = PlantModel(cfg["inertia_kg_m2"], L)
    scaling = ScalingSet(np.deg2rad(cfg["omega_max_deg_s"]), cfg["h_max_Nms"], cfg["tau_max_Nm"])
    fault = cfg["fault"]
    h0 = np.array(cfg["h0_Nms"], dtype=float)
    if fault is not None:
        fault = int(fault)
        if not 1 <= fault <= plant.n_w:
            raise InvalidInputError(f"fault index {fault} outside 1..{plant.n_w}")
        if h0.size == plant.n_w:
            h0 = np.delete(h0, fault - 1)
        plant = plant.without_wheel(fault - 1)
        scaling = scaling.without_wheel(fault - 1)
    x_init = SpacecraftState(quat_normalize(cfg["q0"]), cfg["omega0_rad_s"],
                             _check_h0(h0, scaling.h_max))
    return Scenario(
        t_f=float(cfg["t_f"]), N=int(cfg["N"]),
        comet_position0=cfg["comet_position_km"], comet_velocity=cfg["comet_velocity_km_s"],
        r_sun=np.asarray(cfg["sun_direction"], float) / np.linalg.norm(cfg["sun_direction"]),
        v_body=np.asarray(cfg["boresight"], float) / np.linalg.norm(cfg["boresight"]),
        theta_vmax=np.deg2rad(cfg["theta_vmax_deg"]), theta_imax=np.deg2rad(cfg["theta_imax_deg"]),
        theta_sun=np.deg2rad(cfg["theta_sun_deg"]), x_init=x_init, plant=plant, scaling=scaling,
        beta=tuple(cfg["beta"]), tightening=float(cfg["tightening"]), fault=fault,
        name=str(cfg["name"]))


def load_scenario(source) -> Scenario:
    """Load a scenario from a JSON file path or a preset name."""
    if str(source) == PRESET_NAME:
        return scenario_from_config({})
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"scenario file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InvalidInputError(f"{path}: scenario must be a JSON object")
    return scenario_from_config(cfg)


def scenario_to_config(scenario: Scenario) -> dict:
    """Inverse of :func:`scenario_from_config` (blocked wheel not re-inserted)."""
    return {
        "name": scenario.name,
        "t_f": scenario.t_f,
        "N": scenario.N,
        "comet_position_km": scenario.comet_position0.tolist(),
        "comet_velocity_km_s": scenario.comet_velocity.tolist(),
        "sun_direction": scenario.r_sun.tolist(),
        "boresight": scenario.v_body.tolist(),
        "theta_vmax_deg": float(np.rad2deg(scenario.theta_vmax)),
        "theta_imax_deg": float(np.rad2deg(scenario.theta_imax)),
        "theta_sun_deg": float(np.rad2deg(scenario.theta_sun)),
        "q0": scenario.x_init.q.tolist(),
        "omega0_rad_s": scenario.x_init.omega.tolist(),
        "h0_Nms": scenario.x_init.h_wheels.tolist(),
        "inertia_kg_m2": scenario.plant.J.tolist(),
        "wheel_axes": scenario.plant.L.tolist(),
        "tau_max_Nm": scenario.scaling.tau_max.tolist(),
        "h_max_Nms": scenario.scaling.h_max.tolist(),
        "omega_max_deg_s": np.rad2deg(scenario.scaling.omega_max).tolist(),
        "beta": list(scenario.beta),
        "tightening": scenario.tightening,
        "fault": None,
    }


# --- dust-impact momentum ------------------------------------------------

class MomentumSampler:
    """
    Uniform draws from ``{h : |h| <= 0.9 h_max}``.

    Draw ``i`` depends only on ``(seed, i)`` so that any subset of runs can be
    regenerated independently of scheduling.
    """

    def __init__(self, h_max, seed: int, fraction: float = MOMENTUM_FRACTION):
        self.bounds = fraction * np.asarray(h_max, dtype=float)
        self.seed = int(seed)

    def generator(self, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.seed, spawn_key=(int(index),))))

    def sample(self, index: int):
        return self.generator(index).uniform(-self.bounds, self.bounds)

    def samples(self, count: int, start: int = 0):
        return np.array([self.sample(i) for i in range(start, start + count)])


# --- momentum envelope ---------------------------------------------------

def momentum_envelope_vertices(L, h_max):
    """Body-frame images ``L h`` of every corner of the wheel momentum box."""
    L = np.asarray(L, dtype=float)
    h_max = np.asarray(h_max, dtype=float)
    n = h_max.size
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
    return (signs * h_max) @ L.T


def in_envelope(points, L, h_max, tol=1e-9):
    """Whether body-frame momenta lie in the achievable set ``{L h : |h| <= h_max}``."""
    hull = Delaunay(momentum_envelope_vertices(L, h_max))
    points = np.atleast_2d(points)
    inside = hull.find_simplex(points, tol=tol) >= 0
    return inside


# --- outage metrics ------------------------------------------------------

@dataclass(frozen=True)
class OutageMetrics:
    visual_outage: float
    infrared_outage: float
    max_pointing_error: float
    visual_nodes: int
    infrared_nodes: int
    angles: np.ndarray = field(repr=False, default=None)


def comet_angles(scenario: Scenario, Q, times=None):
    """Boresight-to-comet angles (rad) for quaternion rows ``Q`` at ``times``."""
    times = scenario.times if times is None else np.asarray(times, dtype=float)
    R = np.array([scenario.comet_direction(t) for t in times])
    return pointing_angles(Q, R, scenario.v_body)


def outages_from_angles(angles, scenario: Scenario) -> OutageMetrics:
    angles = np.asarray(angles, dtype=float)
    nv = int(np.count_nonzero(angles > scenario.theta_vmax))
    ni = int(np.count_nonzero(angles > scenario.theta_imax))
    return OutageMetrics(nv * scenario.dt, ni * scenario.dt, float(angles.max()), nv, ni, angles)


def evaluate_outages(solution, scenario: Scenario) -> OutageMetrics:
    """
    Node-based science outage of a guidance solution against the untightened
    field-of-view limits.
    """
    traj = getattr(solution, "trajectory", solution)
    return outages_from_angles(comet_angles(scenario, traj.x[:, :4], traj.times), scenario)


def dense_outages(solution, scenario: Scenario, supersample: int = 10):
    """
    Continuous-time outage estimate from a supersampled truth propagation.

    Returns ``(visual_s, infrared_s, t_dense, angles_dense)``.
    """
    traj = getattr(solution, "trajectory", solution)
    t, X = propagate_dense(traj.x[0], traj.times, traj.u, scenario.plant, scenario.scaling,
                           supersample=supersample)
    ang = comet_angles(scenario, X[:, :4], t)
    mid = 0.5 * (ang[1:] + ang[:-1])
    dt = np.diff(t)
    return (float(dt[mid > scenario.theta_vmax].sum()), float(dt[mid > scenario.theta_imax].sum()),
            t, ang)


def initial_pointing_angle(scenario: Scenario) -> float:
    return pointing_angle(scenario.x_init.q, scenario.comet_direction(0.0), scenario.v_body)
