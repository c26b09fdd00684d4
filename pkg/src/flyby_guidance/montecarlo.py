"""
Monte Carlo campaigns over random post-impact wheel momenta.

Each run draws ``h(0)`` uniformly from ``|h| <= 0.9 h_max`` using a sub-seed
derived from ``(seed, run_id)``, so results do not depend on how runs are
scheduled across workers.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .attitude import InvalidInputError
from .scenario import MomentumSampler, scenario_from_config
from .scp import ScpConfig, TERMINATIONS, run_scp
from .solvers import get_backend

log = logging.getLogger(__name__)

FAILED = "failed"
MAX_WHEELS = 4
CSV_COLUMNS = (["run_id"] + [f"h0_{i}" for i in range(1, MAX_WHEELS + 1)]
               + ["h0_norm", "hbody_x", "hbody_y", "hbody_z", "visual_outage_s",
                  "infrared_outage_s", "iterations", "termination", "lin_ms", "opt_ms", "int_ms"])
OUTAGE_THRESHOLDS = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 75.0, 100.0, 150.0, 200.0)


class CampaignFormatError(ValueError):
    """A persisted campaign file is missing, truncated or malformed."""


@dataclass(frozen=True)
class CampaignConfig:
    """
    Parameters
    ----------
    sample_count : int
        Number of runs.
    fault : int, optional
        One-based index of a blocked wheel.
    seed : int
        Master seed; run ``i`` uses the sub-seed ``(seed, i)``.
    workers : int
        Worker processes; results do not depend on this.
    scenario : dict
        Scenario overrides in the configuration-file format.
    timing : bool
        Record per-step wall-clock times. Off by default because times are
        not reproducible.
    h0 : array_like, optional
        Use this initial momentum for every run instead of sampling.
    """

    sample_count: int
    fault: Optional[int] = None
    seed: int = 0
    workers: int = 1
    scenario: dict = field(default_factory=dict)
    timing: bool = False
    h0: Optional[tuple] = None
    backend: str = "auto"

    def __post_init__(self):
        if int(self.sample_count) < 1:
            raise InvalidInputError("sample_count must be at least 1")
        if int(self.workers) < 1:
            raise InvalidInputError("workers must be at least 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")

    def base_config(self) -> dict:
        cfg = dict(self.scenario)
        if self.fault is not None:
            cfg["fault"] = int(self.fault)
        return cfg

    def echo(self) -> dict:
        return {"sample_count": int(self.sample_count), "fault": self.fault,
                "seed": int(self.seed), "workers": int(self.workers),
                "scenario": dict(self.scenario), "timing": bool(self.timing),
                "h0": None if self.h0 is None else [float(v) for v in self.h0],
                "backend": self.backend}


@dataclass
class RunRecord:
    run_id: int
    h0: np.ndarray
    hbody: np.ndarray
    visual_outage: float
    infrared_outage: float
    iterations: int
    termination: str
    lin_ms: float = float("nan")
    opt_ms: float = float("nan")
    int_ms: float = float("nan")
    error: str = ""

    @property
    def h0_norm(self) -> float:
        return float(np.linalg.norm(self.h0))

    @property
    def ok(self) -> bool:
        return self.termination != FAILED


@dataclass
class CampaignResult:
    config: CampaignConfig
    records: list
    backend: str

    @property
    def summary(self) -> dict:
        return aggregate(self.records)


def _run_one(task):
    base_cfg, run_id, h0, timing, backend_name, scp_config = task
    backend = get_backend(backend_name)
    h0 = np.asarray(h0, dtype=float)
    try:
        scenario = scenario_from_config({**base_cfg, "h0_Nms": h0.tolist()})
        hbody = scenario.plant.L @ h0
        sol = run_scp(scenario, scp_config, backend)
    except Exception as exc:  # a failed run is data, not a campaign failure
        log.warning("run %d failed: %s", run_id, exc)
        nan = float("nan")
        return RunRecord(run_id, h0, np.full(3, nan), nan, nan, 0, FAILED, error=str(exc))
    ms = sol.mean_timings_ms() if timing else {}
    return RunRecord(run_id, h0, hbody, sol.outages.visual_outage, sol.outages.infrared_outage,
                     sol.iterations, sol.termination,
                     ms.get("linearization", float("nan")), ms.get("optimization", float("nan")),
                     ms.get("integration", float("nan")))


def campaign_tasks(config: CampaignConfig, scp_config: Optional[ScpConfig] = None):
    """Per-run work items; the momentum draws are fixed here, before any scheduling."""
    base_cfg = config.base_config()
    base = scenario_from_config(base_cfg)
    sampler = MomentumSampler(base.scaling.h_max, config.seed)
    tasks = []
    for i in range(int(config.sample_count)):
        h0 = np.asarray(config.h0, dtype=float) if config.h0 is not None else sampler.sample(i)
        tasks.append((base_cfg, i, h0, config.timing, config.backend, scp_config))
    return tasks


def run_campaign(config: CampaignConfig, scp_config: Optional[ScpConfig] = None,
                 progress=None) -> CampaignResult:
    """Run every sample and return records ordered by run index."""
    tasks = campaign_tasks(config, scp_config)
    records = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=int(config.workers)) as pool:
            for rec in pool.map(_run_one, tasks, chunksize=1):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for task in tasks:
            rec = _run_one(task)
            records.append(rec)
            if progress:
                progress(rec)
    records.sort(key=lambda r: r.run_id)
    return CampaignResult(config, records, get_backend(config.backend).identity())


# --- statistics ----------------------------------------------------------

def _percentiles(values):
    if values.size == 0:
        return {}
    return {f"p{p}": float(np.percentile(values, p)) for p in (50, 90, 95, 99)} | {
        "max": float(values.max()), "mean": float(values.mean())}


def decile_means(norms, values, bins=10):
    """Mean of ``values`` within equal-count bins of increasing ``norms``."""
    norms = np.asarray(norms, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(norms, kind="stable")
    groups = np.array_split(order, min(bins, norms.size))
    return ([float(norms[g].mean()) for g in groups], [float(values[g].mean()) for g in groups])


def aggregate(records) -> dict:
    """Summary statistics of a list of :class:`RunRecord`."""
    if not records:
        raise InvalidInputError("cannot aggregate an empty record list")
    good = [r for r in records if r.ok]
    vis = np.array([r.visual_outage for r in good])
    ir = np.array([r.infrared_outage for r in good])
    its = np.array([r.iterations for r in good], dtype=int)
    norms = np.array([r.h0_norm for r in good])
    out = {
        "count": len(records),
        "failed": len(records) - len(good),
        "terminations": {t: sum(r.termination == t for r in records) for t in TERMINATIONS + (FAILED,)},
    }
    if good:
        out["zero_visual_fraction"] = float(np.mean(vis == 0.0))
        out["zero_infrared_fraction"] = float(np.mean(ir == 0.0))
        out["zero_outage_fraction"] = float(np.mean((vis == 0.0) & (ir == 0.0)))
        out["visual_outage_s"] = _percentiles(vis)
        out["infrared_outage_s"] = _percentiles(ir)
        out["visual_outage_cdf"] = {f"{t:g}": float(np.mean(vis <= t)) for t in OUTAGE_THRESHOLDS}
        hist = np.bincount(its, minlength=its.max() + 1)
        out["iteration_histogram"] = {str(k): int(hist[k]) for k in range(1, hist.size)}
        out["iteration_cdf"] = {str(k): float(np.mean(its <= k)) for k in range(1, hist.size)}
        out["median_iterations"] = float(np.median(its))
        out["fraction_over_25_iterations"] = float(np.mean(its > 25))
        centers, means = decile_means(norms, vis)
        out["visual_outage_by_h0_decile"] = {"h0_norm_mean": centers, "visual_outage_mean": means}
        outage_norms = norms[vis > 0.0]
        out["min_h0_norm_with_visual_outage"] = (float(outage_norms.min()) if outage_norms.size
                                                 else None)
        timing = {}
        for key in ("lin_ms", "opt_ms", "int_ms"):
            vals = np.array([getattr(r, key) for r in good])
            vals = vals[np.isfinite(vals)]
            if vals.size:
                timing[key] = {"mean": float(vals.mean()), "min": float(vals.min()),
                               "max": float(vals.max())}
        out["timing_ms"] = timing
    return out


# --- persistence ---------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v)) if np.isfinite(v) else "nan"


def write_csv(records, path):
    """Write one row per run with the fixed column set; missing wheels are ``nan``."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            h0 = np.full(MAX_WHEELS, np.nan)
            h0[:r.h0.size] = r.h0
            w.writerow([r.run_id] + [_fmt(v) for v in h0] + [_fmt(r.h0_norm)]
                       + [_fmt(v) for v in r.hbody]
                       + [_fmt(r.visual_outage), _fmt(r.infrared_outage), r.iterations,
                          r.termination, _fmt(r.lin_ms), _fmt(r.opt_ms), _fmt(r.int_ms)])


def read_csv(path, expected_count: Optional[int] = None):
    """Parse a campaign CSV with a strict header and field check."""
    path = Path(path)
    if not path.is_file():
        raise CampaignFormatError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    if not text.endswith("\n"):
        raise CampaignFormatError(f"{path}: truncated (no final newline)")
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(rows[0]) != tuple(CSV_COLUMNS):
        raise CampaignFormatError(f"{path}: header does not match the campaign format")
    valid_terms = set(TERMINATIONS) | {FAILED}
    records = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_COLUMNS):
            raise CampaignFormatError(f"{path}: line {line} has {len(row)} fields")
        try:
            vals = dict(zip(CSV_COLUMNS, row))
            h0 = np.array([float(vals[f"h0_{i}"]) for i in range(1, MAX_WHEELS + 1)])
            h0 = h0[np.isfinite(h0)]
            rec = RunRecord(
                int(vals["run_id"]), h0,
                np.array([float(vals[k]) for k in ("hbody_x", "hbody_y", "hbody_z")]),
                float(vals["visual_outage_s"]), float(vals["infrared_outage_s"]),
                int(vals["iterations"]), vals["termination"], float(vals["lin_ms"]),
                float(vals["opt_ms"]), float(vals["int_ms"]))
        except ValueError as exc:
            raise CampaignFormatError(f"{path}: line {line}: {exc}") from exc
        if rec.termination not in valid_terms:
            raise CampaignFormatError(f"{path}: line {line}: unknown termination {rec.termination!r}")
        records.append(rec)
    if not records:
        raise CampaignFormatError(f"{path}: no run records")
    if expected_count is not None and len(records) != expected_count:
        raise CampaignFormatError(
            f"{path}: {len(records)} records, summary expects {expected_count}")
    return records


def build_stamp() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    import subprocess

    from . import __version__
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5,
                             env={**os.environ, "GIT_OPTIONAL_LOCKS": "0"})
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def json_safe(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj
