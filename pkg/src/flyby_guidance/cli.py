"""
Command-line interface: ``solve``, ``campaign`` and ``report``.

Exit codes: 0 success (converged), 2 a guidance run stopped on an iteration,
rejection or time limit, 1 configuration, input or solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .attitude import InvalidInputError
from .montecarlo import (CSV_COLUMNS, CampaignConfig, CampaignFormatError, aggregate,
                         build_stamp, json_safe, read_csv, run_campaign, write_csv)
from .scenario import (PRESET_NAME, comet_angles, scenario_from_config,
                       scenario_to_config)
from .scp import CONVERGED, ScpConfig, run_scp
from .solvers import get_backend
from .svg import Figure

log = logging.getLogger("flyby_guidance.cli")

OUT_ENV = "FLYBY_GUIDANCE_OUT"
DEFAULT_OUT = "flyby-out"
EXIT_OK, EXIT_FAIL, EXIT_LIMIT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors share the configuration-failure exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return val


def _seed(text):
    val = int(text)
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default=PRESET_NAME,
                        help=f"JSON scenario file or preset name (default: {PRESET_NAME})")
    common.add_argument("--out", default=None,
                        help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--seed", type=_seed, default=0, help="master random seed")
    common.add_argument("--fault", type=int, default=None, help="one-based index of a blocked wheel")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--backend", default="auto", choices=["auto", "ecos", "clarabel"],
                        help="conic solver")

    parser = _Parser(prog="flyby-guidance",
                     description="Flyby attitude guidance by sequential convex programming.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="solve one guidance problem")
    p.add_argument("--h0", default=None,
                   help="initial wheel momenta in N m s as a comma list, 'zero' or 'near-saturation'")
    p.add_argument("--time-limit", type=float, default=None, help="wall-clock limit in seconds")

    p = sub.add_parser("campaign", parents=[common], help="run a Monte Carlo campaign")
    p.add_argument("--samples", type=_positive_int, default=200)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--timing", action="store_true",
                   help="record per-step run times (makes the run CSV non-reproducible)")

    p = sub.add_parser("report", parents=[common], help="rebuild statistics from a campaign")
    p.add_argument("--in", dest="input", required=True, help="campaign output directory")
    return parser


def _setup_logging(level):
    logging.basicConfig(level=getattr(logging, level), stream=sys.stderr, force=True,
                        format="%(levelname)s %(name)s: %(message)s")


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _scenario_config(args) -> dict:
    """Scenario overrides as a config dict; raises on unreadable input."""
    if args.scenario == PRESET_NAME:
        cfg = {}
    else:
        path = Path(args.scenario)
        if not path.is_file():
            raise FileNotFoundError(f"scenario file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise InvalidInputError(f"{path}: scenario must be a JSON object")
    if args.fault is not None:
        cfg["fault"] = args.fault
    scenario_from_config(cfg)  # validate now, before any output is written
    return cfg


def _parse_h0(text, scenario):
    if text is None:
        return None
    if text == "zero":
        return np.zeros(scenario.n_w)
    if text == "near-saturation":
        return 0.9 * scenario.scaling.h_max
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse --h0 {text!r}") from exc


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# --- solve ---------------------------------------------------------------

def cmd_solve(args) -> int:
    try:
        cfg = _scenario_config(args)
        scenario = scenario_from_config(cfg)
        h0 = _parse_h0(args.h0, scenario)
        if h0 is not None:
            scenario = scenario.with_h0(h0)
        backend = get_backend(args.backend)
        config = ScpConfig(time_limit=args.time_limit)
    except (OSError, ValueError, ImportError) as exc:
        log.error("%s", exc)
        return EXIT_FAIL
    try:
        sol = run_scp(scenario, config, backend)
    except Exception as exc:
        log.error("guidance run failed: %s", exc)
        return EXIT_FAIL
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    write_solution(out, scenario, sol)
    log.info("%s after %d iterations; visual outage %.1f s, infrared outage %.1f s",
             sol.termination, sol.iterations, sol.outages.visual_outage,
             sol.outages.infrared_outage)
    return EXIT_OK if sol.termination == CONVERGED else EXIT_LIMIT


def write_solution(out: Path, scenario, sol):
    """Trajectory and iteration CSVs, a JSON summary and the diagnostic plots."""
    traj = sol.trajectory
    q, w, h, tau = traj.physical(scenario.scaling)
    L = scenario.plant.L
    tau_b, h_b = tau @ L.T, h @ L.T
    ang = np.rad2deg(comet_angles(scenario, traj.x[:, :4]))
    n = scenario.n_w
    N = traj.N
    gamma = sol.gamma if sol.gamma is not None else np.full(N, np.nan)
    zeta = sol.zeta if sol.zeta is not None else np.full(N, np.nan)
    header = (["t", "q1", "q2", "q3", "q4", "wx", "wy", "wz"]
              + [f"h{i}" for i in range(1, n + 1)] + [f"tau{i}" for i in range(1, n + 1)]
              + ["tau_x", "tau_y", "tau_z", "h_x", "h_y", "h_z", "comet_angle_deg", "gamma", "zeta"])
    rows = np.column_stack([traj.times, q, w, h, tau, tau_b, h_b, ang, gamma, zeta])
    _write_rows(out / "trajectory.csv", header, [[repr(float(v)) for v in r] for r in rows])
    _write_rows(out / "iterations.csv",
                ["iteration", "attempt", "status", "epsilon_x", "objective", "delta_xmax",
                 "delta_umax", "accepted", "solve_ms", "deviation_sum"],
                [[r.iteration, r.attempt, r.status, repr(r.epsilon_x), repr(r.objective),
                  repr(r.delta_xmax), repr(r.delta_umax), int(r.accepted),
                  repr(1e3 * r.solve_time), repr(r.deviation_sum)] for r in sol.history])
    summary = {
        "termination": sol.termination, "iterations": sol.iterations,
        "visual_outage_s": sol.outages.visual_outage,
        "infrared_outage_s": sol.outages.infrared_outage,
        "max_pointing_error_deg": float(np.rad2deg(sol.outages.max_pointing_error)),
        "epsilon_x": sol.epsilon_x, "mean_step_ms": sol.mean_timings_ms(),
        "backend": sol.backend, "build": build_stamp(), "fault": scenario.fault,
        "scenario": scenario_to_config(scenario),
    }
    with open(out / "solve_summary.json", "w", encoding="utf-8") as fh:
        json.dump(json_safe(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")

    t = traj.times
    fig = Figure("Comet pointing angle", "time [s]", "angle [deg]").line(t, ang, "angle")
    fig.axhline(np.rad2deg(scenario.theta_vmax), "visual limit", "#2ca02c")
    fig.axhline(np.rad2deg(scenario.theta_imax), "infrared limit", "#d62728")
    fig.save(out / "angle.svg")
    fig = Figure("Body-frame wheel torque L tau", "time [s]", "torque [N m]")
    for j, name in enumerate("xyz"):
        fig.line(t, tau_b[:, j], f"tau_{name}")
    fig.save(out / "torque.svg")
    fig = Figure("Body-frame wheel momentum L h", "time [s]", "momentum [N m s]")
    for j, name in enumerate("xyz"):
        fig.line(t, h_b[:, j], f"h_{name}")
    fig.save(out / "momentum.svg")
    fig = Figure("Pointing angle per iteration", "time [s]", "angle [deg]")
    for k, a in enumerate(sol.angle_history):
        fig.line(t, np.rad2deg(a), "initial" if k == 0 else "")
    fig.save(out / "angle_iterations.svg")


# --- campaign and report -------------------------------------------------

def write_campaign_plots(out: Path, records):
    good = [r for r in records if r.ok]
    norms = np.array([r.h0_norm for r in good])
    vis = np.array([r.visual_outage for r in good])
    ir = np.array([r.infrared_outage for r in good])
    its = np.array([r.iterations for r in good])
    hb = np.array([r.hbody for r in good]).reshape(-1, 3)
    fig = Figure("Science outage vs initial wheel momentum", "|h(0)| [N m s]", "outage [s]")
    fig.scatter(norms, vis, "visual").scatter(norms, ir, "infrared")
    fig.save(out / "outage_vs_h0.svg")
    levels = np.unique(np.concatenate([[0.0], vis]))
    fig = Figure("Cumulative visual outage", "visual outage [s]", "fraction of runs")
    fig.step(levels, [np.mean(vis <= v) for v in levels], "runs")
    fig.save(out / "outage_cdf.svg")
    ks = np.arange(1, its.max() + 1) if its.size else np.arange(1, 2)
    fig = Figure("Iterations to termination", "iterations", "fraction of runs")
    fig.step(ks, [np.mean(its == k) for k in ks], "histogram")
    fig.line(ks, [np.mean(its <= k) for k in ks], "cumulative")
    fig.save(out / "iterations.svg")
    zero = vis == 0.0
    fig = Figure("Initial body-frame momentum L h(0)", "h_x [N m s]", "h_y [N m s]")
    fig.scatter(hb[zero, 0], hb[zero, 1], "no visual outage", "#2ca02c")
    fig.scatter(hb[~zero, 0], hb[~zero, 1], "visual outage", "#d62728")
    fig.save(out / "hbody_scatter.svg")


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_campaign(args) -> int:
    try:
        cfg = _scenario_config(args)
        fault = cfg.pop("fault", None)
        config = CampaignConfig(sample_count=args.samples, fault=fault, seed=args.seed,
                                workers=args.workers, scenario=cfg, timing=args.timing,
                                backend=args.backend)
        backend = get_backend(args.backend)
    except (OSError, ValueError, ImportError) as exc:
        log.error("%s", exc)
        return EXIT_FAIL
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)

    def progress(rec):
        log.info("run %d: %s, %d iterations, visual outage %.1f s", rec.run_id,
                 rec.termination, rec.iterations, rec.visual_outage)

    result = run_campaign(config, progress=progress)
    write_csv(result.records, out / "runs.csv")
    # statistics come from the persisted file so a later report reproduces them exactly
    records = read_csv(out / "runs.csv")
    agg = aggregate(records)
    _dump_json(out / "aggregates.json", agg)
    _dump_json(out / "summary.json", {"aggregates": agg, "config": config.echo(),
                                      "backend": backend.identity(), "build": build_stamp(),
                                      "csv_columns": list(CSV_COLUMNS)})
    write_campaign_plots(out, records)
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.input)
    csv_path = src / "runs.csv"
    expected = None
    summary_path = src / "summary.json"
    try:
        if summary_path.is_file():
            with open(summary_path, encoding="utf-8") as fh:
                expected = json.load(fh)["config"]["sample_count"]
        records = read_csv(csv_path, expected)
    except (CampaignFormatError, json.JSONDecodeError, KeyError, OSError) as exc:
        log.error("cannot read campaign results: %s", exc)
        return EXIT_FAIL
    out = Path(args.out) if args.out else src / "report"
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "aggregates.json", aggregate(records))
    write_campaign_plots(out, records)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level)
    handler = {"solve": cmd_solve, "campaign": cmd_campaign, "report": cmd_report}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
