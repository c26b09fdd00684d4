"""Conic solver backends.

Every backend exposes ``solve(problem, warm_start=None) -> SolverResult``.
Warm starts are accepted by the interface but ignored by the interior-point
backends shipped here.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INACCURATE = "inaccurate"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIMEOUT = "timeout"


@dataclass
class SolverResult:
    status: str
    primal: np.ndarray
    objective: float
    solve_time: float
    info: dict


class SolverBackend:
    name = "abstract"

    def solve(self, problem, warm_start=None) -> SolverResult:
        raise NotImplementedError

    def identity(self) -> str:
        return self.name


class EcosBackend(SolverBackend):
    """The ECOS embedded interior-point solver, fed the canonical form directly."""

    name = "ecos"

    def __init__(self, feastol=1e-8, abstol=1e-8, reltol=1e-8, max_iters=200):
        import ecos  # noqa: F401  (fail early if missing)

        self.options = dict(feastol=feastol, abstol=abstol, reltol=reltol, max_iters=max_iters)

    def identity(self):
        import ecos
        return f"ecos {ecos.__version__}"

    def solve(self, problem, warm_start=None):
        import ecos

        dims = {"l": int(problem.cones.nonneg), "q": [int(d) for d in problem.cones.soc_dims],
                "e": 0}
        t0 = time.perf_counter()
        sol = ecos.solve(problem.c, problem.G, problem.h, dims, problem.A_eq, problem.b_eq,
                         verbose=False, **self.options)
        elapsed = time.perf_counter() - t0
        info = sol["info"]
        flag = info["exitFlag"]
        status = {0: OPTIMAL, 10: INACCURATE, 1: INFEASIBLE, 11: INFEASIBLE,
                  2: UNBOUNDED, 12: UNBOUNDED}.get(flag, INACCURATE)
        x = np.asarray(sol["x"], dtype=float)
        return SolverResult(status, x, float(problem.c @ x), elapsed,
                            {"exit_flag": flag, "iterations": info.get("iter")})


class ClarabelBackend(SolverBackend):
    """The Clarabel interior-point solver via its Python bindings."""

    name = "clarabel"

    def __init__(self, tol=1e-8, max_iter=200, time_limit=None):
        import clarabel

        self._clarabel = clarabel
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = tol
        settings.tol_gap_rel = tol
        settings.tol_feas = tol
        settings.max_iter = max_iter
        if time_limit is not None:
            settings.time_limit = time_limit
        self.settings = settings

    def identity(self):
        return f"clarabel {self._clarabel.__version__}"

    def solve(self, problem, warm_start=None):
        cl = self._clarabel
        A = sp.vstack([problem.A_eq, problem.G]).tocsc()
        b = np.concatenate([problem.b_eq, problem.h])
        cones = [cl.ZeroConeT(problem.A_eq.shape[0]), cl.NonnegativeConeT(problem.cones.nonneg)]
        cones += [cl.SecondOrderConeT(int(d)) for d in problem.cones.soc_dims]
        P = sp.csc_matrix((problem.n_var, problem.n_var))
        t0 = time.perf_counter()
        solver = cl.DefaultSolver(P, problem.c, A, b, cones, self.settings)
        sol = solver.solve()
        elapsed = time.perf_counter() - t0
        name = str(sol.status)
        if name.endswith("AlmostSolved"):
            status = INACCURATE
        elif name.endswith("Solved"):
            status = OPTIMAL
        elif "PrimalInfeasible" in name:
            status = INFEASIBLE
        elif "DualInfeasible" in name:
            status = UNBOUNDED
        elif "MaxTime" in name:
            status = TIMEOUT
        else:
            status = INACCURATE
        x = np.asarray(sol.x, dtype=float)
        return SolverResult(status, x, float(problem.c @ x), elapsed,
                            {"status": name, "iterations": sol.iterations})


def get_backend(name="auto") -> SolverBackend:
    """Return a backend by name; ``"auto"`` prefers ECOS and falls back to Clarabel."""
    if name in ("auto", "ecos"):
        try:
            return EcosBackend()
        except ImportError:
            if name == "ecos":
                raise
    if name in ("auto", "clarabel"):
        return ClarabelBackend()
    raise ValueError(f"unknown solver backend {name!r}")
