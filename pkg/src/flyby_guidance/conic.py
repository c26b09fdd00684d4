"""
Canonical second-order-cone transcription of the convex subproblem.

Decision vector, node after node::

    x_s,k = [x_k, u_k, gamma_k, zeta_k, eta_k, rho_k, delta_x,k, delta_u,k]

Problem form (the one ECOS consumes)::

    minimize    c^T x_s
    subject to  A_eq x_s = b_eq
                h - G x_s  in  R+^m_l  x  Q^n_1 x ... x Q^n_m

Inequality rows are grouped by constraint family, each family stacked over
the nodes: slack signs, box limits and trust-region caps (linear), then sun
keep-out, line-of-sight, visual and infrared fields of view, control energy,
control deviation and state deviation (cones).

The sparsity structure is built once; :func:`update_dynamic` writes new
values in place through precomputed index maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .attitude import InvalidInputError
from .pointing import build_P, factor_cone


class ConstructionError(ValueError):
    """Raised when problem data and layout disagree in shape."""


@dataclass(frozen=True)
class VariableLayout:
    """Offsets of each signal inside the stacked decision vector."""

    N: int
    n_w: int

    @property
    def n_x(self) -> int:
        return 7 + self.n_w

    @property
    def block(self) -> int:
        return self.n_x + self.n_w + 6

    @property
    def size(self) -> int:
        return self.N * self.block

    def _base(self, k):
        if not 0 <= k < self.N:
            raise IndexError(f"node {k} outside 0..{self.N - 1}")
        return k * self.block

    def x(self, k):
        b = self._base(k)
        return np.arange(b, b + self.n_x)

    def q(self, k):
        return self.x(k)[:4]

    def omega(self, k):
        return self.x(k)[4:7]

    def h(self, k):
        return self.x(k)[7:]

    def u(self, k):
        b = self._base(k) + self.n_x
        return np.arange(b, b + self.n_w)

    def _scalar(self, k, j):
        return self._base(k) + self.n_x + self.n_w + j

    def gamma(self, k):
        return self._scalar(k, 0)

    def zeta(self, k):
        return self._scalar(k, 1)

    def eta(self, k):
        return self._scalar(k, 2)

    def rho(self, k):
        return self._scalar(k, 3)

    def delta_x(self, k):
        return self._scalar(k, 4)

    def delta_u(self, k):
        return self._scalar(k, 5)

    def selector(self, indices):
        """Sparse selection matrix extracting ``indices`` from the stacked vector."""
        idx = np.atleast_1d(indices)
        return sp.csr_matrix((np.ones(idx.size), (np.arange(idx.size), idx)),
                             shape=(idx.size, self.size))

    def unpack(self, z):
        """Split a stacked vector into named per-node arrays."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.size,):
            raise ConstructionError(f"vector has length {z.size}, layout expects {self.size}")
        Z = z.reshape(self.N, self.block)
        n_x, n_w = self.n_x, self.n_w
        s = Z[:, n_x + n_w:]
        return {"x": Z[:, :n_x].copy(), "u": Z[:, n_x:n_x + n_w].copy(),
                "gamma": s[:, 0].copy(), "zeta": s[:, 1].copy(), "eta": s[:, 2].copy(),
                "rho": s[:, 3].copy(), "delta_x": s[:, 4].copy(), "delta_u": s[:, 5].copy()}

    def pack(self, x, u, gamma, zeta, eta, rho, delta_x, delta_u):
        Z = np.zeros((self.N, self.block))
        Z[:, :self.n_x] = x
        Z[:, self.n_x:self.n_x + self.n_w] = u
        Z[:, self.n_x + self.n_w:] = np.column_stack([gamma, zeta, eta, rho, delta_x, delta_u])
        return Z.ravel()


@dataclass(frozen=True)
class ConeLayout:
    nonneg: int
    soc_dims: tuple

    @property
    def rows(self) -> int:
        return self.nonneg + int(sum(self.soc_dims))


@dataclass
class ConicProblem:
    """Sparse canonical conic program plus the bookkeeping for in-place updates."""

    c: np.ndarray
    A_eq: sp.csc_matrix
    b_eq: np.ndarray
    G: sp.csc_matrix
    h: np.ndarray
    cones: ConeLayout
    layout: VariableLayout
    beta: np.ndarray = field(default_factory=lambda: np.ones(6))
    # index maps for the dynamic parts
    _a_slots: np.ndarray = field(default=None, repr=False)
    _bm_slots: np.ndarray = field(default=None, repr=False)
    _bp_slots: np.ndarray = field(default=None, repr=False)
    _h_trust: np.ndarray = field(default=None, repr=False)
    _h_ubar: np.ndarray = field(default=None, repr=False)
    _h_xbar: np.ndarray = field(default=None, repr=False)
    _c_gamma: np.ndarray = field(default=None, repr=False)
    _c_zeta: np.ndarray = field(default=None, repr=False)

    @property
    def n_var(self) -> int:
        return self.c.size

    def check(self):
        n = self.layout.size
        if self.c.shape != (n,) or self.A_eq.shape[1] != n or self.G.shape[1] != n:
            raise ConstructionError("column counts disagree with the variable layout")
        if self.G.shape[0] != self.cones.rows or self.h.shape != (self.cones.rows,):
            raise ConstructionError("inequality rows disagree with the cone layout")
        if self.A_eq.shape[0] != self.b_eq.size:
            raise ConstructionError("equality rows disagree with b_eq")


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0

    def add(self, rows, cols, vals):
        rows, cols = np.broadcast_arrays(np.asarray(rows), np.asarray(cols))
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        start = self.count
        self.rows.append(rows.ravel())
        self.cols.append(cols.ravel())
        self.vals.append(vals.ravel())
        self.count += rows.size
        return np.arange(start, self.count).reshape(rows.shape)

    def to_csc(self, shape):
        rows = np.concatenate(self.rows) if self.rows else np.zeros(0, int)
        cols = np.concatenate(self.cols) if self.cols else np.zeros(0, int)
        vals = np.concatenate(self.vals) if self.vals else np.zeros(0)
        # sort triplets into CSC order and remember where each one lands
        order = np.lexsort((rows, cols))
        if order.size > 1:
            dup = (np.diff(rows[order]) == 0) & (np.diff(cols[order]) == 0)
            if np.any(dup):
                raise ConstructionError("duplicate sparse entries in problem assembly")
        position = np.empty_like(order)
        position[order] = np.arange(order.size)
        indptr = np.zeros(shape[1] + 1, dtype=np.int64)
        np.add.at(indptr, cols + 1, 1)
        indptr = np.cumsum(indptr)
        mat = sp.csc_matrix((vals[order], rows[order], indptr), shape=shape)
        return mat, position


def cone_thresholds(scenario):
    """Right-hand sides of the pointing cones after constraint tightening."""
    shrink = 1.0 - scenario.tightening
    return {
        "sun": float(np.sqrt(1.0 + np.cos(scenario.theta_sun))),
        "visual": float(np.sqrt(1.0 - np.cos(shrink * scenario.theta_vmax))),
        "infrared": float(np.sqrt(1.0 - np.cos(shrink * scenario.theta_imax))),
    }


def node_cone_factors(scenario):
    """Keep-out (sun) and keep-in (comet) factors at every grid time."""
    sun, comet = [], []
    for t in scenario.times:
        sun.append(factor_cone(build_P(scenario.sun_direction(t), scenario.v_body), "-"))
        comet.append(factor_cone(build_P(scenario.comet_direction(t), scenario.v_body), "+"))
    return np.array(sun), np.array(comet)


def assemble_static(scenario, layout: VariableLayout | None = None) -> ConicProblem:
    """
    Build the full sparsity structure and every value that does not depend on
    the linearization trajectory or the trust region.
    """
    N, n_w = scenario.N, scenario.n_w
    if layout is None:
        layout = VariableLayout(N, n_w)
    if layout.N != N or layout.n_w != n_w:
        raise ConstructionError(
            f"layout (N={layout.N}, n_w={layout.n_w}) does not match scenario (N={N}, n_w={n_w})")
    n_x = layout.n_x
    nvar = layout.size
    shrink = 1.0 - scenario.tightening
    thr = cone_thresholds(scenario)
    sun_f, comet_f = node_cone_factors(scenario)
    beta = np.asarray(scenario.beta, dtype=float)
    if beta.shape != (6,):
        raise ConstructionError("beta must have 6 entries")

    # equality constraints
    eq = _Triplets()
    b_eq = np.zeros(N * n_x)
    eye_rows = np.arange(n_x)
    eq.add(eye_rows, layout.x(0), 1.0)
    b_eq[:n_x] = scenario.x_init_scaled
    a_slots = np.empty((N - 1, n_x, n_x), dtype=np.int64)
    bm_slots = np.empty((N - 1, n_x, n_w), dtype=np.int64)
    bp_slots = np.empty((N - 1, n_x, n_w), dtype=np.int64)
    for k in range(N - 1):
        r = (k + 1) * n_x + eye_rows
        eq.add(r, layout.x(k + 1), 1.0)
        a_slots[k] = eq.add(r[:, None], layout.x(k)[None, :], 0.0)
        bm_slots[k] = eq.add(r[:, None], layout.u(k)[None, :], 0.0)
        bp_slots[k] = eq.add(r[:, None], layout.u(k + 1)[None, :], 0.0)
    A_eq, eq_pos = eq.to_csc((N * n_x, nvar))

    # inequality constraints
    g = _Triplets()
    h_rows = []
    row = 0

    def new_rows(values):
        nonlocal row
        values = np.atleast_1d(np.asarray(values, dtype=float))
        idx = np.arange(row, row + values.size)
        h_rows.append(values)
        row += values.size
        return idx

    for k in range(N):
        r = new_rows([0.0, 0.0])
        g.add(r[0], layout.gamma(k), -1.0)
        g.add(r[1], layout.zeta(k), -1.0)
    hb, wb = shrink, shrink
    for k in range(N):
        ones_w = np.ones(n_w)
        r = new_rows(np.concatenate([ones_w, ones_w, hb * ones_w, hb * ones_w,
                                     wb * np.ones(3), wb * np.ones(3)]))
        blocks = [(layout.u(k), -1.0), (layout.u(k), 1.0), (layout.h(k), -1.0),
                  (layout.h(k), 1.0), (layout.omega(k), -1.0), (layout.omega(k), 1.0)]
        offset = 0
        for cols, sign in blocks:
            g.add(r[offset:offset + cols.size], cols, sign)
            offset += cols.size
    h_trust = np.empty((N, 2), dtype=np.int64)
    for k in range(N):
        r = new_rows([0.0, 0.0])
        g.add(r[0], layout.delta_x(k), 1.0)
        g.add(r[1], layout.delta_u(k), 1.0)
        h_trust[k] = r
    m_l = row

    soc = []
    for k in range(N):
        r = new_rows([thr["sun"], 0, 0, 0, 0])
        g.add(r[1:, None], layout.q(k)[None, :], -sun_f[k])
        soc.append(5)
    for k in range(N):
        r = new_rows(np.zeros(5))
        g.add(r[0], layout.eta(k), -1.0)
        g.add(r[1:, None], layout.q(k)[None, :], -comet_f[k])
        soc.append(5)
    for slack, key in ((layout.gamma, "visual"), (layout.zeta, "infrared")):
        for k in range(N):
            r = new_rows([thr[key], 0, 0, 0, 0])
            g.add(r[0], slack(k), -1.0)
            g.add(r[1:, None], layout.q(k)[None, :], -comet_f[k])
            soc.append(5)
    for k in range(N):
        r = new_rows(np.zeros(n_w + 1))
        g.add(r[0], layout.rho(k), -1.0)
        g.add(r[1:], layout.u(k), -1.0)
        soc.append(n_w + 1)
    h_ubar = np.empty((N, n_w), dtype=np.int64)
    for k in range(N):
        r = new_rows(np.zeros(n_w + 1))
        g.add(r[0], layout.delta_u(k), -1.0)
        g.add(r[1:], layout.u(k), 1.0)
        h_ubar[k] = r[1:]
        soc.append(n_w + 1)
    h_xbar = np.empty((N, n_x), dtype=np.int64)
    for k in range(N):
        r = new_rows(np.zeros(n_x + 1))
        g.add(r[0], layout.delta_x(k), -1.0)
        g.add(r[1:], layout.x(k), 1.0)
        h_xbar[k] = r[1:]
        soc.append(n_x + 1)

    G, _ = g.to_csc((row, nvar))
    h = np.concatenate(h_rows)

    c = np.zeros(nvar)
    c_gamma = np.array([layout.gamma(k) for k in range(N)])
    c_zeta = np.array([layout.zeta(k) for k in range(N)])
    for k in range(N):
        c[layout.eta(k)] = beta[2]
        c[layout.rho(k)] = beta[3]
        c[layout.delta_x(k)] = beta[4]
        c[layout.delta_u(k)] = beta[5]

    problem = ConicProblem(
        c=c, A_eq=A_eq, b_eq=b_eq, G=G, h=h, cones=ConeLayout(m_l, tuple(soc)),
        layout=layout, beta=beta,
        _a_slots=eq_pos[a_slots], _bm_slots=eq_pos[bm_slots], _bp_slots=eq_pos[bp_slots],
        _h_trust=h_trust, _h_ubar=h_ubar, _h_xbar=h_xbar, _c_gamma=c_gamma, _c_zeta=c_zeta)
    problem.check()
    return problem


def set_trust_region(problem: ConicProblem, delta_xmax: float, delta_umax: float):
    """Write the trust-region caps; nothing else is touched."""
    if delta_xmax <= 0.0 or delta_umax <= 0.0:
        raise InvalidInputError("trust-region radii must be positive")
    problem.h[problem._h_trust[:, 0]] = delta_xmax
    problem.h[problem._h_trust[:, 1]] = delta_umax
    return problem


def update_linearization(problem: ConicProblem, discrete, reference, weights, beta=None):
    """Write the discrete dynamics, the reference and the cost weights."""
    lay = problem.layout
    N, n_x, n_w = lay.N, lay.n_x, lay.n_w
    if discrete.A.shape != (N - 1, n_x, n_x) or discrete.B_minus.shape != (N - 1, n_x, n_w):
        raise ConstructionError(
            f"discrete model shapes {discrete.A.shape}/{discrete.B_minus.shape} "
            f"do not match N={N}, n_x={n_x}, n_w={n_w}")
    if reference.x.shape != (N, n_x) or reference.u.shape != (N, n_w):
        raise ConstructionError("reference trajectory does not match the layout")
    gw = np.asarray(weights.gamma_weights, dtype=float)
    zw = np.asarray(weights.zeta_weights, dtype=float)
    if gw.shape != (N,) or zw.shape != (N,):
        raise ConstructionError("cardinality weights need one entry per node")
    data = problem.A_eq.data
    data[problem._a_slots] = -discrete.A
    data[problem._bm_slots] = -discrete.B_minus
    data[problem._bp_slots] = -discrete.B_plus
    problem.b_eq[n_x:] = discrete.s.ravel()
    problem.h[problem._h_ubar] = reference.u
    problem.h[problem._h_xbar] = reference.x
    if beta is not None:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (6,):
            raise ConstructionError("beta must have 6 entries")
        problem.beta = beta
        for off in (2, 3, 4, 5):
            problem.c[np.arange(N) * lay.block + n_x + n_w + off] = beta[off]
    problem.c[problem._c_gamma] = problem.beta[0] * gw
    problem.c[problem._c_zeta] = problem.beta[1] * zw
    return problem


def update_dynamic(problem: ConicProblem, discrete, reference, weights, trust, beta=None):
    """Refresh everything that changes between solver calls.

    ``trust`` is the pair ``(delta_xmax, delta_umax)``.
    """
    update_linearization(problem, discrete, reference, weights, beta)
    set_trust_region(problem, *trust)
    return problem


@dataclass
class ResidualReport:
    eq_residual: float
    nonneg_violation: float
    soc_violation: float
    cone_violations: np.ndarray
    worst_cone: int

    @property
    def max_violation(self) -> float:
        return max(self.eq_residual, self.nonneg_violation, self.soc_violation)

    def ok(self, tol=1e-6) -> bool:
        return self.max_violation <= tol


def verify_solution(problem: ConicProblem, primal) -> ResidualReport:
    """Primal feasibility of ``primal``: equality residual, nonnegativity and cone deficits."""
    z = np.asarray(primal, dtype=float)
    if z.shape != (problem.n_var,):
        raise ConstructionError("primal vector does not match the variable layout")
    eq = float(np.abs(problem.A_eq @ z - problem.b_eq).max(initial=0.0))
    s = problem.h - problem.G @ z
    m_l = problem.cones.nonneg
    nonneg = float(max(0.0, -s[:m_l].min(initial=0.0)))
    viol = np.empty(len(problem.cones.soc_dims))
    off = m_l
    for i, d in enumerate(problem.cones.soc_dims):
        t, b = s[off], s[off + 1:off + d]
        viol[i] = max(0.0, np.linalg.norm(b) - t)
        off += d
    worst = int(np.argmax(viol)) if viol.size else -1
    return ResidualReport(eq, nonneg, float(viol.max(initial=0.0)), viol, worst)


def export_text(problem: ConicProblem, path):
    """Write dimensions, cone layout, dense vectors and sparse triplets to a text file."""
    lines = ["conic-problem v1",
             f"dims {problem.n_var} {problem.A_eq.shape[0]} {problem.G.shape[0]}",
             f"nonneg {problem.cones.nonneg}",
             "soc " + " ".join(str(d) for d in problem.cones.soc_dims)]
    for name, vec in (("c", problem.c), ("b", problem.b_eq), ("h", problem.h)):
        lines.append(f"{name} {vec.size}")
        lines.extend(f"{v:.17g}" for v in vec)
    for name, mat in (("A", problem.A_eq), ("G", problem.G)):
        coo = mat.tocoo()
        lines.append(f"{name} {coo.nnz}")
        lines.extend(f"{i} {j} {v:.17g}" for i, j, v in zip(coo.row, coo.col, coo.data))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_text(path):
    """Read a file written by :func:`export_text` into a plain dict of arrays."""
    with open(path, encoding="utf-8") as fh:
        it = iter(fh.read().splitlines())
    if next(it) != "conic-problem v1":
        raise ValueError(f"{path}: not a conic problem export")
    n, p, m = (int(v) for v in next(it).split()[1:])
    out = {"nonneg": int(next(it).split()[1])}
    out["soc_dims"] = tuple(int(v) for v in next(it).split()[1:])
    for name in ("c", "b", "h"):
        count = int(next(it).split()[1])
        out[name] = np.array([float(next(it)) for _ in range(count)])
    for name, shape in (("A", (p, n)), ("G", (m, n))):
        count = int(next(it).split()[1])
        trip = np.array([next(it).split() for _ in range(count)], dtype=float).reshape(-1, 3)
        out[name] = sp.csc_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))),
                                  shape=shape)
    return out
