"""Brute-force cross-checks for relaxed values and constructed solutions.

``relaxed_min_1d`` bisects on the level ``c`` using only point samples of
``f``; it never looks at an envelope.  ``relaxed_min_2d`` minimizes the
largest cell value of ``f(grad u)`` directly over nodal values of a fixed
mesh, so it only ever gives an upper bound on the infimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .config import DEFAULT_TOL, ToleranceConfig
from .errors import MalformedMesh
from .fields import BoundaryDatum, Domain, ScalarField, as_point
from .inclusion import PiecewiseAffineFunction, affine_solution


@dataclass(frozen=True)
class MinimaxResult:
    value: float
    minimizer: PiecewiseAffineFunction
    method: str
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "iterations": self.iterations,
                "converged": self.converged, "upper_bound_only": self.method == "local-descent-2d",
                "minimizer": self.minimizer.to_dict()}


# 1D: bisection on reachability


def _window_1d(f: ScalarField, xi0: float) -> tuple:
    if f.kind == "sampled":
        return float(f.grid.lo[0]), float(f.grid.hi[0])
    f0 = float(f.eval(xi0))
    if f.coercivity is None:
        r = 4.0 * max(1.0, abs(xi0))
    else:
        r = f.coercivity.radius(f0)
    r = max(r, abs(xi0)) * 1.05 + 1e-3
    return -r, r


def _side_minimum(f, lo, hi, pts, vals):
    """Refine the best sample on ``[lo, hi]`` with a bounded scalar search."""
    mask = (pts >= lo) & (pts <= hi)
    if not mask.any():
        return None
    p, v = pts[mask], vals[mask]
    k = int(np.argmin(v))
    a = p[max(k - 1, 0)]
    b = p[min(k + 1, len(p) - 1)]
    if b <= a:
        return None
    res = minimize_scalar(lambda t: float(f.eval(t)), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x) if res.fun < v[k] else None


def relaxed_min_1d(f: ScalarField, xi0, domain: Domain | None = None, pieces: int = 1, samples: int = 20001,
                   tol: ToleranceConfig = DEFAULT_TOL, iterations: int = 60) -> MinimaxResult:
    """Smallest ``c`` for which slopes in ``{f <= c}`` can average to ``xi0``.

    In 1D such slopes exist exactly when ``{f <= c}`` has points on both sides
    of ``xi0``; the level is found by bisection over point samples of ``f``
    (dense uniform samples, the field's own nodes, and ``xi0``).
    """
    if f.dim != 1:
        raise ValueError("relaxed_min_1d needs a 1D field")
    xi0 = float(np.ravel(xi0)[0])
    domain = domain or Domain.interval(0.0, 1.0)
    lo, hi = _window_1d(f, xi0)
    pts = [np.linspace(lo, hi, samples), [xi0]]
    if f.kind == "sampled":
        pts.append(f.grid.axes()[0])
    pts = np.unique(np.concatenate(pts))
    vals = np.asarray(f.eval(pts), dtype=float)
    if f.kind != "sampled":
        extra = [x for x in (_side_minimum(f, lo, xi0, pts, vals), _side_minimum(f, xi0, hi, pts, vals))
                 if x is not None]
        if extra:
            pts = np.concatenate([pts, extra])
            vals = np.concatenate([vals, np.asarray(f.eval(np.array(extra)), dtype=float)])
    left, right = pts <= xi0, pts >= xi0

    def reachable(c):
        return bool(np.any(vals[left] <= c) and np.any(vals[right] <= c))

    c_lo, c_hi = float(vals.min()), float(f.eval(xi0))
    history = []
    if reachable(c_lo):
        c_hi = c_lo
    else:
        for _ in range(iterations):
            mid = 0.5 * (c_lo + c_hi)
            if reachable(mid):
                c_hi = mid
            else:
                c_lo = mid
            history.append(c_hi)
    # snap to the attained sample value so the witness is exact
    cand = np.concatenate([vals[left][vals[left] <= c_hi], vals[right][vals[right] <= c_hi]])
    value = max(float(vals[left][vals[left] <= c_hi].min()), float(vals[right][vals[right] <= c_hi].min())) \
        if len(cand) else c_hi
    pl, pr = pts[left & (vals <= value)], pts[right & (vals <= value)]
    a, b = float(pl.max()), float(pr.min())
    datum = BoundaryDatum((xi0,))
    if b - a <= tol.geom or a == xi0 or b == xi0:
        u = affine_solution(datum, domain)
    else:
        u = _two_slope(datum, domain, a, b, pieces)
    return MinimaxResult(value, u, "bisection-reachability-1d", len(history), True, history)


def _two_slope(datum, domain, a, b, pieces):
    xi0 = datum.xi0[0]
    t = (b - xi0) / (b - a)
    x0, x1 = domain.vertices[:, 0]
    ell = (x1 - x0) / pieces
    ends = x0 + ell * np.arange(pieces + 1)
    ends[-1] = x1
    peaks = ends[:-1] + t * ell
    x = np.empty(2 * pieces + 1)
    x[0::2], x[1::2] = ends, peaks
    u = np.asarray(datum(x[:, None]), dtype=float).reshape(-1)
    u[1::2] = np.asarray(datum(ends[:-1][:, None])).reshape(-1) + (a - xi0) * t * ell
    cells = np.column_stack([np.arange(2 * pieces), np.arange(1, 2 * pieces + 1)])
    return PiecewiseAffineFunction(1, x[:, None], cells, u, datum, domain, np.tile([a, b], pieces)[:, None])


# 2D: smoothed-max coordinate descent on a structured mesh


def quad_mesh(domain: Domain, n: int) -> tuple:
    """``n x n`` nodes on a quadrilateral with union-jack triangles.

    The unit square is mapped bilinearly onto the four domain vertices.
    Diagonals run along the two main diagonals of the square, so meshes
    with ``n - 1`` even are nested under ``n -> 2n - 1``.
    Returns ``(nodes, cells, boundary_mask)``.
    """
    V = domain.vertices
    if domain.dim != 2 or len(V) != 4:
        raise MalformedMesh("relaxed_min_2d meshes quadrilateral domains")
    s = np.linspace(0.0, 1.0, n)
    S, T = np.meshgrid(s, s, indexing="ij")
    S, T = S.ravel(), T.ravel()
    nodes = (((1 - S) * (1 - T))[:, None] * V[0] + (S * (1 - T))[:, None] * V[1]
             + (S * T)[:, None] * V[2] + ((1 - S) * T)[:, None] * V[3])
    idx = np.arange(n * n).reshape(n, n)
    half = (n - 1) / 2
    cells = []
    for i in range(n - 1):
        for j in range(n - 1):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            if (i + 0.5 < half) == (j + 0.5 < half):
                cells += [[a, b, c], [a, c, d]]
            else:
                cells += [[a, b, d], [b, c, d]]
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    boundary = ((I == 0) | (J == 0) | (I == n - 1) | (J == n - 1)).ravel()
    return nodes, np.array(cells), boundary


class _Mesh:
    def __init__(self, nodes, cells, boundary, n):
        self.nodes, self.cells, self.boundary, self.n = nodes, cells, boundary, n
        P = nodes[cells]
        A = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=1)  # rows are edge vectors
        self.Ainv = np.linalg.inv(A)
        # incident cells per node, padded with -1
        inc = [[] for _ in range(len(nodes))]
        for k, cell in enumerate(cells):
            for v in cell:
                inc[v].append(k)
        width = max(len(x) for x in inc)
        self.incident = np.full((len(nodes), width), -1)
        for v, x in enumerate(inc):
            self.incident[v, :len(x)] = x
        I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        colour = ((I % 2) * 2 + (J % 2)).ravel()
        self.colours = [np.flatnonzero((colour == k) & ~boundary) for k in range(4)]

    def gradients(self, u, cells=None):
        cells = slice(None) if cells is None else cells
        uc = u[self.cells[cells]]
        rhs = np.stack([uc[..., 1] - uc[..., 0], uc[..., 2] - uc[..., 0]], axis=-1)
        return np.einsum("...ij,...j->...i", self.Ainv[cells], rhs)


def relaxed_min_2d(f: ScalarField, xi0, domain: Domain, n: int = 9, restarts: int = 8, seed: int = 0,
                   tol: ToleranceConfig = DEFAULT_TOL, tau0: float = 1.0, tau_min: float = 1e-4,
                   epochs_per_stage: int = 50, warm_start: PiecewiseAffineFunction | None = None,
                   noise: float = 0.5, multilevel: bool = True) -> MinimaxResult:
    """Upper bound on ``inf max_T f(grad u)`` over nodal values of a fixed mesh.

    Coordinate pattern search on ``tau * logsumexp(f_T / tau)`` with the four
    node colours updated in parallel; ``tau`` halves every
    ``epochs_per_stage`` epochs from ``tau0`` to ``tau_min``.  Restart 0
    starts from ``warm_start`` (prolonged onto this mesh) or the affine datum;
    the others add seeded noise.  With ``multilevel`` and no warm start,
    the coarser nested mesh ``(n + 1) / 2`` is solved first and prolonged.
    """
    if f.dim != 2:
        raise ValueError("relaxed_min_2d needs a 2D field")
    if multilevel and warm_start is None and n > 3 and (n - 1) % 2 == 0:
        coarse = relaxed_min_2d(f, xi0, domain, (n + 1) // 2, restarts, seed, tol, tau0, tau_min,
                                epochs_per_stage, None, noise, True)
        warm_start = coarse.minimizer
    p = as_point(xi0, 2)
    datum = BoundaryDatum(p)
    nodes, cells, boundary = quad_mesh(domain, n)
    mesh = _Mesh(nodes, cells, boundary, n)
    rng = np.random.default_rng(seed)
    base = np.asarray(datum(nodes), dtype=float)
    if warm_start is not None:
        base = warm_start.evaluate(nodes)
        base[boundary] = np.asarray(datum(nodes[boundary]))
    diam = float(np.max(np.linalg.norm(nodes[:, None] - nodes[None, :], axis=2)))

    def fvals(g):
        return np.asarray(f.eval(g), dtype=float)

    best_u, best_val, total_epochs, converged = base.copy(), float(fvals(mesh.gradients(base)).max()), 0, False
    history = [best_val]
    for rs in range(restarts):
        u = base.copy()
        if rs > 0:
            u[~boundary] += noise * diam * rng.standard_normal(int((~boundary).sum()))
        fT = fvals(mesh.gradients(u))
        tau = tau0
        last_gain = np.inf
        while True:
            step = 0.1 * diam * max(tau, 1e-3)
            for _ in range(epochs_per_stage):
                m = float(fT.max())
                before = float(np.log(np.exp((fT - m) / tau).sum()))
                moved = False
                for nodes_k in mesh.colours:
                    if len(nodes_k) == 0:
                        continue
                    inc = mesh.incident[nodes_k]
                    valid = inc >= 0
                    safe = np.where(valid, inc, 0)
                    cur = np.where(valid, np.exp((fT[safe] - m) / tau), 0.0).sum(axis=1)
                    best_local = cur.copy()
                    choice = np.zeros(len(nodes_k))
                    for d in (-step, step):
                        u[nodes_k] += d
                        fn = fvals(mesh.gradients(u, safe))
                        loc = np.where(valid, np.exp(np.minimum((fn - m) / tau, 700.0)), 0.0).sum(axis=1)
                        better = loc < best_local * (1 - 1e-12)
                        best_local = np.where(better, loc, best_local)
                        choice = np.where(better, d, choice)
                        u[nodes_k] -= d
                    if np.any(choice != 0):
                        moved = True
                        u[nodes_k] += choice
                        touched = np.unique(safe[valid[:, :] & (choice != 0)[:, None]])
                        fT[touched] = fvals(mesh.gradients(u, touched))
                m2 = float(fT.max())
                after = float(np.log(np.exp((fT - m2) / tau).sum())) + (m2 - m) / tau
                last_gain = tau * (before - after)
                total_epochs += 1
                val = float(fT.max())
                if val < best_val:
                    best_val, best_u = val, u.copy()
                if not moved:
                    step *= 0.5
                    if step < 1e-9:
                        break
            history.append(best_val)
            if tau <= tau_min:
                break
            tau = max(tau * 0.5, tau_min)
        converged = converged or abs(last_gain) < tol.level
    grads = mesh.gradients(best_u)
    u = PiecewiseAffineFunction(2, nodes, cells, best_u, datum, domain, grads)
    return MinimaxResult(best_val, u, "local-descent-2d", total_epochs, converged, history)


# audits


@dataclass(frozen=True)
class AuditReport:
    max_f: float
    claimed: float
    passed: bool
    residual_fraction: float
    worst_cell: Optional[int]

    def to_dict(self) -> dict:
        return {"max_f": self.max_f, "claimed": self.claimed, "passed": self.passed,
                "residual_fraction": self.residual_fraction, "worst_cell": self.worst_cell,
                "certified_on": "covered cells"}


def _check_mesh(u: PiecewiseAffineFunction, tol: ToleranceConfig):
    a = u.areas()
    if np.any(a <= 0):
        raise MalformedMesh("degenerate cell")
    if u.cell_gradients is not None and len(a):
        scale = max(1.0, float(np.abs(u.cell_gradients).max()))
        err = float(np.abs(u.nodal_gradients() - u.cell_gradients).max())
        if err > 1e-6 * scale:
            raise MalformedMesh(f"stored gradients disagree with nodal values by {err:.3g}")


def audit_solution(f: ScalarField, u: PiecewiseAffineFunction, claimed: float,
                   tol: ToleranceConfig = DEFAULT_TOL) -> AuditReport:
    """``max f(grad u)`` over the cells against a claimed relaxed value."""
    _check_mesh(u, tol)
    g = u.gradients()
    if len(g) == 0:
        return AuditReport(-np.inf, float(claimed), True, u.residual_fraction, None)
    vals = np.asarray(f.eval(g if u.dim == 2 else g[:, 0]), dtype=float).reshape(-1)
    k = int(np.argmax(vals))
    return AuditReport(float(vals[k]), float(claimed), bool(vals[k] <= claimed + tol.level),
                       u.residual_fraction, k)


@dataclass(frozen=True)
class JensenReport:
    mean_gradient: tuple
    f_at_mean: float
    max_f: float
    holds: bool
    witness_cells: tuple

    def to_dict(self) -> dict:
        return {"mean_gradient": list(self.mean_gradient), "f_at_mean": self.f_at_mean,
                "max_f": self.max_f, "holds": self.holds, "witness_cells": list(self.witness_cells)}


def jensen_audit(f: ScalarField, u: PiecewiseAffineFunction, tol: ToleranceConfig = DEFAULT_TOL) -> JensenReport:
    """Check ``f(mean grad u) <= max f(grad u)``; a failure refutes level convexity."""
    _check_mesh(u, tol)
    mean = np.atleast_1d(u.mean_gradient())
    g = np.vstack([u.gradients(), mean[None, :]]) if u.residual_fraction > 0 else u.gradients()
    vals = np.asarray(f.eval(g if u.dim == 2 else g[:, 0]), dtype=float).reshape(-1)
    fm = float(f.eval(mean if u.dim == 2 else mean[0]))
    top = float(vals.max())
    holds = fm <= top + tol.level
    witness = () if holds else tuple(int(k) for k in np.flatnonzero(vals[:len(u.cells)] >= top - tol.level))
    return JensenReport(tuple(map(float, mean)), fm, top, bool(holds), witness)
