"""Explicit piecewise affine solutions of ``grad u in E`` with affine boundary data.

1D solutions are sawtooth functions.  In 2D a single pyramid over a convex
cell realizes every point of ``E`` as a gradient and agrees with the datum
on the cell boundary; scaled copies of it are packed greedily into the
domain, and the datum is kept on whatever is left uncovered.
"""

from __future__ import annotations

import csv
import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .config import DEFAULT_TOL, ToleranceConfig
from .errors import MalformedMesh, NotApplicable, NotBracketed, NotInteriorPoint, VerdictWasNotExists
from .fields import BoundaryDatum, Domain, GridSpec, ScalarField, as_point


@dataclass(frozen=True, eq=False)
class PiecewiseAffineFunction:
    """Continuous piecewise affine function on cells inside a domain.

    ``cells`` index into ``nodes`` (pairs in 1D, triangles in 2D).  Off the
    cells the function equals the affine datum.  ``cell_gradients`` holds
    the exact design gradients when the construction knows them; nodal
    values reproduce them up to rounding.
    """

    dim: int
    nodes: np.ndarray
    cells: np.ndarray
    values: np.ndarray
    datum: BoundaryDatum
    domain: Domain
    cell_gradients: Optional[np.ndarray] = None
    residual_too_large: bool = False

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, self.dim)
        cells = np.asarray(self.cells, dtype=int).reshape(-1, self.dim + 1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(values) != len(nodes):
            raise MalformedMesh("one value per node is required")
        if cells.size and (cells.min() < 0 or cells.max() >= len(nodes)):
            raise MalformedMesh("cell index out of range")
        if self.domain.dim != self.dim or self.datum.dim != self.dim:
            raise MalformedMesh("dimension mismatch between mesh, domain and datum")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "values", values)
        if self.cell_gradients is not None:
            object.__setattr__(self, "cell_gradients",
                               np.asarray(self.cell_gradients, dtype=float).reshape(len(cells), self.dim))

    # geometry of the cells

    def areas(self) -> np.ndarray:
        p = self.nodes[self.cells]
        if self.dim == 1:
            return np.abs(p[:, 1, 0] - p[:, 0, 0])
        a, b = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def nodal_gradients(self) -> np.ndarray:
        """Gradients recomputed from nodal values."""
        p = self.nodes[self.cells]
        u = self.values[self.cells]
        if self.dim == 1:
            return ((u[:, 1] - u[:, 0]) / (p[:, 1, 0] - p[:, 0, 0]))[:, None]
        A = p[:, 1:] - p[:, :1]
        rhs = u[:, 1:] - u[:, :1]
        return np.linalg.solve(A, rhs[..., None])[..., 0]

    def gradients(self) -> np.ndarray:
        return self.cell_gradients if self.cell_gradients is not None else self.nodal_gradients()

    @property
    def covered_measure(self) -> float:
        return float(self.areas().sum())

    @property
    def residual_fraction(self) -> float:
        return max(0.0, 1.0 - self.covered_measure / self.domain.measure)

    def mean_gradient(self) -> np.ndarray:
        """Area-weighted mean gradient, counting the residual set at the datum gradient."""
        a = self.areas()
        resid = self.domain.measure - a.sum()
        return (a @ self.gradients() + resid * self.datum.gradient) / self.domain.measure

    def sup_deviation(self) -> float:
        """``max |u - datum|``; attained at nodes since both are piecewise affine."""
        if len(self.nodes) == 0:
            return 0.0
        return float(np.max(np.abs(self.values - self.datum(self.nodes))))

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        out = np.asarray(self.datum(pts), dtype=float).reshape(-1).copy()
        done = np.zeros(len(pts), dtype=bool)
        for cell in self.cells:
            p = self.nodes[cell]
            u = self.values[cell]
            if self.dim == 1:
                lo, hi = sorted((p[0, 0], p[1, 0]))
                inside = ~done & (pts[:, 0] >= lo) & (pts[:, 0] <= hi)
                if inside.any():
                    s = (pts[inside, 0] - p[0, 0]) / (p[1, 0] - p[0, 0])
                    out[inside] = u[0] + s * (u[1] - u[0])
            else:
                T = np.column_stack([p[1] - p[0], p[2] - p[0]])
                lam = np.linalg.solve(T, (pts - p[0]).T).T
                inside = ~done & (lam[:, 0] >= -1e-12) & (lam[:, 1] >= -1e-12) & (lam.sum(axis=1) <= 1 + 1e-12)
                if inside.any():
                    l = lam[inside]
                    out[inside] = u[0] + l[:, 0] * (u[1] - u[0]) + l[:, 1] * (u[2] - u[0])
            done |= inside
        return out

    # serialization

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "nodes": self.nodes.tolist(),
            "cells": self.cells.tolist(),
            "values": self.values.tolist(),
            "cell_gradients": None if self.cell_gradients is None else self.cell_gradients.tolist(),
            "datum": self.datum.to_dict(),
            "domain": self.domain.to_dict(),
            "residual_fraction": self.residual_fraction,
            "residual_too_large": self.residual_too_large,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseAffineFunction":
        datum = BoundaryDatum(d["datum"]["xi0"], d["datum"].get("c", 0.0))
        return cls(d["dim"], np.asarray(d["nodes"]), np.asarray(d["cells"], dtype=int), np.asarray(d["values"]),
                   datum, Domain.from_dict(d["domain"]),
                   None if d.get("cell_gradients") is None else np.asarray(d["cell_gradients"]),
                   bool(d.get("residual_too_large", False)))

    def save(self, mesh_path, gradients_csv=None) -> None:
        Path(mesh_path).write_text(json.dumps(self.to_dict()))
        if gradients_csv is not None:
            with open(gradients_csv, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["cell", "area"] + [f"g{i + 1}" for i in range(self.dim)])
                for k, (a, g) in enumerate(zip(self.areas(), self.gradients())):
                    w.writerow([k, repr(float(a))] + [repr(float(c)) for c in g])

    @classmethod
    def load(cls, mesh_path) -> "PiecewiseAffineFunction":
        return cls.from_dict(json.loads(Path(mesh_path).read_text()))


@dataclass(frozen=True)
class InclusionTarget:
    """Finite gradient set ``E`` and the datum gradient ``xi0``."""

    E: np.ndarray
    xi0: np.ndarray

    def __post_init__(self):
        xi0 = np.atleast_1d(np.asarray(self.xi0, dtype=float))
        E = np.asarray(self.E, dtype=float).reshape(-1, len(xi0))
        if len(E) == 0:
            raise NotInteriorPoint("empty gradient set")
        object.__setattr__(self, "xi0", xi0)
        object.__setattr__(self, "E", E)

    @property
    def dim(self) -> int:
        return len(self.xi0)

    def contains_xi0(self, tol: float = DEFAULT_TOL.geom) -> bool:
        return bool(np.min(np.linalg.norm(self.E - self.xi0, axis=1)) <= tol)

    def validate(self, tol: ToleranceConfig = DEFAULT_TOL) -> None:
        """Raise unless ``xi0`` is in ``E`` or in the interior of its hull."""
        if self.contains_xi0(tol.geom):
            return
        body = geo.hull(self.E, tol.geom)
        if body.degenerate or geo.locate(body, self.xi0) is not geo.PointLocation.INTERIOR:
            err = NotBracketed if self.dim == 1 else NotInteriorPoint
            raise err(f"{self.xi0.tolist()} is neither in E nor interior to its hull")


def affine_solution(datum: BoundaryDatum, domain: Domain) -> PiecewiseAffineFunction:
    """The datum itself, meshed as one interval or a fan of triangles."""
    v = domain.vertices
    if domain.dim == 1:
        cells = np.array([[0, 1]])
    else:
        cells = np.array([[0, k, k + 1] for k in range(1, len(v) - 1)])
    g = np.tile(datum.gradient, (len(cells), 1))
    return PiecewiseAffineFunction(domain.dim, v, cells, datum(v), datum, domain, g)


def zigzag_1d(target: InclusionTarget, domain: Domain, pieces: int = 4, c: float = 0.0) -> PiecewiseAffineFunction:
    """Sawtooth with slopes from the two points of ``E`` nearest to ``xi0`` on either side."""
    if target.dim != 1 or domain.dim != 1:
        raise ValueError("zigzag_1d is one-dimensional")
    if pieces < 1:
        raise ValueError("pieces must be positive")
    xi0 = float(target.xi0[0])
    datum = BoundaryDatum((xi0,), c)
    E = target.E[:, 0]
    if np.any(np.abs(E - xi0) <= DEFAULT_TOL.geom):
        return affine_solution(datum, domain)
    below, above = E[E < xi0], E[E > xi0]
    if len(below) == 0 or len(above) == 0:
        raise NotBracketed(f"no pair in E brackets {xi0}")
    alpha, beta = float(below.max()), float(above.min())
    t = (beta - xi0) / (beta - alpha)
    a, b = domain.vertices[:, 0]
    ell = (b - a) / pieces
    ends = a + ell * np.arange(pieces + 1)
    ends[-1] = b
    peaks = ends[:-1] + t * ell
    x = np.empty(2 * pieces + 1)
    x[0::2], x[1::2] = ends, peaks
    u = datum(x[:, None])
    u[1::2] = datum(ends[:-1][:, None]) + alpha * t * ell
    cells = np.column_stack([np.arange(2 * pieces), np.arange(1, 2 * pieces + 1)])
    g = np.tile([alpha, beta], pieces)[:, None]
    return PiecewiseAffineFunction(1, x[:, None], cells, u, datum, domain, g)


@dataclass(frozen=True)
class PyramidCell:
    """Polygon ``P`` with 0 inside and the gradient on each fan triangle ``(0, p_k, p_k+1)``."""

    vertices: np.ndarray
    gradients: np.ndarray
    xi0: np.ndarray

    @property
    def body(self) -> geo.ConvexBody:
        return geo.polygon(self.vertices)

    @property
    def area(self) -> float:
        return geo.polygon(self.vertices).area

    def support(self, u: np.ndarray) -> np.ndarray:
        """Support function ``h_P`` at the rows of ``u``."""
        return np.max(np.atleast_2d(u) @ self.vertices.T, axis=1)

    def place(self, centre, r: float, c: float = 0.0) -> tuple:
        """Nodes, fan cells and values of ``centre + r P`` for datum ``<xi0, x> + c``."""
        centre = np.asarray(centre, dtype=float)
        nodes = np.vstack([centre, centre + r * self.vertices])
        vals = nodes @ self.xi0 + c
        vals[0] += r
        m = len(self.vertices)
        cells = np.array([[0, 1 + k, 1 + (k + 1) % m] for k in range(m)])
        return nodes, cells, vals


def pyramid_cell(target: InclusionTarget, tol: ToleranceConfig = DEFAULT_TOL):
    """Pyramid ``<xi0, x> + max(0, min_i <xi_i - xi0, x> + 1)`` on its support ``P``.

    Returns ``(ConvexBody, PiecewiseAffineFunction)``.  When ``xi0`` is in
    ``E`` the cell is the box ``[-1, 1]^2`` carrying the affine map.
    """
    return _pyramid(target, tol).body, pyramid_function(target, tol)


def _pyramid(target: InclusionTarget, tol: ToleranceConfig) -> PyramidCell:
    if target.dim != 2:
        raise ValueError("pyramid cells are two-dimensional")
    q = target.xi0 - target.E  # minus the offsets xi_i - xi0
    Q = geo.hull(q, tol.geom)
    if Q.degenerate or geo.locate(Q, np.zeros(2)) is not geo.PointLocation.INTERIOR:
        raise NotInteriorPoint("xi0 is not interior to the hull of E")
    qv = Q.vertices  # CCW
    qn = np.roll(qv, -1, axis=0)
    # vertex of P dual to the edge (q_k, q_k+1): <q_k, x> = <q_k+1, x> = 1
    A = np.stack([qv, qn], axis=1)
    pv = np.linalg.solve(A, np.ones((len(qv), 2, 1)))[..., 0]
    # fan triangle (0, p_k-1, p_k) belongs to q_k; reorder so triangle k is (0, p_k, p_k+1)
    grads = target.xi0 - np.roll(qv, -1, axis=0)
    return PyramidCell(pv, grads, target.xi0)


def pyramid_function(target: InclusionTarget, tol: ToleranceConfig = DEFAULT_TOL, c: float = 0.0):
    if target.contains_xi0(tol.geom):
        box = Domain.box((-1.0, -1.0), (1.0, 1.0))
        return affine_solution(BoundaryDatum(target.xi0, c), box)
    cell = _pyramid(target, tol)
    nodes, cells, vals = cell.place(np.zeros(2), 1.0, c)
    dom = Domain.polygon(cell.vertices)
    return PiecewiseAffineFunction(2, nodes, cells, vals, BoundaryDatum(target.xi0, c), dom, cell.gradients)


class _CopyIndex:
    """Placed copies with a KD-tree over their centres, rebuilt in batches.

    Two copies whose circumscribed discs are disjoint never overlap, so a
    candidate of scale ``b`` at ``x`` only has to be tested against copies
    with ``|x - c_j| < (b + r_j) R``.
    """

    def __init__(self, C, r, R, batch=256):
        self.C, self.r, self.R, self.batch = C, r, R, batch
        self._rebuild()

    def _rebuild(self):
        self.n_tree = len(self.r)
        self.tree = cKDTree(self.C) if self.n_tree else None
        self.rmax = float(self.r.max()) if self.n_tree else 0.0

    def add(self, x, r):
        self.C = np.vstack([self.C, x])
        self.r = np.append(self.r, r)
        if len(self.r) - self.n_tree >= self.batch:
            self._rebuild()

    def near(self, x, b):
        idx = np.arange(self.n_tree, len(self.r))
        if self.tree is not None:
            old = np.asarray(self.tree.query_ball_point(x, (b + self.rmax) * self.R), dtype=int)
            if len(old):
                d = np.linalg.norm(self.C[old] - x, axis=1)
                old = old[d < (b + self.r[old]) * self.R]
            idx = np.concatenate([old, idx])
        return idx


def vitali_fill(target: InclusionTarget, domain: Domain, residual_tol: float = 1e-2, max_cells: int = 20000,
                max_scale: float | None = None, c: float = 0.0, tol: ToleranceConfig = DEFAULT_TOL,
                max_generations: int = 16, max_candidates: int = 2_000_000) -> PiecewiseAffineFunction:
    """Greedy packing of homothetic pyramid cells into a convex polygon.

    Candidate centres are the centres of a quadtree over the bounding box;
    each generation halves the cell size and only refines cells that are
    neither outside the domain nor inside a single placed copy.  Within a
    generation the largest admissible copy is placed first (lazy greedy over
    a heap of stale upper bounds).  A copy must have scale at least half the
    cell size over the pyramid circumradius.  ``max_scale`` caps every copy,
    which bounds ``|u - datum|``.
    """
    if domain.dim != 2:
        raise ValueError("vitali_fill needs a 2D polygon domain")
    datum = BoundaryDatum(target.xi0, c)
    if target.contains_xi0(tol.geom):
        return affine_solution(datum, domain)
    cell = _pyramid(target, tol)
    V = cell.vertices
    R = float(np.max(np.linalg.norm(V, axis=1)))
    areaP = cell.area
    n_dom, b_dom = domain.halfplanes()
    h_dom = cell.support(n_dom)
    e = np.roll(V, -1, axis=0) - V
    normals = np.stack([e[:, 1], -e[:, 0]], axis=1)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    h_facet = cell.support(normals)
    axes = np.vstack([normals, -normals])
    h_plus, h_minus = cell.support(axes), cell.support(-axes)

    def gauge(y):
        return np.max((y @ normals.T) / h_facet[None, :], axis=1)

    lo, hi = domain.bbox
    s = float(np.max(hi - lo))
    pts = ((lo + hi) / 2)[None, :]
    cap = np.inf if max_scale is None else float(max_scale)
    C, r_all = [], []
    target_area = (1.0 - residual_tol) * domain.measure
    covered = 0.0
    corners = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) * 0.5

    for gen in range(max_generations):
        if covered >= target_area or len(C) >= max_cells or len(pts) == 0 or len(pts) > max_candidates:
            break
        thresh = 0.5 * s / R
        tree = cKDTree(pts)
        ub = np.minimum(np.min((b_dom[None, :] - pts @ n_dom.T) / h_dom[None, :], axis=1), cap)
        alive = ub >= thresh

        def bury(x0, r):
            idx = np.asarray(tree.query_ball_point(x0, r * R), dtype=int)
            if len(idx):
                alive[idx[gauge(pts[idx] - x0) < r]] = False

        for x0, r in zip(C, r_all):
            bury(x0, r)
        placed = _CopyIndex(np.array(C).reshape(-1, 2), np.array(r_all), R)

        def exact(x, b):
            idx = placed.near(x, b)
            if len(idx) == 0:
                return b
            sep = ((x - placed.C[idx]) @ axes.T - placed.r[idx, None] * h_plus[None, :]) / h_minus[None, :]
            return min(b, float(sep.max(axis=1).min()))

        heap = [(-ub[i], i) for i in np.flatnonzero(alive)]
        heapq.heapify(heap)
        while heap and covered < target_area and len(C) < max_cells:
            neg, i = heapq.heappop(heap)
            if not alive[i]:
                continue
            b = exact(pts[i], -neg)
            if b < thresh:
                alive[i] = False
                continue
            if heap and b < -heap[0][0]:
                heapq.heappush(heap, (-b, i))
                continue
            C.append(pts[i].copy())
            r_all.append(b)
            placed.add(pts[i], b)
            covered += b * b * areaP
            alive[i] = False
            bury(pts[i], b)

        # refine cells that still meet the uncovered part of the domain
        corner_pts = pts[:, None, :] + s * corners[None, :, :]
        outside = np.any(np.all(corner_pts @ n_dom.T > b_dom + 1e-12, axis=1), axis=1)
        inside_copy = np.zeros(len(pts), dtype=bool)
        for x0, r in zip(C, r_all):
            idx = np.asarray(tree.query_ball_point(x0, r * R), dtype=int)
            if len(idx):
                g = gauge((corner_pts[idx] - x0).reshape(-1, 2)).reshape(-1, 4)
                inside_copy[idx[np.all(g <= r, axis=1)]] = True
        keep = pts[~outside & ~inside_copy]
        s /= 2
        pts = (keep[:, None, :] + s * corners[None, :, :]).reshape(-1, 2)

    n = len(C)
    nodes, cells, vals, grads = [], [], [], []
    for k in range(n):
        nd, cl, vl = cell.place(C[k], r_all[k], c)
        nodes.append(nd)
        cells.append(cl + k * len(nd))
        vals.append(vl)
        grads.append(cell.gradients)
    if n:
        nodes, cells, vals, grads = np.vstack(nodes), np.vstack(cells), np.concatenate(vals), np.vstack(grads)
    else:
        nodes, cells, vals, grads = np.empty((0, 2)), np.empty((0, 3), int), np.empty(0), np.empty((0, 2))
    u = PiecewiseAffineFunction(2, nodes, cells, vals, datum, domain, grads)
    if u.residual_fraction > residual_tol:
        object.__setattr__(u, "residual_too_large", True)
    return u


@dataclass(frozen=True)
class SolveReport:
    verdict: object
    ess_sup: float
    relaxed_value: float
    residual_fraction: float
    sup_distance: float
    gradient_set: np.ndarray = field(repr=False)
    residual_too_large: bool = False

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.to_dict(),
            "ess_sup": self.ess_sup,
            "relaxed_value": self.relaxed_value,
            "residual_fraction": self.residual_fraction,
            "sup_distance": self.sup_distance,
            "gradient_set": np.asarray(self.gradient_set).tolist(),
            "residual_too_large": self.residual_too_large,
            "ess_sup_certified_on": "covered cells",
        }


def covered_ess_sup(f: ScalarField, u: PiecewiseAffineFunction) -> float:
    """``max f(grad u)`` over the cells (the residual set is excluded)."""
    g = u.gradients()
    if len(g) == 0:
        return -np.inf
    vals = f.eval(g if u.dim == 2 else g[:, 0])
    return float(np.max(vals))


def solve_P(f: ScalarField, xi0, grid: GridSpec | None, domain: Domain, residual_tol: float = 1e-2,
            pieces: int = 4, max_cells: int = 2000, tol: ToleranceConfig = DEFAULT_TOL, env=None,
            c: float = 0.0, max_scale: float | None = None):
    """Build a minimizer for affine data with gradient ``xi0``; returns ``(u, SolveReport)``."""
    from .envelope import envelope
    from .existence import Branch, Decision, decide_affine

    if env is None:
        if grid is None:
            grid = f.grid
        env = envelope(f, grid, tol, certificates=False)
    verdict = decide_affine(f, xi0, tol=tol, env=env)
    if verdict.decision is Decision.NOT_EXISTS:
        raise VerdictWasNotExists(f"no minimizer exists for xi0={verdict.xi0}")
    dim = env.grid.dim
    p = as_point(xi0, dim)
    v = verdict.relaxed_value
    datum = BoundaryDatum(p, c)
    if verdict.decision is Decision.UNKNOWN and dim == 2:
        raise NotApplicable(f"verdict is unknown: {verdict.reason}")
    near_level = verdict.f_value <= v + 10 * tol.level
    if verdict.branch is Branch.IN_LEVEL_SET_OF_F or near_level:
        u = affine_solution(datum, domain)
        E = p[None, :]
    else:
        X = env.grid.nodes()
        keep = env.field_values.ravel() <= v + tol.level
        if dim == 1:
            E = X[keep]
            u = zigzag_1d(InclusionTarget(E, p), domain, pieces, c)
        else:
            E = env.sublevel_hull(v, tol).vertices
            u = vitali_fill(InclusionTarget(E, p), domain, residual_tol, max_cells, max_scale, c, tol)
    report = SolveReport(verdict, covered_ess_sup(f, u), v, u.residual_fraction, u.sup_deviation(), E,
                         u.residual_too_large)
    return u, report
