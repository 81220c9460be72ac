"""Sampled tests for level convexity and its strict variants at a point.

All verdicts are about sampled data: a level set is represented by the grid
nodes below the level together with a few probes around the point of
interest, and its hull is what gets classified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from .config import DEFAULT_TOL, ToleranceConfig
from .errors import NotLevelConvex
from .fields import GridSpec, ScalarField, as_point

_FRACTIONS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class LevelConvexityCheck:
    """Outcome of a pair scan; truthy when no violation was found.

    ``witness`` is ``(xi, eta, t)`` with
    ``f(t xi + (1 - t) eta) > max(f(xi), f(eta)) + tol``.
    """

    ok: bool
    witness: Optional[tuple] = None
    violation: float = 0.0

    def __bool__(self):
        return self.ok


def _node_index(grid: GridSpec) -> np.ndarray:
    return np.stack(np.meshgrid(*[np.arange(n) for n in grid.shape], indexing="ij"), axis=-1).reshape(-1, grid.dim)


def _flat(grid: GridSpec, idx: np.ndarray) -> np.ndarray:
    return np.ravel_multi_index(tuple(idx.T), grid.shape)


def check_level_convex(f: ScalarField, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL) -> LevelConvexityCheck:
    """Scan node pairs for ``f(t xi + (1-t) eta) > max(f(xi), f(eta))``.

    Analytic fields are evaluated exactly at ``t`` in {1/4, 1/2, 3/4}.
    Sampled fields are only tested where the combination is itself a node,
    since interpolation between nodes is not level convex in general.
    The largest violation is reported; near-ties go to the lowest level,
    then to the first pair in node order.
    """
    X = grid.nodes()
    fv = f.node_values(grid).ravel()
    I = _node_index(grid)
    sampled = f.kind == "sampled"
    best = (-np.inf, np.inf, None)  # (violation, level, witness)
    for i in range(len(X) - 1):
        J = np.arange(i + 1, len(X))
        top = np.maximum(fv[i], fv[J])
        for t in _FRACTIONS:
            if sampled:
                idx = t * I[i] + (1 - t) * I[J]
                on = np.all(np.abs(idx - np.round(idx)) < 1e-9, axis=1)
                if not on.any():
                    continue
                jj = J[on]
                fm = fv[_flat(grid, np.round(idx[on]).astype(int))]
                tt = top[on]
            else:
                jj = J
                pts = t * X[i] + (1 - t) * X[J]
                fm = np.asarray(f.eval(pts if grid.dim == 2 else pts[:, 0])).reshape(-1)
                tt = top
            viol = fm - tt
            k = int(np.argmax(viol))
            v = viol[k]
            if v < best[0] - tol.level:
                continue
            # among near-maximal violations in this batch prefer the lowest level
            near = np.flatnonzero(viol >= v - tol.level)
            k = int(near[np.argmin(tt[near])])
            cand = (float(viol[k]), float(tt[k]), (X[i].copy(), X[jj[k]].copy(), t))
            if cand[0] > best[0] + tol.level or (abs(cand[0] - best[0]) <= tol.level and cand[1] < best[1]):
                best = cand
    if best[2] is None or best[0] <= tol.level:
        return LevelConvexityCheck(True, None, max(best[0], 0.0) if np.isfinite(best[0]) else 0.0)
    xi, eta, t = best[2]
    if grid.dim == 1:
        xi, eta = float(xi[0]), float(eta[0])
    else:
        xi, eta = tuple(map(float, xi)), tuple(map(float, eta))
    return LevelConvexityCheck(False, (xi, eta, t), best[0])


def _require_level_convex(f, grid, tol, check):
    if check:
        res = check_level_convex(f, grid, tol)
        if not res:
            raise NotLevelConvex(f"{f.name or 'field'} is not level convex on the grid", res.witness)


def _directions(dim: int, count: int = 16) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    ang = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
    return np.column_stack([np.cos(ang), np.sin(ang)])


def sampled_level_set(f: ScalarField, xi0, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL,
                      level: float | None = None) -> np.ndarray:
    """Points standing in for ``{f <= level}`` (default level ``f(xi0)``).

    Grid nodes under the level, ``xi0`` itself and a star of probes around
    ``xi0`` at a quarter, half and one grid step.
    """
    p = as_point(xi0, grid.dim)
    f0 = float(f.eval(p if grid.dim == 2 else p[0]))
    c = f0 if level is None else level
    X = grid.nodes()
    fv = f.node_values(grid).ravel()
    pts = [X[fv <= c + tol.level]]
    h = min(grid.spacing)
    probes = np.concatenate([p + d * _directions(grid.dim) for d in (h / 4, h / 2, h)])
    probes = probes[grid.contains(probes)]
    if len(probes):
        pv = np.asarray(f.eval(probes if grid.dim == 2 else probes[:, 0])).reshape(-1)
        pts.append(probes[pv <= c + tol.level])
    if f0 <= c + tol.level:
        pts.append(p[None, :])
    return np.vstack(pts)


def _level_hull(f, xi0, grid, tol):
    return geo.hull(sampled_level_set(f, xi0, grid, tol), tol.geom)


def _is_vertex(body: geo.ConvexBody, p: np.ndarray, tol: ToleranceConfig) -> bool:
    scale = max(1.0, body.diameter)
    return bool(np.min(np.linalg.norm(body.vertices - p, axis=1)) <= tol.geom * scale)


def strict_at_point(f: ScalarField, xi0, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL,
                    check: bool = True) -> bool:
    """True when ``xi0`` is an extreme point of its own sampled level set."""
    _require_level_convex(f, grid, tol, check)
    body = _level_hull(f, xi0, grid, tol)
    return _is_vertex(body, as_point(xi0, grid.dim), tol)


def strict_in_one_direction(f: ScalarField, xi0, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL,
                            check: bool = True):
    """Separating unit direction when ``xi0`` is on the boundary of its level set, else None.

    In 1D the direction is returned as a float (+1 or -1).
    """
    _require_level_convex(f, grid, tol, check)
    body = _level_hull(f, xi0, grid, tol)
    p = as_point(xi0, grid.dim)
    loc = geo.locate(body, p)
    if loc is geo.PointLocation.INTERIOR:
        return None
    alpha = geo.separating_direction(body, p)
    return float(np.ravel(alpha)[0]) if grid.dim == 1 else tuple(map(float, alpha))


@dataclass(frozen=True)
class StrictnessReport:
    xi0: tuple
    level_convex_sampled: bool
    violation_witness: Optional[tuple]
    strict_at_point: bool
    strict_in_one_direction: Optional[object]
    boundary_location: geo.PointLocation
    label: str = "sampled"

    def to_dict(self) -> dict:
        w = self.violation_witness
        return {
            "xi0": list(self.xi0),
            "level_convex_sampled": self.level_convex_sampled,
            "violation_witness": None if w is None else [np.ravel(w[0]).tolist(), np.ravel(w[1]).tolist(), w[2]],
            "strict_at_point": self.strict_at_point,
            "strict_in_one_direction": None if self.strict_in_one_direction is None
            else np.ravel(self.strict_in_one_direction).tolist(),
            "boundary_location": self.boundary_location.name.lower(),
            "label": self.label,
        }

    def summary(self) -> str:
        d = self.strict_in_one_direction
        return (f"level_convex={self.level_convex_sampled} strict_at_point={self.strict_at_point} "
                f"direction={None if d is None else np.ravel(d).tolist()} "
                f"location={self.boundary_location.name.lower()}")


def classify(f: ScalarField, xi0, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL) -> StrictnessReport:
    """All strictness notions at ``xi0`` in one report, without raising."""
    lc = check_level_convex(f, grid, tol)
    body = _level_hull(f, xi0, grid, tol)
    p = as_point(xi0, grid.dim)
    loc = geo.locate(body, p)
    direction = None
    if loc is not geo.PointLocation.INTERIOR:
        direction = strict_in_one_direction(f, xi0, grid, tol, check=False)
    return StrictnessReport(tuple(map(float, p)), lc.ok, lc.witness, _is_vertex(body, p, tol),
                            direction, loc, "sampled" if lc.ok else "not-applicable")


@dataclass(frozen=True)
class DanaoReport:
    """Per-level outcome of the test ``R_c subset Ext(L_c)``."""

    levels: tuple
    passed: tuple
    offending: tuple = field(default=(), repr=False)

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def __bool__(self):
        return self.ok


def danao_consistency(f: ScalarField, grid: GridSpec, levels, tol: ToleranceConfig = DEFAULT_TOL) -> DanaoReport:
    """Check that every sampled point of ``{f = c}`` is extreme in ``{f <= c}``."""
    X = grid.nodes()
    fv = f.node_values(grid).ravel()
    passed, offending = [], []
    for c in levels:
        R = X[np.abs(fv - c) <= tol.level]
        L = X[fv <= c + tol.level]
        if len(R) == 0:
            passed.append(True)
            offending.append(np.empty((0, grid.dim)))
            continue
        body = geo.hull(L, tol.geom)
        scale = max(1.0, body.diameter)
        dist = np.linalg.norm(R[:, None, :] - body.vertices[None, :, :], axis=2).min(axis=1)
        bad = R[dist > tol.geom * scale]
        passed.append(len(bad) == 0)
        offending.append(bad)
    return DanaoReport(tuple(float(c) for c in levels), tuple(passed), tuple(offending))


@dataclass(frozen=True)
class PerturbationCheck:
    strict: bool
    witness: Optional[tuple] = None

    def __bool__(self):
        return self.strict


def strict_via_perturbation(f: ScalarField, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL) -> PerturbationCheck:
    """Look for ``f(xi + eta/2) = max(f(xi), f(xi + eta))`` with ``eta != 0``.

    Pairs are scanned by first node in grid order, then by increasing
    distance; the witness is ``(xi, eta)``.
    """
    X = grid.nodes()
    fv = f.node_values(grid).ravel()
    I = _node_index(grid)
    for i in range(len(X)):
        d = I - I[i]
        even = np.all(d % 2 == 0, axis=1)
        even[i] = False
        J = np.flatnonzero(even)
        if len(J) == 0:
            continue
        J = J[np.argsort(np.linalg.norm(X[J] - X[i], axis=1), kind="stable")]
        mid = fv[_flat(grid, (I[i] + I[J]) // 2)]
        flat = mid >= np.maximum(fv[i], fv[J]) - tol.level
        if flat.any():
            j = J[int(np.argmax(flat))]
            xi, eta = X[i], X[j] - X[i]
            if grid.dim == 1:
                return PerturbationCheck(False, (float(xi[0]), float(eta[0])))
            return PerturbationCheck(False, (tuple(map(float, xi)), tuple(map(float, eta))))
    return PerturbationCheck(True, None)


def endpoint_strict(f: ScalarField, xi0, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Endpoint test: ``f(t xi0 + (1-t) xi) < max(f(xi0), f(xi))`` for sampled ``xi != xi0``.

    Checked at ``t`` in {1/4, 1/2, 3/4} against every grid node.
    """
    p = as_point(xi0, grid.dim)
    f0 = float(f.eval(p if grid.dim == 2 else p[0]))
    X = grid.nodes()
    X = X[np.linalg.norm(X - p, axis=1) > tol.geom]
    fv = np.asarray(f.eval(X if grid.dim == 2 else X[:, 0])).reshape(-1)
    for t in _FRACTIONS:
        pts = t * p + (1 - t) * X
        fm = np.asarray(f.eval(pts if grid.dim == 2 else pts[:, 0])).reshape(-1)
        if np.any(fm >= np.maximum(f0, fv) - tol.level):
            return False
    return True
