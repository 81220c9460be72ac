"""Level-convex envelopes of sampled densities.

Three routes compute the same quantity on a grid:

* :func:`envelope_1d` uses the fact that in 1D the sublevel hulls are
  intervals, so the envelope at a node is the larger of the running minima
  of ``f`` from the left and from the right;
* :func:`envelope_levelsweep` (2D) sweeps the distinct nodal values upward,
  maintaining the hull of the sublevel set, and gives each node the first
  level whose hull contains it;
* :func:`envelope_caratheodory` is the brute-force minimum over convex
  combinations of at most n+1 candidate points, used as an oracle.

For continuous coercive densities the level-convex and the lsc level-convex
envelopes agree, so one array is computed and read as either.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import geometry as geo
from .config import DEFAULT_TOL, ToleranceConfig
from .errors import GridTooCoarse, NotCoercive, NotInHull
from .fields import CoercivityTag, GridSpec, ScalarField, as_point


@dataclass(frozen=True, eq=False)
class EnvelopeResult:
    """Envelope values on a grid, with optional per-node certificates.

    ``certificates[k]`` is a list of ``n + 1`` triples ``(point, weight,
    f(point))`` whose weighted points reproduce node ``k`` and whose largest
    f-value is the envelope value.  In 2D, ``hulls`` keeps the sequence of
    sublevel hulls produced by the sweep as ``(level, ConvexBody)`` pairs so
    that off-grid points can be evaluated exactly against the same data.
    """

    grid: GridSpec
    values: np.ndarray
    field_values: np.ndarray
    method: str
    certificates: Optional[list] = None
    coercivity: Optional[CoercivityTag] = None
    hulls: list = field(default_factory=list, repr=False)
    name: str = ""

    def as_field(self) -> ScalarField:
        return ScalarField.sampled(self.grid, self.values, self.coercivity, name=f"lc({self.name})")

    def __call__(self, xi):
        """Multilinear interpolation of the nodal envelope values."""
        return self.as_field().eval(xi)

    def value_at(self, xi, f: ScalarField | None = None, tol: ToleranceConfig = DEFAULT_TOL) -> float:
        """Envelope at an arbitrary point using grid nodes plus the point itself."""
        return envelope_at(self, xi, f, tol)[0]

    def sublevel_hull(self, level: float, tol: ToleranceConfig = DEFAULT_TOL) -> geo.ConvexBody:
        """Hull of the sampled set ``{f <= level + tol.level}``."""
        mask = self.field_values.ravel() <= level + tol.level
        if not np.any(mask):
            raise NotInHull(f"no sampled point has f <= {level}")
        if self.hulls:
            best = None
            for c, body in self.hulls:
                if c <= level + tol.level:
                    best = body
                else:
                    break
            if best is not None:
                return best
        return geo.hull(self.grid.nodes()[mask], tol.geom)

    # serialization

    def to_csv(self, path) -> None:
        nodes = self.grid.nodes()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.grid.dim)] + ["f", "f_lslc"])
            for p, fv, ev in zip(nodes, self.field_values.ravel(), self.values.ravel()):
                w.writerow([repr(float(c)) for c in p] + [repr(float(fv)), repr(float(ev))])

    def certificates_dict(self) -> dict:
        certs = None
        if self.certificates is not None:
            certs = [[[list(map(float, p)), float(wt), float(fv)] for p, wt, fv in c]
                     for c in self.certificates]
        return {"method": self.method, "grid": self.grid.to_dict(), "name": self.name,
                "coercivity": self.coercivity.to_dict() if self.coercivity else None,
                "certificates": certs}

    def save(self, csv_path, sidecar_path) -> None:
        self.to_csv(csv_path)
        Path(sidecar_path).write_text(json.dumps(self.certificates_dict()))

    @classmethod
    def load(cls, csv_path, sidecar_path) -> "EnvelopeResult":
        meta = json.loads(Path(sidecar_path).read_text())
        grid = GridSpec.from_dict(meta["grid"])
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        arr = np.array([[float(v) for v in r] for r in rows])
        certs = meta["certificates"]
        if certs is not None:
            certs = [[(tuple(p), wt, fv) for p, wt, fv in c] for c in certs]
        coer = CoercivityTag.from_dict(meta["coercivity"]) if meta["coercivity"] else None
        return cls(grid, arr[:, -1].reshape(grid.shape), arr[:, -2].reshape(grid.shape),
                   meta["method"], certs, coer, name=meta.get("name", ""))


def _pad(witnesses: list, dim: int) -> list:
    while len(witnesses) < dim + 1:
        p, _, fv = witnesses[-1]
        witnesses.append((p, 0.0, fv))
    return witnesses


def envelope_1d(f: ScalarField, grid: GridSpec, certificates: bool = True) -> EnvelopeResult:
    """Exact grid envelope in 1D from left and right running minima."""
    if f.dim != 1 or grid.dim != 1:
        raise ValueError("envelope_1d needs a 1D field and grid")
    x = grid.axes()[0]
    fv = f.node_values(grid).ravel()
    left = np.minimum.accumulate(fv)
    right = np.minimum.accumulate(fv[::-1])[::-1]
    env = np.maximum(left, right)
    certs = None
    if certificates:
        n = len(x)
        la = np.empty(n, dtype=int)
        ra = np.empty(n, dtype=int)
        for i in range(n):
            la[i] = i if (i == 0 or fv[i] <= left[i - 1]) else la[i - 1]
        for i in range(n - 1, -1, -1):
            ra[i] = i if (i == n - 1 or fv[i] <= right[i + 1]) else ra[i + 1]
        certs = []
        for i in range(n):
            a, b = la[i], ra[i]
            if a == b:
                wit = [((x[i],), 1.0, fv[i])]
            else:
                w = (x[b] - x[i]) / (x[b] - x[a])
                wit = [((x[a],), float(w), fv[a]), ((x[b],), float(1.0 - w), fv[b])]
            certs.append(_pad(wit, 1))
    return EnvelopeResult(grid, env.reshape(grid.shape), fv.reshape(grid.shape), "runningmin-1d",
                          certs, f.coercivity, name=f.name)


def envelope_levelsweep(f: ScalarField, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL,
                        certificates: bool = True) -> EnvelopeResult:
    """2D envelope by sweeping sublevel hulls over the distinct nodal values."""
    if f.dim != 2 or grid.dim != 2:
        raise ValueError("envelope_levelsweep needs a 2D field and grid")
    if f.coercivity is None:
        raise NotCoercive("levelsweep needs a coercivity-tagged field")
    nodes = grid.nodes()
    fv = f.node_values(grid).ravel()
    levels, inverse = np.unique(fv, return_inverse=True)
    if len(levels) < 4:
        raise GridTooCoarse(f"only {len(levels)} distinct levels on the grid")
    lookup = {tuple(p): v for p, v in zip(nodes, fv)}

    env = fv.copy()
    assigned = np.zeros(len(fv), dtype=bool)
    certs = [None] * len(fv) if certificates else None
    hulls = []
    verts = np.empty((0, 2))
    for k, c in enumerate(levels):
        new = nodes[inverse == k]
        prev = verts
        body = geo.hull(np.vstack([verts, new]), tol.geom)
        verts = body.vertices
        if prev.shape == verts.shape and np.array_equal(prev, verts):
            # hull unchanged: only the new nodes themselves can be assigned
            pending = np.flatnonzero((inverse == k) & ~assigned)
        else:
            hulls.append((float(c), body))
            lo, hi = verts.min(axis=0) - tol.geom, verts.max(axis=0) + tol.geom
            cand = np.flatnonzero(~assigned)
            box = np.all((nodes[cand] >= lo) & (nodes[cand] <= hi), axis=1)
            cand = cand[box]
            pending = cand[geo.contains(body, nodes[cand])]
        env[pending] = c
        assigned[pending] = True
        if certificates:
            for i in pending:
                pts, w = geo.barycentric(body, nodes[i])
                certs[i] = [(tuple(p), float(wt), float(lookup.get(tuple(p), f.eval(p))))
                            for p, wt in zip(pts, w)]
        if assigned.all():
            break
    if certificates:
        for i in np.flatnonzero(~assigned):
            certs[i] = _pad([(tuple(nodes[i]), 1.0, float(fv[i]))], 2)
    return EnvelopeResult(grid, env.reshape(grid.shape), fv.reshape(grid.shape), "levelsweep",
                          certs, f.coercivity, hulls, name=f.name)


def envelope(f: ScalarField, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL,
             certificates: bool = True) -> EnvelopeResult:
    """Dispatch to the 1D running-min method or the 2D level sweep."""
    if f.dim == 1:
        return envelope_1d(f, grid, certificates)
    return envelope_levelsweep(f, grid, tol, certificates)


def envelope_at(env: EnvelopeResult, xi, f: ScalarField | None = None,
                tol: ToleranceConfig = DEFAULT_TOL) -> tuple:
    """Envelope value at ``xi`` using the grid nodes and ``xi`` as candidates.

    Returns ``(value, certificate)``.  ``f`` supplies ``f(xi)`` for off-grid
    points; without it ``xi`` itself is not a candidate.
    """
    dim = env.grid.dim
    p = as_point(xi, dim)
    fx = float(f.eval(p if dim == 2 else p[0])) if f is not None else np.inf
    nodes = env.grid.nodes()
    fv = env.field_values.ravel()
    if dim == 1:
        x = nodes[:, 0]
        left, right = x <= p[0], x >= p[0]
        if not left.any() or not right.any():
            if np.isfinite(fx):
                return fx, _pad([(tuple(p), 1.0, fx)], 1)
            raise NotInHull(f"{xi} lies outside the grid")
        li = np.flatnonzero(left)
        ri = np.flatnonzero(right)
        a = li[len(li) - 1 - int(np.argmin(fv[li][::-1]))]  # nearest left minimizer
        b = ri[int(np.argmin(fv[ri]))]  # nearest right minimizer
        val = max(fv[a], fv[b])
        if fx <= val:
            return fx, _pad([(tuple(p), 1.0, fx)], 1)
        if x[a] == x[b]:
            return float(val), _pad([((x[a],), 1.0, float(fv[a]))], 1)
        w = (x[b] - p[0]) / (x[b] - x[a])
        return float(val), [((x[a],), float(w), float(fv[a])), ((x[b],), float(1 - w), float(fv[b]))]
    hulls = env.hulls or _rebuild_hulls(env, tol)
    lo, hi = 0, len(hulls)
    while lo < hi:
        mid = (lo + hi) // 2
        if geo.locate(hulls[mid][1], p) is not geo.PointLocation.EXTERIOR:
            hi = mid
        else:
            lo = mid + 1
    if lo == len(hulls) or hulls[lo][0] >= fx:
        if np.isfinite(fx):
            return fx, _pad([(tuple(p), 1.0, fx)], 2)
        raise NotInHull(f"{xi} lies outside the hull of the grid")
    c, body = hulls[lo]
    pts, w = geo.barycentric(body, p)
    lookup = {tuple(q): v for q, v in zip(nodes, fv)}
    return float(c), [(tuple(q), float(wt), float(lookup.get(tuple(q), c))) for q, wt in zip(pts, w)]


def _rebuild_hulls(env: EnvelopeResult, tol: ToleranceConfig) -> list:
    nodes = env.grid.nodes()
    fv = env.field_values.ravel()
    out = []
    verts = np.empty((0, 2))
    for c in np.unique(fv):
        body = geo.hull(np.vstack([verts, nodes[fv == c]]), tol.geom)
        if body.vertices.shape != verts.shape or not np.array_equal(body.vertices, verts):
            out.append((float(c), body))
        verts = body.vertices
    return out


def envelope_caratheodory(f: ScalarField, xi, candidates, tol: ToleranceConfig = DEFAULT_TOL) -> tuple:
    """Brute-force ``min max f(xi_i)`` over candidate tuples whose hull holds ``xi``.

    Enumerates singletons, pairs and (in 2D) triangles of candidates.  Cost
    is O(m^(n+1)); meant for spot checks.  Returns ``(value, certificate)``.
    """
    dim = f.dim
    p = as_point(xi, dim)
    cand = np.asarray(candidates, dtype=float).reshape(-1, dim)
    fv = np.asarray(f.eval(cand if dim == 2 else cand[:, 0]), dtype=float).reshape(-1)
    order = np.argsort(fv, kind="stable")
    cand, fv = cand[order], fv[order]
    scale = max(1.0, float(np.max(np.abs(cand))))
    eps = tol.geom * scale

    if dim == 1:
        x = cand[:, 0]
        a = x[:, None]
        b = x[None, :]
        ok = (a <= p[0] + eps) & (b >= p[0] - eps)
        cost = np.where(ok, np.maximum(fv[:, None], fv[None, :]), np.inf)
        i, j = np.unravel_index(np.argmin(cost), cost.shape)
        if not np.isfinite(cost[i, j]):
            raise NotInHull(f"{xi} is not in the hull of the candidates")
        if x[j] - x[i] <= eps:
            return float(fv[i]), _pad([((x[i],), 1.0, float(fv[i]))], 1)
        w = (x[j] - p[0]) / (x[j] - x[i])
        return float(cost[i, j]), [((x[i],), float(w), float(fv[i])), ((x[j],), float(1 - w), float(fv[j]))]

    for k in range(len(cand)):
        ck = cand[k]
        # singleton
        if np.linalg.norm(ck - p) <= eps:
            return float(fv[k]), _pad([(tuple(ck), 1.0, float(fv[k]))], 2)
        if k == 0:
            continue
        ci = cand[:k]
        # segments (i, k)
        d = ck - ci
        q = p - ci
        cross = d[:, 0] * q[:, 1] - d[:, 1] * q[:, 0]
        dd = np.einsum("ij,ij->i", d, d)
        t = np.einsum("ij,ij->i", q, d) / np.where(dd > 0, dd, 1.0)
        on = (np.abs(cross) <= eps * np.sqrt(dd)) & (t >= -tol.geom) & (t <= 1 + tol.geom) & (dd > 0)
        if np.any(on):
            i = int(np.flatnonzero(on)[0])
            tt = float(np.clip(t[i], 0.0, 1.0))
            return float(fv[k]), _pad([(tuple(ci[i]), 1.0 - tt, float(fv[i])),
                                       (tuple(ck), tt, float(fv[k]))], 2)
        if k < 2:
            continue
        # triangles (i, j, k) with i < j < k
        ii, jj = np.triu_indices(k, 1)
        a, b = cand[ii] - ck, cand[jj] - ck
        q = p - ck
        det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        good = np.abs(det) > eps * eps
        det = np.where(good, det, 1.0)
        la = (q[0] * b[:, 1] - q[1] * b[:, 0]) / det
        lb = (a[:, 0] * q[1] - a[:, 1] * q[0]) / det
        lk = 1.0 - la - lb
        inside = good & (la >= -tol.geom) & (lb >= -tol.geom) & (lk >= -tol.geom)
        if np.any(inside):
            m = int(np.flatnonzero(inside)[0])
            lam = np.clip([la[m], lb[m], lk[m]], 0.0, None)
            lam = lam / lam.sum()
            i, j = ii[m], jj[m]
            return float(fv[k]), [(tuple(cand[i]), float(lam[0]), float(fv[i])),
                                  (tuple(cand[j]), float(lam[1]), float(fv[j])),
                                  (tuple(ck), float(lam[2]), float(fv[k]))]
    raise NotInHull(f"{xi} is not in the hull of the candidates")


def lsc_envelope_grid(f: ScalarField) -> ScalarField:
    """Lower each annotated node to the smallest of its limiting values.

    Continuous sampled fields (no annotations) are returned unchanged.
    """
    if f.kind != "sampled":
        raise ValueError("lsc_envelope_grid works on sampled fields")
    if not f.limits:
        return f
    vals = np.array(f.values).ravel()
    for idx, lims in f.limits.items():
        if len(lims):
            vals[int(idx)] = min(vals[int(idx)], float(np.min(lims)))
    return ScalarField.sampled(f.grid, vals.reshape(f.grid.shape), f.coercivity, f.name)


def verify_certificate(cert: list, node, value: float, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Check that a certificate reproduces its node and its value."""
    pts = np.array([p for p, _, _ in cert], dtype=float)
    w = np.array([wt for _, wt, _ in cert])
    fvals = np.array([fv for _, _, fv in cert])
    node = np.atleast_1d(np.asarray(node, dtype=float))
    scale = max(1.0, float(np.max(np.abs(pts))))
    return bool(
        np.all(w >= -1e-12)
        and abs(w.sum() - 1.0) <= 1e-9
        and np.allclose(w @ pts, node, atol=1e-9 * scale)
        and abs(fvals.max() - value) <= tol.level
    )
