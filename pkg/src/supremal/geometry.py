"""Planar convex geometry on sampled point sets.

Bodies are intervals in 1D and convex polygons in 2D.  Degenerate bodies
(a point, or a segment in the plane) are first-class and have empty
interior.  All predicates use an absolute distance tolerance ``tol``;
collinearity in the hull uses ``tol`` relative to the body's extent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL
from .errors import EmptyInput, NotOnBoundary


class PointLocation(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Canonical convex body.

    ``vertices`` is ``(k, dim)``: for 1D ``[[lo], [hi]]`` (or a single row for
    a point), for 2D the strictly convex CCW vertex cycle, two rows for a
    segment, one row for a point.
    """

    vertices: np.ndarray
    tol: float = DEFAULT_TOL.geom

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def kind(self) -> str:
        k = self.vertices.shape[0]
        if k == 1:
            return "point"
        if self.dim == 1:
            return "interval"
        return "segment" if k == 2 else "polygon"

    @property
    def degenerate(self) -> bool:
        return self.kind in ("point", "segment")

    @property
    def lo(self) -> float:
        return float(self.vertices[0, 0])

    @property
    def hi(self) -> float:
        return float(self.vertices[-1, 0])

    @property
    def diameter(self) -> float:
        v = self.vertices
        if v.shape[0] == 1:
            return 0.0
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))

    @property
    def area(self) -> float:
        if self.kind != "polygon":
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def edges(self) -> tuple:
        """Edge start points, edge vectors and outward unit normals (polygons)."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        n = n / np.linalg.norm(n, axis=1)[:, None]
        return v, e, n

    def signed_distance(self, points) -> np.ndarray:
        """Positive inside (distance to the boundary), non-positive otherwise.

        Outside a polygon the value is a lower bound on minus the distance,
        which is all the location predicates need.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        v = self.vertices
        if self.kind == "point":
            return -np.linalg.norm(pts - v[0], axis=1)
        if self.kind == "interval":
            x = pts[:, 0]
            return np.minimum(x - v[0, 0], v[1, 0] - x)
        if self.kind == "segment":
            return -_segment_distance(pts, v[0], v[1])
        start, _, n = self.edges()
        d = np.einsum("ij,ij->i", n, start)[None, :] - pts @ n.T
        return d.min(axis=1)

    def locate(self, xi) -> PointLocation:
        return locate(self, xi)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "kind": self.kind, "vertices": self.vertices.tolist(), "tol": self.tol}

    @classmethod
    def from_dict(cls, d) -> "ConvexBody":
        return cls(np.asarray(d["vertices"], dtype=float).reshape(-1, int(d["dim"])), float(d["tol"]))


def _segment_distance(pts, a, b):
    ab = b - a
    t = np.clip((pts - a) @ ab / float(ab @ ab), 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull(points, tol: float = DEFAULT_TOL.geom) -> ConvexBody:
    """Convex hull of a finite point set (monotone chain in 2D)."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptyInput("hull of an empty point set")
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if not np.all(np.isfinite(pts)):
        raise ValueError("hull points must be finite")
    if pts.shape[1] == 1:
        lo, hi = float(pts.min()), float(pts.max())
        if hi - lo <= tol:
            return ConvexBody(np.array([[0.5 * (lo + hi)]]), tol)
        return ConvexBody(np.array([[lo], [hi]]), tol)

    pts = np.unique(pts, axis=0)  # lexicographic sort
    extent = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    if extent <= tol:
        return ConvexBody(pts.mean(axis=0, keepdims=True), tol)

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0.0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(pts[::-1])
    verts = _prune_flat(np.array(lower[:-1] + upper[:-1]), tol * extent)
    if verts.shape[0] <= 2:
        a, b = pts[0], pts[-1]
        return ConvexBody(np.array([a, b]), tol)
    # a thin sliver whose width is below tol is a segment
    body = ConvexBody(verts, tol)
    _, e, n = body.edges()
    widths = [np.max((verts - verts[i]) @ -n[i]) for i in range(len(verts))]
    if min(widths) <= tol:
        d = verts[:, None, :] - verts[None, :, :]
        i, j = np.unravel_index(np.argmax(np.einsum("ijk,ijk->ij", d, d)), d.shape[:2])
        a, b = sorted([tuple(verts[i]), tuple(verts[j])])
        return ConvexBody(np.array([a, b]), tol)
    return body


def _prune_flat(verts: np.ndarray, dist: float) -> np.ndarray:
    """Drop vertices within ``dist`` of the chord joining their neighbours."""
    verts = list(verts)
    changed = True
    while changed and len(verts) > 2:
        changed = False
        for i in range(len(verts)):
            a, b, c = verts[i - 1], verts[i], verts[(i + 1) % len(verts)]
            if _segment_distance(b[None, :], a, c)[0] <= dist:
                del verts[i]
                changed = True
                break
    return np.array(verts)


def interval(lo: float, hi: float, tol: float = DEFAULT_TOL.geom) -> ConvexBody:
    return hull(np.array([lo, hi], dtype=float), tol)


def polygon(vertices, tol: float = DEFAULT_TOL.geom) -> ConvexBody:
    """Canonicalize a (possibly redundant) convex vertex list."""
    return hull(np.asarray(vertices, dtype=float).reshape(-1, 2), tol)


def locate(body: ConvexBody, xi) -> PointLocation:
    d = float(body.signed_distance(xi)[0])
    if body.degenerate:
        return PointLocation.BOUNDARY if d >= -body.tol else PointLocation.EXTERIOR
    if d > body.tol:
        return PointLocation.INTERIOR
    if d >= -body.tol:
        return PointLocation.BOUNDARY
    return PointLocation.EXTERIOR


def contains(body: ConvexBody, points) -> np.ndarray:
    """Vectorized membership test (interior or boundary)."""
    return body.signed_distance(points) >= -body.tol


def extreme_points(body: ConvexBody) -> np.ndarray:
    return body.vertices.copy()


def _vertex_gap(body: ConvexBody, i: int, directions: np.ndarray) -> np.ndarray:
    """For each direction, how far vertex ``i`` sticks out beyond the others."""
    v = body.vertices
    others = np.delete(v, i, axis=0)
    return np.min((v[i] - others) @ directions.T, axis=0)


def exposed_points(body: ConvexBody, tol: float | None = None) -> np.ndarray:
    """Vertices admitting a supporting line that touches the body only there.

    A vertex counts as exposed when some direction in its normal cone keeps
    every other vertex at least ``tol * diameter`` behind the supporting
    line.  With the default (tiny) tolerance every vertex of a canonical
    polygon is exposed; coarser tolerances mimic a finite-resolution view
    of a smooth body, where flat-adjacent vertices stop being exposed.
    """
    tol = body.tol if tol is None else tol
    v = body.vertices
    if v.shape[0] <= 2:
        return v.copy()
    scale = body.diameter
    _, _, n = body.edges()
    keep = []
    for i in range(v.shape[0]):
        a0 = np.arctan2(n[i - 1, 1], n[i - 1, 0])
        a1 = np.arctan2(n[i, 1], n[i, 0])
        sweep = (a1 - a0) % (2 * np.pi)
        ang = a0 + sweep * np.linspace(0.0, 1.0, 33)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        if np.max(_vertex_gap(body, i, dirs)) > tol * scale:
            keep.append(i)
    return v[keep].copy()


def separating_direction(body: ConvexBody, xi0) -> np.ndarray:
    """Unit ``nu`` with ``<nu, xi0> >= <nu, xi> - tol`` for all ``xi`` in the body.

    For a degenerate segment the lexicographically larger normal is returned.
    """
    xi0 = np.asarray(xi0, dtype=float).reshape(-1)
    if locate(body, xi0) is not PointLocation.BOUNDARY:
        raise NotOnBoundary(f"{xi0} is not on the boundary of the body")
    v = body.vertices
    if body.dim == 1:
        if body.kind == "point":
            return np.array([1.0])
        return np.array([1.0]) if abs(xi0[0] - v[1, 0]) <= abs(xi0[0] - v[0, 0]) else np.array([-1.0])
    if body.kind == "point":
        return np.array([1.0, 0.0])
    if body.kind == "segment":
        d = v[1] - v[0]
        nu = np.array([-d[1], d[0]]) / np.linalg.norm(d)
        nu = nu if tuple(nu) > tuple(-nu) else -nu
        return nu + 0.0
    start, _, n = body.edges()
    dist = np.einsum("ij,ij->i", n, start) - n @ xi0
    active = np.abs(dist) <= body.tol
    if not np.any(active):
        active = dist == dist.min()
    nu = n[active].sum(axis=0)
    nu = nu / np.linalg.norm(nu)
    nu[np.abs(nu) < 1e-12] = 0.0
    return nu / np.linalg.norm(nu) + 0.0


def is_strictly_convex_sampled(body: ConvexBody, threshold: float = DEFAULT_TOL.edge_threshold) -> bool:
    """Edge-length proxy for strict convexity.

    No finite polygon is strictly convex; this reports whether every edge is
    shorter than ``threshold``, i.e. the sample resolves no flat piece.
    """
    if body.kind == "interval":
        return True
    if body.kind != "polygon":
        return False
    _, e, _ = body.edges()
    return bool(np.max(np.linalg.norm(e, axis=1)) < threshold)


def barycentric(body: ConvexBody, xi) -> tuple:
    """Express ``xi`` as a convex combination of at most dim+1 vertices.

    Returns ``(points, weights)``; padded by repeating a vertex with weight 0.
    """
    xi = np.asarray(xi, dtype=float).reshape(-1)
    v = body.vertices
    k = body.dim + 1
    if v.shape[0] == 1:
        return np.repeat(v, k, axis=0), np.array([1.0] + [0.0] * (k - 1))
    if body.dim == 1 or body.kind == "segment":
        a, b = v[0], v[-1]
        ab = b - a
        t = float(np.clip((xi - a) @ ab / (ab @ ab), 0.0, 1.0))
        pts = np.array([a, b] + [b] * (k - 2))
        return pts, np.array([1.0 - t, t] + [0.0] * (k - 2))
    w = fan_barycentric(v, xi[None, :])
    j, lam = w[0]
    pts = np.array([v[0], v[j], v[j + 1]])
    return pts, lam


def fan_barycentric(v: np.ndarray, pts: np.ndarray) -> list:
    """Locate points in the fan triangulation ``(v0, vj, vj+1)`` of a convex polygon."""
    a = v[0]
    b = v[1:-1]
    c = v[2:]
    out = []
    for p in pts:
        d0 = b - a
        d1 = c - a
        q = p - a
        det = d0[:, 0] * d1[:, 1] - d0[:, 1] * d1[:, 0]
        l1 = (q[0] * d1[:, 1] - q[1] * d1[:, 0]) / det
        l2 = (d0[:, 0] * q[1] - d0[:, 1] * q[0]) / det
        l0 = 1.0 - l1 - l2
        score = np.minimum(np.minimum(l0, l1), l2)
        j = int(np.argmax(score))
        lam = np.clip(np.array([l0[j], l1[j], l2[j]]), 0.0, None)
        out.append((j + 1, lam / lam.sum()))
    return out
