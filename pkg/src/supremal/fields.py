"""Densities, grids, domains and boundary data.

A :class:`ScalarField` is either *analytic* (a numpy expression in the
variables ``x`` for n = 1 or ``x1, x2`` for n = 2) or *sampled* on a
:class:`GridSpec`, in which case it is evaluated by multilinear
interpolation of its nodal values.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import CoercivityViolation, OutOfBounds, UnknownField

# names visible inside field expressions
_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in (
        "abs", "sqrt", "exp", "log", "sin", "cos", "tan", "tanh", "arctan",
        "minimum", "maximum", "where", "hypot", "pi", "sign", "clip",
    )
}
_EXPR_NAMESPACE["__builtins__"] = {}


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid over the box ``[lo, hi]`` with ``counts`` nodes per axis.

    Nodes are enumerated in row-major (C) order with the first axis slowest.
    """

    lo: tuple
    hi: tuple
    counts: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if len(counts) == 1 and len(lo) > 1:
            counts = counts * len(lo)
        if not (len(lo) == len(hi) == len(counts)) or len(lo) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with matching lo/hi/counts")
        if any(c < 2 for c in counts):
            raise ValueError("each axis needs at least 2 nodes")
        if any(not (a < b) for a, b in zip(lo, hi)):
            raise ValueError("grid requires lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def square(cls, lo: float, hi: float, count: int, dim: int = 2) -> "GridSpec":
        return cls((lo,) * dim, (hi,) * dim, (count,) * dim)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / (np.array(self.counts) - 1)

    def axes(self) -> list:
        return [np.linspace(a, b, n) for a, b, n in zip(self.lo, self.hi, self.counts)]

    def nodes(self) -> np.ndarray:
        """All nodes as an ``(size, dim)`` array."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def contains(self, points, slack: float = 0.0) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        scale = slack * max(1.0, float(np.max(np.abs(self.lo + self.hi))))
        return np.all((pts >= np.array(self.lo) - scale) & (pts <= np.array(self.hi) + scale), axis=1)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "GridSpec":
        return cls(tuple(d["lo"]), tuple(d["hi"]), tuple(d["counts"]))


@dataclass(frozen=True)
class CoercivityTag:
    """Power-law lower bound ``gamma(t) = a * t**p - b``."""

    a: float = 1.0
    p: float = 2.0
    b: float = 0.0
    name: str = "power"

    def __post_init__(self):
        if self.a <= 0 or self.p <= 0:
            raise ValueError("coercivity needs a > 0 and p > 0")

    def gamma(self, t):
        return self.a * np.asarray(t, dtype=float) ** self.p - self.b

    def radius(self, level: float) -> float:
        """Largest ``t`` with ``gamma(t) <= level``: sublevel sets lie in this ball."""
        return float(((level + self.b) / self.a) ** (1.0 / self.p)) if level + self.b > 0 else 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "a": self.a, "p": self.p, "b": self.b}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CoercivityTag":
        return cls(a=float(d["a"]), p=float(d["p"]), b=float(d.get("b", 0.0)), name=d.get("name", "power"))


def _compile(expression: str, dim: int) -> Callable:
    code = compile(expression, "<field>", "eval")

    def func(pts: np.ndarray) -> np.ndarray:
        if dim == 1:
            env = {"x": pts[:, 0]}
        else:
            env = {"x1": pts[:, 0], "x2": pts[:, 1]}
        out = eval(code, _EXPR_NAMESPACE, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    return func


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A density ``f: R^n -> R`` with n in {1, 2}.

    Build analytic fields with :meth:`analytic` (from an expression string)
    or :meth:`from_function`, sampled fields with :func:`sample` or
    :meth:`sampled`.  ``limits`` optionally annotates sampled nodes (flat
    index) with limiting values from neighbouring jumps; see
    :func:`supremal.envelope.lsc_envelope_grid`.
    """

    dim: int
    expression: Optional[str] = None
    func: Optional[Callable] = None
    grid: Optional[GridSpec] = None
    values: Optional[np.ndarray] = None
    coercivity: Optional[CoercivityTag] = None
    name: str = ""
    limits: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.values is not None:
            if self.grid is None or self.grid.dim != self.dim:
                raise ValueError("sampled field needs a grid of matching dimension")
            vals = np.array(self.values, dtype=float).reshape(self.grid.shape)
            if not np.all(np.isfinite(vals)):
                raise ValueError("sampled values must be finite")
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)
            if self.coercivity is not None:
                self._check_coercivity(self.grid.nodes(), vals.ravel())
        elif self.func is None:
            if self.expression is None:
                raise ValueError("field needs an expression, a function or sampled values")
            object.__setattr__(self, "func", _compile(self.expression, self.dim))

    # construction helpers

    @classmethod
    def analytic(cls, expression: str, dim: int, coercivity=None, name: str = "") -> "ScalarField":
        return cls(dim=dim, expression=expression, coercivity=coercivity, name=name or expression)

    @classmethod
    def from_function(cls, func: Callable, dim: int, coercivity=None, name: str = "") -> "ScalarField":
        """Wrap a vectorized callable taking an ``(m, dim)`` array."""
        return cls(dim=dim, func=func, coercivity=coercivity, name=name)

    @classmethod
    def sampled(cls, grid: GridSpec, values, coercivity=None, name: str = "", limits=None) -> "ScalarField":
        return cls(dim=grid.dim, grid=grid, values=values, coercivity=coercivity,
                   name=name, limits=dict(limits or {}))

    @property
    def kind(self) -> str:
        return "sampled" if self.values is not None else "analytic"

    def _check_coercivity(self, pts, vals):
        gam = self.coercivity.gamma(np.linalg.norm(pts, axis=1))
        # the tag may be tight (e.g. |x|**2 for x**2): allow for rounding
        bad = vals < gam - 1e-12 * np.maximum(1.0, np.abs(gam))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise CoercivityViolation(
                f"f({pts[i]}) = {vals[i]:.6g} < gamma = {gam[i]:.6g}")

    # evaluation

    def _as_points(self, xi) -> tuple:
        arr = np.asarray(xi, dtype=float)
        if self.dim == 1:
            if arr.ndim > 0 and arr.shape[-1] == 1 and arr.ndim >= 2:
                arr = arr[..., 0]
            return arr.reshape(-1, 1), arr.shape
        if arr.shape[-1] != 2:
            raise ValueError("2D field expects points with a trailing axis of length 2")
        return arr.reshape(-1, 2), arr.shape[:-1]

    def eval(self, xi):
        """Evaluate at one point or an array of points.

        Scalars in, float out; arrays in, arrays out (the trailing axis of
        length 2 is consumed in 2D).
        """
        pts, shape = self._as_points(xi)
        if not np.all(np.isfinite(pts)):
            raise ValueError("evaluation point must be finite")
        if self.values is not None:
            out = _multilinear(self.grid, self.values, pts)
        else:
            out = np.asarray(self.func(pts), dtype=float)
        out = out.reshape(shape)
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def node_values(self, grid: GridSpec) -> np.ndarray:
        """Values at the nodes of ``grid`` in grid shape."""
        if self.values is not None and grid == self.grid:
            return np.array(self.values)
        return np.asarray(self.eval(grid.nodes())).reshape(grid.shape)

    # serialization

    def to_dict(self) -> dict:
        d = {"dim": self.dim, "kind": self.kind, "name": self.name}
        if self.kind == "sampled":
            d["grid"] = self.grid.to_dict()
            d["values"] = [float(v) for v in self.values.ravel()]
            if self.limits:
                d["limits"] = {str(k): [float(x) for x in v] for k, v in self.limits.items()}
        else:
            if self.expression is None:
                raise ValueError("fields built from Python callables cannot be serialized")
            d["expression"] = self.expression
        d["coercivity"] = self.coercivity.to_dict() if self.coercivity else None
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalarField":
        allowed = {"dim", "kind", "name", "grid", "values", "expression", "coercivity", "limits"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown field keys: {sorted(unknown)}")
        coer = CoercivityTag.from_dict(d["coercivity"]) if d.get("coercivity") else None
        dim = int(d["dim"])
        kind = d.get("kind", "sampled" if "values" in d else "analytic")
        if kind == "sampled":
            grid = GridSpec.from_dict(d["grid"])
            limits = {int(k): tuple(v) for k, v in (d.get("limits") or {}).items()}
            return cls.sampled(grid, np.asarray(d["values"], dtype=float), coer, d.get("name", ""), limits)
        if kind != "analytic":
            raise ValueError(f"unknown field kind {kind!r}")
        return cls.analytic(d["expression"], dim, coer, d.get("name", ""))


def _multilinear(grid: GridSpec, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    axes = grid.axes()
    idx, frac = [], []
    for d, ax in enumerate(axes):
        x = pts[:, d]
        span = ax[-1] - ax[0]
        if np.any(x < ax[0] - 1e-12 * span) or np.any(x > ax[-1] + 1e-12 * span):
            raise OutOfBounds("point outside the sampling grid")
        i = np.clip(np.searchsorted(ax, x, side="right") - 1, 0, len(ax) - 2)
        t = np.clip((x - ax[i]) / (ax[i + 1] - ax[i]), 0.0, 1.0)
        idx.append(i)
        frac.append(t)
    out = np.zeros(pts.shape[0])
    for corner in itertools.product((0, 1), repeat=grid.dim):
        w = np.ones(pts.shape[0])
        for d, c in enumerate(corner):
            w = w * (frac[d] if c else 1.0 - frac[d])
        out = out + w * values[tuple(idx[d] + corner[d] for d in range(grid.dim))]
    return out


def sample(f: ScalarField, grid: GridSpec) -> ScalarField:
    """Sample an analytic field at the nodes of ``grid``."""
    if f.dim != grid.dim:
        raise ValueError("grid dimension does not match field")
    vals = np.asarray(f.eval(grid.nodes()), dtype=float).reshape(grid.shape)
    return ScalarField.sampled(grid, vals, f.coercivity, f.name)


_BUILTINS = {
    # name: (expression, dim, coercivity)
    "double-well-1d": ("(x**2 - 1)**2", 1, CoercivityTag(1.0, 2.0, 2.0)),
    "example-4-5": ("(x1**2 - 1)**2 + x2**2", 2, CoercivityTag(1.0, 2.0, 2.0)),
    "halfline-kink": ("where(x <= 0, -x, 0.0)", 1, None),
    "dist-halfplane": ("maximum(-x1, 0.0)", 2, None),
    "abs": ("abs(x)", 1, CoercivityTag(1.0, 1.0, 0.0)),
    # extra registry entries used by tests and demos
    "abs-2d": ("hypot(x1, x2)", 2, CoercivityTag(1.0, 1.0, 0.0)),
    "sq-norm": ("x1**2 + x2**2", 2, CoercivityTag(1.0, 2.0, 0.0)),
    "sq-norm-1d": ("x**2", 1, CoercivityTag(1.0, 2.0, 0.0)),
    "max-norm": ("maximum(abs(x1), abs(x2))", 2, CoercivityTag(0.7, 1.0, 0.0)),
    "four-well": (
        "minimum(minimum((x1 - 1)**2 + x2**2, (x1 + 1)**2 + x2**2),"
        " minimum(x1**2 + (x2 - 1)**2, x1**2 + (x2 + 1)**2))",
        2, CoercivityTag(0.5, 2.0, 1.0)),
    "two-disc-well": (
        "maximum(minimum(hypot(x1 - 1, x2), hypot(x1 + 1, x2)) - 0.5, 0.0)**2",
        2, CoercivityTag(0.5, 2.0, 3.0)),
}


def builtin_names() -> list:
    return sorted(_BUILTINS)


def builtin(name: str) -> ScalarField:
    """Return one of the registered example densities."""
    try:
        expr, dim, coer = _BUILTINS[name]
    except KeyError:
        raise UnknownField(name) from None
    return ScalarField.analytic(expr, dim, coer, name)


@dataclass(frozen=True)
class Domain:
    """Closed interval (n = 1) or convex polygon with CCW vertices (n = 2)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.shape[1] == 1:
            if v.shape[0] != 2 or not v[0, 0] < v[1, 0]:
                raise ValueError("interval domain needs a < b")
        else:
            if v.shape[0] < 3:
                raise ValueError("polygon domain needs at least 3 vertices")
            area = _signed_area(v)
            if area < 0:
                v = v[::-1].copy()
            if abs(area) <= 0:
                raise ValueError("polygon has empty interior")
            e = np.roll(v, -1, axis=0) - v
            cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
            if np.any(cross < -1e-12 * np.max(np.abs(e)) ** 2):
                raise ValueError("polygon domain must be convex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def interval(cls, a: float, b: float) -> "Domain":
        return cls(np.array([[a], [b]], dtype=float))

    @classmethod
    def box(cls, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> "Domain":
        (a, c), (b, d) = lo, hi
        return cls(np.array([[a, c], [b, c], [b, d], [a, d]], dtype=float))

    @classmethod
    def polygon(cls, vertices) -> "Domain":
        return cls(np.asarray(vertices, dtype=float))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def measure(self) -> float:
        if self.dim == 1:
            return float(self.vertices[1, 0] - self.vertices[0, 0])
        return float(_signed_area(self.vertices))

    @property
    def bbox(self) -> tuple:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def halfplanes(self) -> tuple:
        """Outward unit normals ``n`` and offsets ``b`` with ``<n, x> <= b`` inside."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1)[:, None]
        return n, np.einsum("ij,ij->i", n, v)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.dim == 1:
            return (pts[:, 0] >= self.vertices[0, 0] - tol) & (pts[:, 0] <= self.vertices[1, 0] + tol)
        n, b = self.halfplanes()
        return np.all(pts @ n.T <= b + tol, axis=1)

    def boundary_samples(self, per_edge: int = 16) -> np.ndarray:
        if self.dim == 1:
            return self.vertices.copy()
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        t = np.linspace(0.0, 1.0, per_edge, endpoint=False)[:, None, None]
        return (v + t * (w - v)).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Domain":
        return cls(np.asarray(d["vertices"], dtype=float))


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class BoundaryDatum:
    """Affine datum ``u(x) = <xi0, x> + c``."""

    xi0: tuple
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "xi0", tuple(float(v) for v in np.atleast_1d(self.xi0)))

    @property
    def dim(self) -> int:
        return len(self.xi0)

    @property
    def gradient(self) -> np.ndarray:
        return np.array(self.xi0)

    def __call__(self, x):
        pts = np.asarray(x, dtype=float).reshape(-1, self.dim)
        out = pts @ self.gradient + self.c
        return out if np.ndim(x) > (0 if self.dim == 1 else 1) else float(out[0])

    def to_dict(self) -> dict:
        return {"kind": "affine", "xi0": list(self.xi0), "c": self.c}


def load_field(path) -> ScalarField:
    """Read a field definition file (JSON)."""
    return ScalarField.from_dict(json.loads(Path(path).read_text()))


def save_field(f: ScalarField, path) -> None:
    Path(path).write_text(json.dumps(f.to_dict(), indent=2))


def as_point(xi, dim: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(xi, dtype=float)).reshape(-1)
    if p.shape[0] != dim:
        raise ValueError(f"expected a point in R^{dim}, got {xi!r}")
    return p


def random_fourier_field(rng: np.random.Generator, n_modes: int = 4, amplitude: float = 1.0) -> ScalarField:
    """Random continuous coercive 1D density: ``x**2`` plus a few sine bumps."""
    amps = rng.uniform(-amplitude, amplitude, n_modes)
    freqs = rng.uniform(0.5, 4.0, n_modes)
    phases = rng.uniform(0.0, 2 * np.pi, n_modes)
    terms = " + ".join(f"({float(a)!r})*sin(({float(k)!r})*x + ({float(p)!r}))" for a, k, p in zip(amps, freqs, phases))
    coer = CoercivityTag(1.0, 2.0, float(np.sum(np.abs(amps))))
    return ScalarField.analytic(f"x**2 + {terms}", 1, coer, "random-fourier")

