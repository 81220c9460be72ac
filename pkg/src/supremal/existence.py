"""Existence verdicts for the supremal problem with affine or piecewise affine data.

For affine data with gradient ``xi0`` the relaxed value is ``v = f_lc(xi0)``,
and a minimizer exists exactly when ``xi0`` lies in ``{f <= v}`` or in the
interior of ``{f_lc <= v}``.  On a grid the second set is the hull of the
sampled first set, so the verdict reduces to point location.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from . import geometry as geo
from .config import DEFAULT_TOL, ToleranceConfig
from .envelope import EnvelopeResult, envelope, envelope_at
from .errors import NotApplicable, NotInHull
from .fields import GridSpec, ScalarField, as_point


class Decision(enum.Enum):
    EXISTS = "exists"
    NOT_EXISTS = "not_exists"
    UNKNOWN = "unknown"


class Branch(enum.Enum):
    IN_LEVEL_SET_OF_F = "in_level_set_of_f"
    INTERIOR_OF_ENVELOPE_LEVEL_SET = "interior_of_envelope_level_set"


class Uniqueness(enum.Enum):
    UNIQUE_AFFINE = "unique_affine"
    POSSIBLY_NON_UNIQUE = "possibly_non_unique"


@dataclass(frozen=True)
class ExistenceVerdict:
    xi0: tuple
    relaxed_value: float
    f_value: float
    decision: Decision
    branch: Optional[Branch] = None
    certificate: Optional[dict] = None
    reason: str = ""
    margins: dict = field(default_factory=dict)
    grid: Optional[GridSpec] = None
    sufficient: bool = False

    @property
    def exists(self) -> bool:
        return self.decision is Decision.EXISTS

    @property
    def normal(self):
        """Separating direction of a NotExists verdict."""
        return None if self.certificate is None else self.certificate.get("nu")

    def to_dict(self) -> dict:
        cert = None
        if self.certificate is not None:
            cert = {k: (np.asarray(v).tolist() if isinstance(v, (np.ndarray, tuple)) else v)
                    for k, v in self.certificate.items()}
        return {
            "xi0": list(self.xi0),
            "relaxed_value": self.relaxed_value,
            "f_value": self.f_value,
            "decision": self.decision.value,
            "branch": None if self.branch is None else self.branch.value,
            "certificate": cert,
            "reason": self.reason,
            "margins": {k: float(v) for k, v in self.margins.items()},
            "grid": None if self.grid is None else self.grid.to_dict(),
            "sufficient": self.sufficient,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExistenceVerdict":
        return cls(
            xi0=tuple(d["xi0"]),
            relaxed_value=d["relaxed_value"],
            f_value=d["f_value"],
            decision=Decision(d["decision"]),
            branch=None if d["branch"] is None else Branch(d["branch"]),
            certificate=d["certificate"],
            reason=d["reason"],
            margins=dict(d["margins"]),
            grid=None if d["grid"] is None else GridSpec.from_dict(d["grid"]),
            sufficient=d["sufficient"],
        )

    def summary(self) -> str:
        s = f"{self.decision.value}"
        if self.branch is not None:
            s += f" ({self.branch.value})"
        if self.normal is not None:
            s += f" nu={np.ravel(self.normal).tolist()}"
        if self.reason:
            s += f" [{self.reason}]"
        return s + f" relaxed_value={self.relaxed_value:.6g}"


def _env(f, grid, env, tol):
    if env is not None:
        return env
    if grid is None:
        if f.kind != "sampled":
            raise ValueError("a grid is needed for analytic fields")
        grid = f.grid
    return envelope(f, grid, tol, certificates=False)


def _fval(f: ScalarField, p: np.ndarray) -> float:
    return float(f.eval(p if len(p) == 2 else p[0]))


def relaxed_value_affine(f: ScalarField, xi0, grid: GridSpec | None = None, tol: ToleranceConfig = DEFAULT_TOL,
                         env: EnvelopeResult | None = None, with_certificate: bool = False):
    """Relaxed value ``f_lc(xi0)`` over the grid nodes plus ``xi0``."""
    env = _env(f, grid, env, tol)
    value, cert = envelope_at(env, xi0, f, tol)
    return (value, cert) if with_certificate else value


def resolution_margin(grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Distance below which a 2D interior verdict is not trusted."""
    if grid.dim == 1:
        return 10 * tol.geom
    return max(10 * tol.geom, float(np.linalg.norm(grid.spacing)))


def decide_affine(f: ScalarField, xi0, grid: GridSpec | None = None, tol: ToleranceConfig = DEFAULT_TOL,
                  env: EnvelopeResult | None = None) -> ExistenceVerdict:
    """Verdict for affine boundary data with gradient ``xi0``.

    Pass a precomputed ``env`` when deciding many points on one grid.
    """
    env = _env(f, grid, env, tol)
    grid = env.grid
    p = as_point(xi0, grid.dim)
    key = tuple(map(float, p))
    v, cert = envelope_at(env, p, f, tol)
    fx = _fval(f, p)
    gap = fx - v
    margins = {"level_gap": gap}
    base = dict(xi0=key, relaxed_value=v, f_value=fx, grid=grid)
    if gap <= tol.level:
        return ExistenceVerdict(**base, decision=Decision.EXISTS, branch=Branch.IN_LEVEL_SET_OF_F,
                                certificate={"witnesses": [list(map(float, np.ravel(q))) for q, _, _ in cert[:1]]},
                                margins=margins)
    if gap <= 10 * tol.level:
        return ExistenceVerdict(**base, decision=Decision.UNKNOWN, reason="level gap within tolerance band",
                                margins=margins)

    body = env.sublevel_hull(v, tol)
    dist = float(body.signed_distance(p[None, :])[0])
    margins["boundary_distance"] = dist
    loc = geo.locate(body, p)
    if loc is geo.PointLocation.INTERIOR:
        need = resolution_margin(grid, tol)
        if dist > need:
            return ExistenceVerdict(**base, decision=Decision.EXISTS, branch=Branch.INTERIOR_OF_ENVELOPE_LEVEL_SET,
                                    certificate={"witnesses": [[float(c) for c in np.ravel(q)] for q, _, _ in cert],
                                                 "weights": [float(w) for _, w, _ in cert]},
                                    margins=margins)
        return ExistenceVerdict(**base, decision=Decision.UNKNOWN,
                                reason="interior of the sampled level set only within grid resolution",
                                margins=margins)
    if loc is geo.PointLocation.BOUNDARY:
        if grid.dim == 1:
            return ExistenceVerdict(**base, decision=Decision.UNKNOWN,
                                    reason="1D boundary point with f above the relaxed value (sampling artefact)",
                                    margins=margins)
        nu = geo.separating_direction(body, p)
        certificate = {
            "nu": tuple(map(float, nu)),
            "level_set_kind": body.kind,
            "strict_in_one_direction": True,
            "strict_at_point": bool(np.min(np.linalg.norm(body.vertices - p, axis=1)) <= tol.geom),
        }
        return ExistenceVerdict(**base, decision=Decision.NOT_EXISTS, certificate=certificate, margins=margins)
    return ExistenceVerdict(**base, decision=Decision.UNKNOWN, reason="outside the sampled level-set hull",
                            margins=margins)


def decide_sweep(f: ScalarField, points, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL) -> list:
    """Decide many affine data on one envelope."""
    env = envelope(f, grid, tol, certificates=False)
    return [decide_affine(f, p, tol=tol, env=env) for p in points]


def flatness_components(env: EnvelopeResult, tol: ToleranceConfig = DEFAULT_TOL) -> list:
    """Connected components of ``{f_lc < f}`` with the spread of ``f_lc`` on each."""
    mask = env.values < env.field_values - tol.level
    labels, n = ndimage.label(mask)
    out = []
    for k in range(1, n + 1):
        vals = env.values[labels == k]
        out.append({"size": int(vals.size), "min": float(vals.min()), "max": float(vals.max()),
                    "flat": bool(vals.max() - vals.min() <= tol.level)})
    return out


def decide_general(f: ScalarField, u0, grid: GridSpec | None = None, relaxed_value: float | None = None,
                   tol: ToleranceConfig = DEFAULT_TOL, env: EnvelopeResult | None = None) -> ExistenceVerdict:
    """Sufficient test for piecewise affine data ``u0``.

    Every cell gradient must lie in ``{f <= v}`` or well inside the hull of
    it.  Without an explicit ``relaxed_value`` the envelope at the mean
    gradient is used; it is exact in 1D and a lower bound in 2D, which only
    makes the test stricter.
    """
    env = _env(f, grid, env, tol)
    grid = env.grid
    mean = np.atleast_1d(u0.mean_gradient())
    v = float(relaxed_value) if relaxed_value is not None else envelope_at(env, mean, f, tol)[0]
    grads = np.asarray(u0.gradients()).reshape(-1, grid.dim)
    try:
        body = env.sublevel_hull(v, tol)
    except NotInHull:
        body = None
    need = resolution_margin(grid, tol)
    failing = []
    for k, g in enumerate(grads):
        if _fval(f, g) <= v + tol.level:
            continue
        if body is not None and float(body.signed_distance(g[None, :])[0]) > need:
            continue
        failing.append(k)
    base = dict(xi0=tuple(map(float, mean)), relaxed_value=v, f_value=_fval(f, mean), grid=grid,
                margins={"cells": float(len(grads)), "failing": float(len(failing))})
    diag = {"flatness_components": flatness_components(env, tol)}
    if not failing:
        return ExistenceVerdict(**base, decision=Decision.EXISTS, sufficient=True, certificate=diag,
                                reason="every cell gradient satisfies the sufficient condition")
    diag["failing_cells"] = failing
    diag["failing_gradients"] = grads[failing].tolist()
    return ExistenceVerdict(**base, decision=Decision.UNKNOWN, certificate=diag,
                            reason=f"{len(failing)} cell(s) fail the sufficient condition")


@dataclass(frozen=True)
class FlatnessReport:
    best_direction: tuple
    max_deviation: float
    constant: bool
    deviations: np.ndarray = field(repr=False)


def flatness_necessary_check(f: ScalarField, xi0, eps: float, grid: GridSpec | None = None,
                             tol: ToleranceConfig = DEFAULT_TOL, env: EnvelopeResult | None = None,
                             n_directions: int = 72) -> FlatnessReport:
    """Look for a half-ball of radius ``eps`` at ``xi0`` on which ``f_lc`` is constant."""
    env = _env(f, grid, env, tol)
    grid = env.grid
    p = as_point(xi0, grid.dim)
    v = envelope_at(env, p, f, tol)[0]
    if _fval(f, p) <= v + tol.level:
        raise NotApplicable("f equals its envelope at xi0")
    lc = env.as_field()
    if grid.dim == 1:
        dirs = np.array([[1.0], [-1.0]])
        pts = p + np.linspace(-eps, eps, 201)[:, None]
    else:
        ang = np.linspace(0, 2 * np.pi, n_directions, endpoint=False)
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
        r = np.linspace(0, eps, 17)[1:]
        th = np.linspace(0, 2 * np.pi, 144, endpoint=False)
        R, T = np.meshgrid(r, th, indexing="ij")
        pts = np.vstack([p[None, :], p + np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])])
    pts = pts[grid.contains(pts)]
    vals = np.asarray(lc.eval(pts if grid.dim == 2 else pts[:, 0])).reshape(-1)
    side = (pts - p) @ dirs.T >= -1e-12
    dev = np.array([np.ptp(vals[side[:, k]]) if side[:, k].any() else np.inf for k in range(len(dirs))])
    k = int(np.argmin(dev))
    best = tuple(map(float, dirs[k]))
    return FlatnessReport(best, float(dev[k]), bool(dev[k] <= tol.level), dev)


def uniqueness_probe(f: ScalarField, xi0, grid: GridSpec, tol: ToleranceConfig = DEFAULT_TOL,
                     check: bool = True) -> Uniqueness:
    """Affine map is the only minimizer when ``xi0`` is on the boundary of its level set."""
    from .convexity import strict_in_one_direction

    d = strict_in_one_direction(f, xi0, grid, tol, check=check)
    return Uniqueness.POSSIBLY_NON_UNIQUE if d is None else Uniqueness.UNIQUE_AFFINE
