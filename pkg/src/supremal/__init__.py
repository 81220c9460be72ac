"""Level-convex envelopes and existence of minimizers for supremal functionals.

The problem is to minimize ``ess sup f(grad u)`` over Lipschitz ``u`` with
affine boundary values.  The package computes the level-convex envelope of
a sampled density, decides whether a minimizer exists, builds explicit
piecewise affine minimizers when it does, and cross-checks all of it with
brute-force oracles.
"""

from .config import DEFAULT_TOL, ToleranceConfig
from .convexity import (
    StrictnessReport,
    check_level_convex,
    classify,
    danao_consistency,
    strict_at_point,
    strict_in_one_direction,
    strict_via_perturbation,
)
from .envelope import (
    EnvelopeResult,
    envelope,
    envelope_1d,
    envelope_at,
    envelope_caratheodory,
    envelope_levelsweep,
    lsc_envelope_grid,
)
from .existence import (
    Branch,
    Decision,
    ExistenceVerdict,
    Uniqueness,
    decide_affine,
    decide_general,
    decide_sweep,
    flatness_necessary_check,
    relaxed_value_affine,
    uniqueness_probe,
)
from .fields import BoundaryDatum, CoercivityTag, Domain, GridSpec, ScalarField, builtin, builtin_names
from .geometry import ConvexBody, PointLocation, hull, locate, separating_direction
from .inclusion import (
    InclusionTarget,
    PiecewiseAffineFunction,
    pyramid_cell,
    solve_P,
    vitali_fill,
    zigzag_1d,
)
from .oracle import audit_solution, jensen_audit, relaxed_min_1d, relaxed_min_2d

__version__ = "0.1.0"
