"""Strict level convexity, at a point and in one direction.

Uniqueness for the relaxed problem comes from the shape of the level set
through the boundary gradient: an extreme point is strict, and a boundary
point (say on a flat face) is still strict in the direction of the normal.
"""

from supremal import GridSpec, builtin, classify, envelope
from supremal.convexity import danao_consistency, strict_via_perturbation

line = GridSpec(-2, 2, 81)
plane = GridSpec((-2, -2), (2, 2), 33)

cases = [
    ("halfline-kink", 0.0, line),
    ("dist-halfplane", (0.0, 0.0), plane),
    ("max-norm", (0.2, 0.1), plane),
    ("max-norm", (0.25, 0.25), plane),
    ("sq-norm", (0.5, 0.25), plane),
]
for name, p, grid in cases:
    print(f"{name:15s} at {p}: {classify(builtin(name), p, grid).summary()}")

lc = envelope(builtin("example-4-5"), plane).as_field()
print(f"{'segment envelope':15s} at (0, 0): {classify(lc, (0.0, 0.0), plane).summary()}")

# the double well is not level convex, so the strictness notions do not apply
print("\ndouble well:", classify(builtin("double-well-1d"), 0.0, line).to_dict()["label"])

# global tests: a flat midpoint defeats strictness
print("halfline-kink strictly level convex?", strict_via_perturbation(builtin("halfline-kink"), line))
print("x**2 strictly level convex?", bool(strict_via_perturbation(builtin("sq-norm-1d"), line)))

# every boundary point of a level set is extreme only for strictly convex level sets
print("squares of max-norm:", danao_consistency(builtin("max-norm"), plane, [0.5, 1.0]).passed)
print("discs of |x|:      ", danao_consistency(builtin("abs-2d"), plane, [0.5, 1.0]).passed)
