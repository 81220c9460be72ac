"""Four wells at (+-1, 0) and (0, +-1): building a minimizer in the plane.

The origin lies inside the hull of the wells, so a minimizer exists.  It is
assembled from pyramids: on each fan triangle the gradient is one of the
wells, and on the rim the pyramid meets the (zero) boundary data.  Scaled
copies are packed greedily into the domain until the uncovered part is
below the requested fraction.
"""

import time

import numpy as np

from supremal import Domain, GridSpec, InclusionTarget, builtin, decide_affine, pyramid_cell, solve_P, vitali_fill

f = builtin("four-well")
wells = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])

body, pyramid = pyramid_cell(InclusionTarget(wells, [0.0, 0.0]))
print("pyramid support:", body.vertices.tolist())
print("fan gradients:", pyramid.gradients().tolist())
print("apex height:", pyramid.values[0], " rim values:", pyramid.values[1:].tolist())

quad = Domain.polygon([[0, 0], [1, 0], [1, 0.6], [0.2, 1]])
for residual in (0.2, 0.05, 0.01):
    t0 = time.perf_counter()
    u = vitali_fill(InclusionTarget(wells, [0.0, 0.0]), quad, residual_tol=residual)
    print(f"target residual {residual:<5}: {len(u.cells) // 4:5d} copies, residual {u.residual_fraction:.4f}, "
          f"mean gradient {np.round(u.mean_gradient(), 12).tolist()}, {time.perf_counter() - t0:.2f}s")

# capping the copy size keeps u uniformly close to the boundary data
for cap in (0.2, 0.1, 0.05):
    u = vitali_fill(InclusionTarget(wells, [0.0, 0.0]), quad, residual_tol=0.1, max_scale=cap, max_cells=400)
    print(f"max scale {cap}: sup |u - u0| = {u.sup_deviation():.3f}")

# the full pipeline: decide, then build, then report
grid = GridSpec((-2, -2), (2, 2), 65)
print("\n" + decide_affine(f, (0.0, 0.0), grid).summary())
u, report = solve_P(f, (0.0, 0.0), grid, quad)
print({k: v for k, v in report.to_dict().items() if k not in ("verdict", "gradient_set")})

# a point on an edge of the wells' hull has a relaxed value of 0 but no minimizer
print(decide_affine(f, (0.5, 0.5), grid).summary())
