"""In one dimension a minimizer always exists: a sawtooth does the job.

The double well f(x) = (x**2 - 1)**2 is not level convex, yet for any
boundary slope the relaxed value is reached by a function whose slope
alternates between two points of the relaxed level set.
"""

import numpy as np

from supremal import Domain, GridSpec, builtin, decide_affine, envelope_1d, relaxed_min_1d, solve_P
from supremal.convexity import check_level_convex
from supremal.oracle import audit_solution, jensen_audit

f = builtin("double-well-1d")
grid = GridSpec(-2, 2, 401)

print("level convex?", check_level_convex(f, grid))  # witness: the two wells and their midpoint

env = envelope_1d(f, grid)
x = grid.axes()[0]
print("envelope at -1.5, -0.5, 0, 0.5, 1.5:", np.interp([-1.5, -0.5, 0, 0.5, 1.5], x, env.values))

domain = Domain.interval(0.0, 1.0)
for xi0 in [0.0, 0.4, 1.2]:
    verdict = decide_affine(f, xi0, grid)
    u, report = solve_P(f, xi0, grid, domain, pieces=6)
    oracle = relaxed_min_1d(f, xi0)
    print(f"\nxi0 = {xi0}: {verdict.summary()}")
    print(f"  constructed: {len(u.cells)} pieces, slopes {sorted(set(u.gradients()[:, 0].round(12).tolist()))}")
    print(f"  max f(u') = {report.ess_sup:.3g}, bisection oracle = {oracle.value:.3g}, "
          f"distance to the affine map = {report.sup_distance:.3g}")
    print("  audit:", audit_solution(f, u, report.relaxed_value).to_dict())

# the sawtooth breaks Jensen's inequality for f itself, but not for its envelope
u, _ = solve_P(f, 0.0, grid, domain, pieces=2)
print("\nJensen on f:", jensen_audit(f, u).holds, "  on the envelope:", jensen_audit(env.as_field(), u).holds)

# refining the sawtooth brings it uniformly closer to the boundary data
for pieces in (1, 2, 4, 8, 16):
    u, report = solve_P(f, 0.0, grid, domain, pieces=pieces)
    print(f"pieces={pieces:2d}  sup |u - u0| = {report.sup_distance:.5f}")
