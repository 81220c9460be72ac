"""An upper-bound oracle: search over mesh functions for a small max f(grad u).

On a fixed union-jack mesh the search minimizes a smoothed maximum of
f(grad u) over interior nodal values.  Its value bounds the relaxed value
from above, and the level-convex envelope bounds it from below.
"""

import time

from supremal import Domain, GridSpec, builtin, envelope, relaxed_min_2d

f = builtin("example-4-5")
env = envelope(f, GridSpec((-2, -2), (2, 2), 65), certificates=False)
print("relaxed value at the origin (envelope):", env.value_at((0.0, 0.0), f))

# a thin rhombus elongated along x2: the mesh can zigzag between slopes +-1 in x1
rhombus = Domain.polygon([[0, -1], [0.1, 0], [0, 1], [-0.1, 0]])
for n in (3, 5, 9):
    t0 = time.perf_counter()
    r = relaxed_min_2d(f, (0.0, 0.0), rhombus, n=n, restarts=4)
    print(f"rhombus, {n}x{n} mesh: max f(grad u) = {r.value:.6f} ({time.perf_counter() - t0:.1f}s)")

# on the square every boundary triangle has an edge along x2 where u = 0,
# so d u / d x1 = 0 there and f >= 1 on that cell whatever the interior does
r = relaxed_min_2d(f, (0.0, 0.0), Domain.box(), n=9, restarts=4)
print(f"square, 9x9 mesh: max f(grad u) = {r.value:.6f}")

# where f is level convex the oracle meets the envelope
for name, p in [("max-norm", (0.3, 0.2)), ("sq-norm", (0.5, -0.25))]:
    g = builtin(name)
    r = relaxed_min_2d(g, p, Domain.box(), n=5, restarts=2)
    print(f"{name} at {p}: oracle {r.value:.6f}, f itself {g(p):.6f}")
