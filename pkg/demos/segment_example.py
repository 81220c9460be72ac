"""When the relaxed problem has a unique solution and f sits above it, nothing is attained.

Density f(x1, x2) = (x1**2 - 1)**2 + x2**2.  It vanishes only at (+-1, 0),
so the zero set of its level-convex envelope is the segment joining them.
Affine data with gradient on that segment has relaxed value 0, but the
segment has no interior: no Lipschitz function can keep its gradient
there while matching the boundary data, and the minimum is never reached.
"""

import numpy as np

from supremal import Decision, GridSpec, builtin, decide_affine, envelope, envelope_at

f = builtin("example-4-5")
grid = GridSpec((-2, -2), (2, 2), 65)
env = envelope(f, grid)
print(f"envelope on {grid.size} nodes, {len(env.hulls)} distinct sublevel hulls")

# the envelope is xi2**2 on the strip |xi1| <= 1 and vanishes on the segment
for p in [(0.0, 0.0), (0.5, 0.0), (0.3, 0.1), (0.0, 0.5), (1.5, 0.0)]:
    v, cert = envelope_at(env, p, f)
    print(f"f{p} = {f(p):.4f}   envelope = {v:.4f}   witnesses {[q for q, _, _ in cert]}")

zero = env.sublevel_hull(0.0)
print("zero level set of the envelope:", zero.kind, zero.vertices.tolist())

# the verdict at the origin, with the separating normal as certificate
verdict = decide_affine(f, (0.0, 0.0), env=env)
print(verdict.summary())
print("certificate:", verdict.certificate)

# a small phase map: N = no minimizer, E = exists, ? = below grid resolution
ticks = np.linspace(-1.5, 1.5, 25)
symbol = {Decision.EXISTS: "E", Decision.NOT_EXISTS: "N", Decision.UNKNOWN: "?"}
print("\nverdicts for xi0 in [-1.5, 1.5]^2 (xi2 grows upward)")
for b in ticks[::-1]:
    row = "".join(symbol[decide_affine(f, (a, b), env=env).decision] for a in ticks)
    print(f"{b:+.2f} {row}")
