# %% [markdown]
# # Boundary crossing ratios
#
# Compare survival below a boundary g with survival of T_0. For a constant
# boundary x the ratio tends to h(x) = x + 1. For g(n) = 1 + n^{1/4} it keeps
# drifting upward slowly over the dyadic range that is practical to compute.

# %%
import numpy as np

from curvewalk.boundary import Constant, Kind, Power
from curvewalk.curves import ratio_curve
from curvewalk.increments import Lattice
from curvewalk.oracle import dp_survival, lattice_renewal
from curvewalk.passage import Variant, estimate_V
from curvewalk.rng import RngStream

rademacher = Lattice.rademacher()
grid = [2**k for k in range(6, 14)]
den = dp_survival(rademacher, None, Kind.ZERO, n_grid=grid)
for x in (1, 2, 3):
    r = ratio_curve(dp_survival(rademacher, Constant(x), Kind.LOWER, n_grid=grid), den)
    print(f"x={x}: ratio at 2^13 = {r.ratio[-1]:.4f}, h(x) = {x + 1}")

# %%
g = Power(1, 0.25, 1)
r = ratio_curve(dp_survival(rademacher, g, Kind.LOWER, n_grid=grid), den)
print("ratios:", np.round(r.ratio, 4).tolist())
print(f"last doubling change: {r.last_doubling_change():.3%}")

# %% [markdown]
# The expectation V(n) = E[h(S_n + g(n)); T_g > n] is a Monte Carlo view of
# the same limit.

# %%
h = lattice_renewal(rademacher, 2**12 + 20).function(1.0)
trace = estimate_V(rademacher, g, Variant.SUB, h, [2**k for k in range(4, 13)], 20000, RngStream(1))
print("V trace:", np.round(trace.means, 3).tolist(), f"final gap {trace.final_gap:.2%}")
