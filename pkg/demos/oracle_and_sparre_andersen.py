# %% [markdown]
# # Exact survival curves and the Sparre Andersen identity
#
# For a lattice walk the dynamic-programming oracle gives P(T_0 > n) exactly.
# The positivity recursion for q_n reproduces these values with no walk
# simulation at all.

# %%
import math
from fractions import Fraction

from curvewalk.boundary import Kind
from curvewalk.increments import Lattice
from curvewalk.oracle import dp_survival
from curvewalk.whbound import positivity_probs, qn_sequence

rademacher = Lattice.rademacher()
curve = dp_survival(rademacher, None, Kind.ZERO, 20, exact=True)
for n in (0, 1, 2, 3, 10, 20):
    print(n, curve.exact[n], math.comb(n, n // 2) / 2**n)

# %% [markdown]
# The identity does not need a centred walk, so a drifting lattice works too.

# %%
drift = Lattice([-2, 1], [Fraction(1, 4), Fraction(3, 4)], require_centered=False)
q = qn_sequence(positivity_probs(drift, None, 60))
p = dp_survival(drift, None, Kind.ZERO, 60, exact=True).exact
print("exact equality:", list(q) == list(p), "P(T_0 > 60) =", float(p[60]))
