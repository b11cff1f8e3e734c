# %% [markdown]
# # Integral tests and the positivity bound
#
# Each integral test classifies a boundary as convergent or divergent from its
# power and log exponents. The positivity bound q_n >= P(T_g > n) can then be
# checked exactly for superadditive boundaries.

# %%
import numpy as np

from curvewalk.boundary import Power, PowerLog, Tabulated, Test, classify
from curvewalk.increments import Lattice
from curvewalk.whbound import bound_check

rademacher = Lattice.rademacher()
for gamma in (0.25, 0.45, 0.6, 0.9):
    g = Power(1, gamma)
    print(gamma, {t.name: classify(t, g, rademacher).verdict.value for t in Test})

split = PowerLog(1.0, 0.5, -1.2)
print("split boundary:", {t.name: classify(t, split, rademacher).verdict.value for t in Test})

# %%
g = Tabulated.from_function(lambda t: np.maximum(0, t - 10), 300, index=1.0)
rep = bound_check(rademacher, g, 256, exact=True)
print("precondition:", rep.precondition_ok, "bound holds:", rep.holds, "min slack:", float(rep.worst_slack))
