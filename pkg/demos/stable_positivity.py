# %% [markdown]
# # Positivity of stable walks
#
# Spitzer's condition says P(S_n > 0) tends to rho. For a symmetric Gaussian
# walk rho = 1/2. For alpha = 1.5 with full right skew rho = 1/3.

# %%
from curvewalk.increments import StableExact
from curvewalk.ladder import spitzer_positivity
from curvewalk.rng import RngStream

for alpha, beta in ((2.0, 0.0), (1.5, 1.0)):
    est = spitzer_positivity(StableExact(alpha, beta), 1000, 20000, RngStream(3))
    print(f"alpha={alpha}, beta={beta}: P(S_n > 0) = {est.mean:.4f} +- {est.stderr:.4f}")
