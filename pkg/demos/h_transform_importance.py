# %% [markdown]
# # The h-transformed walk and importance sampling
#
# Conditioning the walk to stay nonnegative gives a Markov chain with kernel
# p(x, y) h(y) / h(x). Sampling from it and reweighting by h(start) / h(S_n)
# estimates P(T_0 > n) with far smaller error than plain simulation.

# %%
from curvewalk.boundary import Constant, Kind
from curvewalk.htransform import build_kernel, estimate_never_cross, importance_survival, kernel_row
from curvewalk.increments import Lattice
from curvewalk.ladder import survival_T0
from curvewalk.oracle import dp_conditioned_survival, dp_survival
from curvewalk.rng import RngStream

rademacher = Lattice.rademacher()
kernel = build_kernel(rademacher, 1100)
print("row at 2:", kernel_row(kernel, 2))

# %%
grid = [16, 64, 256, 1024]
est = importance_survival(kernel, None, grid, 20000, RngStream(7))
plain = survival_T0(rademacher, grid, 20000, RngStream(8))
exact = dp_survival(rademacher, None, Kind.ZERO, n_grid=grid).prob
for n, e, p, s in zip(grid, est, exact, plain.stderr):
    print(f"n={n}: IS {e.mean:.5f} +- {e.stderr:.1e}, plain stderr {s:.1e}, exact {p:.5f}")

# %% [markdown]
# Never crossing a constant boundary: started on the boundary, the conditioned
# chain keeps a positive probability of staying above it forever.

# %%
N = [2**k for k in range(2, 11)]
mc = estimate_never_cross(kernel, Constant(5), N, 20000, RngStream(9), start=5)
dp = dp_conditioned_survival(rademacher, Constant(5), N, start=5)
for n, m, d in zip(N, mc.means, dp):
    print(n, round(float(m), 4), round(float(d), 4))
