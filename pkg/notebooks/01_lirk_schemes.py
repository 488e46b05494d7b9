# %% [markdown]
# # Linearly implicit Runge-Kutta schemes
#
# The two-parameter family `p = (p1, p2)` treats the diffusion term implicitly
# and the nonlinearity explicitly. Every member is second order; `p = (1/2, 1/2)`
# is the Crank-Nicolson explicit midpoint scheme.

# %%
import numpy as np

from adann.grid import GridSpec
from adann.lirk import (CRANK_NICOLSON, LirkParams, OdeSystem, check_order2_conditions,
                        crank_nicolson_midpoint_step, lirk_step2, order2_tableau, rollout)
from adann.problems import NONLINEARITIES

# %% [markdown]
# ## Tableaux and order conditions

# %%
for p in [LirkParams(0.5, 0.5), LirkParams(1.0, 0.5), LirkParams(0.3, 0.7)]:
    t = order2_tableau(p)
    ok, res = check_order2_conditions(t)
    print(p, "b =", t.b, "beta_21 =", t.beta[1, 0], "order 2:", ok, "residuals", res)

# %% [markdown]
# ## The closed Crank-Nicolson form matches the family member

# %%
grid = GridSpec(1, 35, "dirichlet", 1 / 100)
system = OdeSystem(grid.laplacian(), NONLINEARITIES["reaction_diffusion"])
U = np.random.default_rng(0).standard_normal((1000, 35))
diff = crank_nicolson_midpoint_step(system, 0.2, U) - lirk_step2(CRANK_NICOLSON, system, 0.2, U)
print("max difference over 1000 states:", np.abs(diff).max())

# %% [markdown]
# ## Heat decay against separation of variables
#
# With `f = 0` and `g = sin(pi x)` the exact terminal value is
# `exp(-pi^2/100) sin(pi x)`.

# %%
heat = OdeSystem(grid.laplacian(), NONLINEARITIES["zero"])
x = grid.nodes()
exact = np.exp(-np.pi**2 / 100) * np.sin(np.pi * x)
for M in (5, 10, 20, 40):
    err = np.abs(rollout(CRANK_NICOLSON, heat, 1.0, M, np.sin(np.pi * x)) - exact).max()
    print(f"M={M:3d}  max error {err:.3e}")

# %% [markdown]
# ## Observed convergence order
#
# Halving the step size should divide the error by about four.

# %%
g = np.sin(np.pi * x) + 0.5 * np.sin(2 * np.pi * x)
for p in (CRANK_NICOLSON, LirkParams(0.3, 0.7)):
    ref = rollout(p, system, 1.0, 512, g)
    err = [np.abs(rollout(p, system, 1.0, M, g) - ref).max() for M in (8, 16, 32, 64)]
    print(p, "orders", np.round(np.log2(np.array(err[:-1]) / err[1:]), 3))
