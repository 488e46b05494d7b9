# %% [markdown]
# # The LIRK-initialized base model
#
# Each of the `M` blocks holds five `d x d` matrices. Built from LIRK parameters,
# the untrained model reproduces `M` steps of the scheme exactly. Training then
# moves the matrices freely.

# %%
import numpy as np

from adann import base_model as bm
from adann.dataset_io import sample_inputs
from adann.lirk import LirkParams, rollout
from adann.problems import get_problem
from adann.training import base_loss

pr = get_problem("rd1d")
system = pr.coarse_system()
f = pr.nonlinearity

# %% [markdown]
# ## Initialization identity over the sweep grid

# %%
U = pr.restrict(sample_inputs(pr, 1, range(20)))
worst = 0.0
for p in pr.sweep_grid:
    W = bm.from_lirk_params(p, system.A, pr.terminal_time, pr.base_steps)
    ref = rollout(LirkParams(*p), system, pr.terminal_time, pr.base_steps, U)
    worst = max(worst, np.abs(bm.forward(W, f, U) - ref).max())
print(f"{len(pr.sweep_grid)} grid points, worst deviation {worst:.2e}")
print("trainable parameters:", W.n_params, "= 5 * M * d^2 =", 5 * pr.base_steps * pr.d**2)

# %% [markdown]
# ## Hand-derived gradients vs finite differences

# %%
rng = np.random.default_rng(0)
W = bm.BaseWeights(0.4 * rng.standard_normal((3, 5, 8, 8)))
x, y = rng.standard_normal((2, 6, 8))
loss, grad = base_loss(W, f, x, y)
h = 1e-6
for _ in range(5):
    D = rng.standard_normal(W.W.shape)
    Wp, Wm = bm.BaseWeights(W.W + h * D), bm.BaseWeights(W.W - h * D)
    fd = (base_loss(Wp, f, x, y, with_grad=False) - base_loss(Wm, f, x, y, with_grad=False)) / (2 * h)
    print(f"directional derivative {np.sum(grad * D): .8e}  finite difference {fd: .8e}")
