# %% [markdown]
# # Training, sweeps and run selection
#
# A run initializes the base model from `p`, trains it, estimates the error
# scale and trains a difference network on the scaled residual. The grid sweep
# visits fixed `p`; the adaptive sweep either starts a new base model or
# attaches another difference network to the best existing one.
#
# Budgets here are far below the defaults so the script finishes in a few
# minutes.

# %%
import logging

import numpy as np

from adann.dataset_io import generate_dataset, split_dataset
from adann.lirk import CRANK_NICOLSON, rollout
from adann.orchestration import RunData, SweepPlan, adaptive_sweep, grid_sweep, select_best_run
from adann.problems import get_problem
from adann.training import TrainConfig, evaluate

logging.basicConfig(level=logging.INFO, format="%(message)s")
pr = get_problem("rd1d")
data = RunData.from_splits(split_dataset(generate_dataset(pr, 4096, seed=0)))
base_cfg = TrainConfig(lr=1e-4, steps=500)
diff_cfg = TrainConfig(lr=1e-3, steps=500)

# %% [markdown]
# ## Grid sweep over a coarse subset of the 9 x 7 grid

# %%
plan = SweepPlan("grid", points=pr.sweep_grid[::8])
records, heat = grid_sweep(plan, pr, data, base_cfg, diff_cfg)
print(f"{'p1':>4} {'p2':>4} {'init':>10} {'base':>10} {'full':>10}")
for row in heat:
    print(f"{row['p1']:4.1f} {row['p2']:4.1f} {row['init_L2']:10.3e} {row['base_L2']:10.3e} {row['full_L2']:10.3e}")

# %% [markdown]
# ## Adaptive sweep and comparison with Crank-Nicolson

# %%
runs = adaptive_sweep(SweepPlan.adaptive_for(pr, 4), pr, data, base_cfg, diff_cfg, seed=1)
print("actions:", "".join(r.action for r in runs))
best = select_best_run(runs, pr.nonlinearity, data.selection)
adann = evaluate(lambda u: best.predict(pr.nonlinearity, u), *data.test)
system = pr.coarse_system()
for M in (15, 20):
    cn = evaluate(lambda u: rollout(CRANK_NICOLSON, system, 1.0, M, u), *data.test)
    print(f"CN M={M}: L1 {cn.l1:.3e}  L2 {cn.l2:.3e}")
print(f"ADANN run {best.run} p=({best.p1:.2f}, {best.p2:.2f}): L1 {adann.l1:.3e}  L2 {adann.l2:.3e}")
