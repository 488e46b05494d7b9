# %% [markdown]
# # Problems, initial-value laws and reference data
#
# Three presets share diffusion scale 1/100. Initial values are sampled on a
# fine grid that contains the coarse nodes; targets come from a many-step
# Crank-Nicolson solve on that fine grid, restricted to the coarse nodes.

# %%
import tempfile
import time
from pathlib import Path

import numpy as np

from adann.dataset_io import generate_dataset, load, load_dataset, save_dataset, split_dataset
from adann.problems import PRESETS, Grf2d, SineDecay

for name, pr in PRESETS.items():
    print(f"{name:7s} {pr.grid.dimension}D {pr.grid.boundary:9s} coarse d={pr.d:5d} "
          f"fine d={pr.fine_grid.n_unknowns:5d} T={pr.terminal_time} f={pr.nonlinearity.tag} "
          f"reference steps={pr.reference.n_steps}")

# %% [markdown]
# ## Sine-decay law: variance at x = 1/2
#
# Only odd modes contribute there, so the variance is `sum_{n odd} 25 / n^4`.

# %%
law = SineDecay()
Z = np.random.default_rng(0).standard_normal((100_000, law.n_coefficients))
values = law.evaluate(Z, np.array([0.5]))[:, 0]
print("empirical", values.var(), "closed form", sum(25 / n**4 for n in range(1, 33, 2)))

# %% [markdown]
# ## Periodic Gaussian field in 2D
#
# `2 (2I - Lap)^-1 X` is applied in Fourier space, where the circulant
# operator is diagonal.

# %%
grf = Grf2d()
field = grf.sample(np.random.default_rng(1), PRESETS["heat2d"].fine_grid).reshape(80, 80)
print("field range", field.min(), field.max(), "std", field.std())

# %% [markdown]
# ## A small dataset and its container file

# %%
pr = PRESETS["rd1d"]
t0 = time.perf_counter()
ds = generate_dataset(pr, 1024, seed=0)
print(f"1024 samples in {time.perf_counter() - t0:.1f}s, inputs {ds.inputs.shape}, targets {ds.targets.shape}")
parts = split_dataset(ds)
print({k: len(v) for k, v in parts.items()})

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "rd1d.adann"
    save_dataset(path, ds)
    print("magic", path.read_bytes()[:6], "size", path.stat().st_size, "bytes")
    tensors, meta = load(path)
    print("tensors", {k: v.shape for k, v in tensors.items()}, "seed", meta["seed"])
    assert load_dataset(path).targets.tobytes() == ds.targets.tobytes()
