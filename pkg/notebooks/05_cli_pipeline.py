# %% [markdown]
# # The command-line pipeline
#
# `adann gen-data`, `sweep`, `baseline` and `report` chain into the error
# table for the reaction-diffusion preset. Each call below is equivalent to a
# shell invocation such as `adann gen-data --problem rd1d --n 2048 --out ...`.
# Step budgets are cut down so the script runs in a couple of minutes.

# %%
import csv
import tempfile
from pathlib import Path

from adann.cli import main

work = Path(tempfile.mkdtemp(prefix="adann-"))
data = str(work / "rd1d.adann")
fast = ["--base-steps", "200", "--diff-steps", "200"]

main(["gen-data", "--problem", "rd1d", "--n", "2048", "--seed", "0", "--out", data])
main(["sweep", "--problem", "rd1d", "--mode", "adaptive", "--runs", "3", "--data", data,
      "--out", str(work / "adaptive")] + fast)
main(["baseline", "--problem", "rd1d", "--method", "cn", "--data", data, "--out", str(work / "cn")])
main(["baseline", "--problem", "rd1d", "--method", "ann", "--ann-steps", "200", "--ann-runs", "1",
      "--data", data, "--out", str(work / "ann")])
main(["report", "--runs", str(work / "adaptive"), "--baselines", str(work / "ann"), str(work / "cn"),
      "--out", str(work / "table.csv")])

# %%
with open(work / "table.csv", newline="") as fh:
    for row in csv.DictReader(fh, delimiter=";"):
        print(f"{row['method']:32s} L2 {row['L2_error'][:10]:>10s}  params {row['trainable_params']:>6s}")
print("outputs in", work)
