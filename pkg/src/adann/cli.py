"""Batch entry points: ``gen-data``, ``sweep``, ``baseline`` and ``report``.

Every option can also come from a TOML file passed with ``--config``; flags
given on the command line override it, and unknown keys are rejected. Each
command writes its effective configuration next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import base_model as bm
from .dataset_io import generate_dataset, load_dataset, save_checkpoint, save_dataset, split_dataset
from .lirk import CRANK_NICOLSON, rollout
from .mlp import glorot_uniform_init, mlp_forward
from .orchestration import (HEATMAP_COLUMNS, RUN_COLUMNS, RunData, SweepPlan, adaptive_sweep,
                            evaluate_run, grid_sweep, select_best_run, write_csv)
from .problems import PRESETS, get_problem
from .training import TrainConfig, evaluate, time_evaluations, train_mlp

log = logging.getLogger("adann")

REPORT_COLUMNS = ("method", "L1_error", "L2_error", "trainable_params", "training_time", "eval_time")
FNO_PLACEHOLDER = "fno: not implemented"

# full-scale budgets; desk runs divide them
FULL_SAMPLES = {"rd1d": 2**19, "sg1d": 2**19, "heat2d": 2**14}
FULL_STEPS = 16000

DEFAULTS = {
    "problem": "rd1d",
    "seed": 0,
    "n": None,
    "full": False,
    "data_divisor": 32,
    "step_divisor": 8,
    "mode": "grid",
    "runs": 50,
    "exploit_prob": 0.5,
    "base_steps": None,
    "diff_steps": None,
    "base_lr": 1e-4,
    "diff_lr": 1e-3,
    "batch_size": 64,
    "max_batch_size": 1024,
    "eval_every": 50,
    "patience": 5,
    "fractions": [0.75, 0.0625, 0.0625, 0.125],
    "eps_samples": 2048,
    "workers": 1,
    "method": "cn",
    "steps": [15, 16, 17, 18, 19, 20],
    "ann_runs": 3,
    "ann_steps": None,
    "ann_lr": 1e-3,
    "data": None,
    "out": None,
    "runs_dirs": [],
    "baselines": [],
}


class ConfigError(ValueError):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    flat = {}
    for k, v in cfg.items():
        if isinstance(v, dict):  # allow [section] tables, keys must still be known
            flat.update(v)
        else:
            flat[k] = v
    flat = {k.replace("-", "_"): v for k, v in flat.items()}
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return flat


def _effective(args: argparse.Namespace, command: str) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(args.config))
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None and v != []:
            cfg[k] = v
    if cfg["problem"] not in PRESETS:
        raise ConfigError(f"unknown problem preset {cfg['problem']!r}")
    if cfg["full"]:
        cfg["data_divisor"] = cfg["step_divisor"] = 1
    steps = FULL_STEPS // cfg["step_divisor"]
    for key in ("base_steps", "diff_steps", "ann_steps"):
        if cfg[key] is None:
            cfg[key] = steps
    if cfg["n"] is None:
        cfg["n"] = max(1, FULL_SAMPLES[cfg["problem"]] // cfg["data_divisor"])
    cfg["command"] = command
    return cfg


def _echo_config(cfg: dict, path: Path):
    text = json.dumps(cfg, indent=2, sort_keys=True, default=str)
    path.write_text(text + "\n")
    print(text)


def _train_cfg(cfg, steps_key, lr_key) -> TrainConfig:
    return TrainConfig(lr=cfg[lr_key], steps=cfg[steps_key], patience=cfg["patience"],
                       batch_size=cfg["batch_size"], max_batch_size=cfg["max_batch_size"],
                       eval_every=cfg["eval_every"])


def _load_data(cfg):
    if not cfg["data"]:
        raise ConfigError("--data is required")
    path = Path(cfg["data"])
    if not path.exists():
        raise FileNotFoundError(f"dataset {path} does not exist")
    ds = load_dataset(path)
    if ds.problem != cfg["problem"]:
        raise ConfigError(f"dataset is for {ds.problem!r}, not {cfg['problem']!r}")
    return ds, split_dataset(ds, cfg["fractions"])


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _report_row(method, rep, training_time, eval_time):
    return {"method": method, "L1_error": rep.l1, "L2_error": rep.l2, "trainable_params": rep.n_params,
            "training_time": training_time, "eval_time": eval_time}


def _out_dir(cfg) -> Path:
    if not cfg["out"]:
        raise ConfigError("--out is required")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands ---------------------------------------------------------------


def cmd_gen_data(cfg):
    if not cfg["out"]:
        raise ConfigError("--out is required")
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    problem = get_problem(cfg["problem"])
    _echo_config(cfg, out.with_name(out.name + ".config.json"))
    t0 = time.perf_counter()
    ds = generate_dataset(problem, cfg["n"], cfg["seed"])
    elapsed = time.perf_counter() - t0
    save_dataset(out, ds)
    print(f"generated {len(ds)} samples for {problem.name} in {elapsed:.2f}s: "
          f"inputs {ds.inputs.shape}, targets {ds.targets.shape} -> {out}")


def cmd_sweep(cfg):
    out = _out_dir(cfg)
    _echo_config(cfg, out / "config.json")
    problem = get_problem(cfg["problem"])
    _, splits = _load_data(cfg)
    data = RunData.from_splits(splits, eps_samples=cfg["eps_samples"])
    base_cfg = _train_cfg(cfg, "base_steps", "base_lr")
    diff_cfg = _train_cfg(cfg, "diff_steps", "diff_lr")
    f = problem.nonlinearity
    if cfg["mode"] == "grid":
        plan = SweepPlan.grid_for(problem)
        records, heat = grid_sweep(plan, problem, data, base_cfg, diff_cfg, cfg["seed"], cfg["workers"])
        write_csv(out / "heatmap.csv", heat, HEATMAP_COLUMNS)
    elif cfg["mode"] == "adaptive":
        plan = SweepPlan.adaptive_for(problem, cfg["runs"], cfg["exploit_prob"])
        records = adaptive_sweep(plan, problem, data, base_cfg, diff_cfg, cfg["seed"])
    else:
        raise ConfigError(f"unknown sweep mode {cfg['mode']!r}")
    write_csv(out / "runs.csv", [r.row() for r in records], RUN_COLUMNS)
    best = select_best_run(records, f, data.selection)
    if best.base is None:
        raise RuntimeError("every run failed; nothing to select")
    save_checkpoint(out / "selected.adann", best.base, best.diff, best.epsilon,
                    {"problem": problem.name, "run": best.run, "p1": best.p1, "p2": best.p2,
                     "mode": cfg["mode"], "seed": cfg["seed"]})
    fixed = data.test[0][: problem.eval_batch]
    rows = []
    if cfg["mode"] == "grid":
        rep = evaluate_run(best, problem, data.test, base_only=True)
        t_eval = time_evaluations(lambda u: bm.forward(best.base, f, u), fixed, problem.eval_batch)
        rows.append(_report_row("ADANN grid: base model", rep, best.train_time, t_eval))
    rep = evaluate_run(best, problem, data.test)
    t_eval = time_evaluations(lambda u: best.predict(f, u), fixed, problem.eval_batch)
    label = "grid" if cfg["mode"] == "grid" else "adaptive"
    rows.append(_report_row(f"ADANN {label}: full model", rep, best.train_time, t_eval))
    write_csv(out / "report.csv", rows, REPORT_COLUMNS)
    print(f"selected run {best.run} p=({best.p1:.4g}, {best.p2:.4g}); test L2 {rep.l2:.4e}")


def cmd_baseline(cfg):
    out = _out_dir(cfg)
    _echo_config(cfg, out / "config.json")
    problem = get_problem(cfg["problem"])
    _, splits = _load_data(cfg)
    data = RunData.from_splits(splits)
    x_test, y_test = data.test
    fixed = x_test[: problem.eval_batch]
    rows = []
    if cfg["method"] == "cn":
        system = problem.coarse_system()
        for M in cfg["steps"]:
            def model(u, M=int(M)):
                return rollout(CRANK_NICOLSON, system, problem.terminal_time, M, u)

            rep = evaluate(model, x_test, y_test)
            rows.append(_report_row(f"CN explicit midpoint M={int(M)}", rep, 0.0,
                                    time_evaluations(model, fixed, problem.eval_batch)))
    elif cfg["method"] == "ann":
        d = problem.d
        widths = (d, *problem.ann_hidden, d)
        train_cfg = _train_cfg(cfg, "ann_steps", "ann_lr")
        best, best_loss, total = None, np.inf, 0.0
        for r in range(cfg["ann_runs"]):
            ss_init, ss_train = np.random.SeedSequence(cfg["seed"], spawn_key=(r,)).spawn(2)
            theta0 = glorot_uniform_init(widths, np.random.default_rng(ss_init))
            tc = TrainConfig(**{**train_cfg.__dict__, "seed": int(ss_train.generate_state(1)[0])})
            res = train_mlp(theta0, data.train, data.validation, tc)
            total += res.seconds
            xs, ys = data.selection
            loss = float(np.mean((mlp_forward(res.model, xs) - ys) ** 2))
            log.info("ANN run %d: selection loss %.4e", r + 1, loss)
            if loss < best_loss:
                best, best_loss = res.model, loss
        rep = evaluate(lambda u: mlp_forward(best, u), x_test, y_test, n_params=best.n_params)
        t_eval = time_evaluations(lambda u: mlp_forward(best, u), fixed, problem.eval_batch)
        rows.append(_report_row(f"ANN {widths}", rep, total, t_eval))
    else:
        raise ConfigError(f"unknown baseline method {cfg['method']!r}")
    write_csv(out / "report.csv", rows, REPORT_COLUMNS)
    for row in rows:
        print(";".join(str(_fmt(row[c])) for c in REPORT_COLUMNS))


def _read_report(path: Path) -> list:
    if path.is_dir():
        path = path / "report.csv"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=";")
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ConfigError(f"{path}: columns {reader.fieldnames} do not match {list(REPORT_COLUMNS)}")
        return list(reader)


def _taxonomy(row) -> tuple:
    method = row["method"]
    if method.startswith("ANN"):
        return (0, 0)
    if method.startswith("fno"):
        return (1, 0)
    if method.startswith("CN"):
        m = re.search(r"M=(\d+)", method)
        return (2, int(m.group(1)) if m else 0)
    return (3, 0)


def cmd_report(cfg):
    if not cfg["out"]:
        raise ConfigError("--out is required")
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, out.with_name(out.name + ".config.json"))
    baseline_rows = [row for p in cfg["baselines"] for row in _read_report(Path(p))]
    run_rows = [row for p in cfg["runs_dirs"] for row in _read_report(Path(p))]
    rows = list(baseline_rows)
    if baseline_rows:
        rows.append({c: "" for c in REPORT_COLUMNS} | {"method": FNO_PLACEHOLDER})
    rows = sorted(rows, key=_taxonomy) + run_rows
    write_csv(out, rows, REPORT_COLUMNS)
    print(f"wrote {len(rows)} rows to {out}")


# --- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with option defaults")
    common.add_argument("--problem", choices=sorted(PRESETS))
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--full", action="store_true", default=None, help="remove desk-scale divisors")
    common.add_argument("--workers", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    train = argparse.ArgumentParser(add_help=False)
    train.add_argument("--data")
    train.add_argument("--base-steps", dest="base_steps", type=int)
    train.add_argument("--diff-steps", dest="diff_steps", type=int)
    train.add_argument("--base-lr", dest="base_lr", type=float)
    train.add_argument("--diff-lr", dest="diff_lr", type=float)
    train.add_argument("--eval-every", dest="eval_every", type=int)

    parser = argparse.ArgumentParser(prog="adann", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate a reference dataset")
    p.add_argument("--n", type=int)

    p = sub.add_parser("sweep", parents=[common, train], help="grid or adaptive training sweep")
    p.add_argument("--mode", choices=["grid", "adaptive"])
    p.add_argument("--runs", type=int)
    p.add_argument("--exploit-prob", dest="exploit_prob", type=float)

    p = sub.add_parser("baseline", parents=[common, train], help="Crank-Nicolson or plain ANN baseline")
    p.add_argument("--method", choices=["cn", "ann"])
    p.add_argument("--steps", type=int, nargs="+", help="time step counts for cn")
    p.add_argument("--ann-steps", dest="ann_steps", type=int)
    p.add_argument("--ann-runs", dest="ann_runs", type=int)

    p = sub.add_parser("report", parents=[common], help="merge run and baseline reports")
    p.add_argument("--runs", dest="runs_dirs", nargs="*", default=[])
    p.add_argument("--baselines", nargs="*", default=[])
    return parser


COMMANDS = {"gen-data": cmd_gen_data, "sweep": cmd_sweep, "baseline": cmd_baseline, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = _effective(args, args.command)
        COMMANDS[args.command](cfg)
    except (ConfigError, OSError) as exc:
        print(f"adann {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
