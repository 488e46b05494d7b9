"""Multiple training runs over LIRK-parameter initializations and run selection.

A run initializes the base model from ``p``, trains it, estimates the error
scale, trains a freshly initialized difference model, and records validation
L2 errors. Grid sweeps visit a fixed list of ``p``; adaptive sweeps decide per
run between a new base model (A) and a new difference model on the best
existing base model (B).
"""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import base_model as bm
from .lirk import LirkParams
from .mlp import MlpWeights, glorot_uniform_init
from .problems import ProblemSpec, seminorm
from .training import (TrainConfig, estimate_error_scale, evaluate, full_model_eval,
                       train_base, train_difference)

log = logging.getLogger(__name__)

RUN_COLUMNS = ("run", "p1", "p2", "init_L2", "base_L2", "full_L2", "epsilon", "status")
HEATMAP_COLUMNS = ("p1", "p2", "init_L2", "base_L2", "full_L2", "status")


@dataclass
class SweepPlan:
    mode: str
    points: tuple = ()
    box: tuple = ((0.1, 0.9), (0.3, 0.9))
    runs: int = 1
    exploit_prob: float = 0.5

    def __post_init__(self):
        if self.mode not in ("grid", "adaptive_random"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        if self.mode == "grid":
            if not self.points:
                raise ValueError("grid sweep needs at least one point")
            if any(not (a > 0 and b > 0) for a, b in self.points):
                raise ValueError("grid points must lie in (0, inf)^2")
        if self.runs < 1:
            raise ValueError("need at least one run")
        if not 0 <= self.exploit_prob <= 1:
            raise ValueError("exploit_prob must lie in [0, 1]")

    @classmethod
    def grid_for(cls, problem: ProblemSpec) -> "SweepPlan":
        return cls("grid", points=problem.sweep_grid, box=problem.sample_box, runs=len(problem.sweep_grid))

    @classmethod
    def adaptive_for(cls, problem: ProblemSpec, runs: int, exploit_prob: float = 0.5) -> "SweepPlan":
        return cls("adaptive_random", box=problem.sample_box, runs=runs, exploit_prob=exploit_prob)


@dataclass
class RunData:
    """Coarse ``(inputs, targets)`` pairs for each split."""

    train: tuple
    validation: tuple
    selection: tuple
    test: tuple | None = None
    eps_samples: int = 2048

    @classmethod
    def from_splits(cls, splits: dict, **kw) -> "RunData":
        return cls(*(splits[k].pair() for k in ("train", "validation", "selection", "test")), **kw)


@dataclass
class RunRecord:
    run: int
    p1: float
    p2: float
    action: str = "A"
    base_run: int = 0
    init_L2: float = float("inf")
    base_L2: float = float("inf")
    full_L2: float = float("inf")
    epsilon: float = float("nan")
    selection_loss: float = float("inf")
    status: str = "ok"
    base: bm.BaseWeights | None = field(default=None, repr=False)
    diff: MlpWeights | None = field(default=None, repr=False)
    train_time: float = 0.0
    curves: dict = field(default_factory=dict, repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in RUN_COLUMNS}

    def predict(self, f, inputs):
        return full_model_eval(self.base, f, self.diff, self.epsilon, inputs)


def _run_seed(seed: int, run: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(run,))


def _l2(values, targets) -> float:
    return float(np.sqrt(np.mean(seminorm(np.asarray(values) - targets) ** 2)))


def _attach_difference(rec: RunRecord, problem: ProblemSpec, data: RunData, diff_cfg: TrainConfig,
                       ss: np.random.SeedSequence):
    f = problem.nonlinearity
    d = problem.d
    rng_init, rng_train = (np.random.default_rng(s) for s in ss.spawn(2))
    theta0 = glorot_uniform_init((d, *problem.diff_hidden, d), rng_init)
    cfg = TrainConfig(**{**diff_cfg.__dict__, "seed": int(rng_train.integers(2**63))})
    res = train_difference(theta0, rec.base, f, rec.epsilon, data.train, data.validation, cfg)
    rec.curves["difference"] = res.curve
    rec.train_time += res.seconds
    rec.diff = res.model
    rec.full_L2 = _l2(rec.predict(f, data.validation[0]), data.validation[1])
    if not rec.full_L2 <= rec.base_L2:
        # zero difference network reproduces the base model exactly
        rec.diff = MlpWeights.zeros(theta0.widths)
        rec.full_L2 = rec.base_L2
    if res.diverged:
        rec.status = "diverged"


def run_pipeline(problem: ProblemSpec, p, data: RunData, base_cfg: TrainConfig, diff_cfg: TrainConfig,
                 seed: int, run: int) -> RunRecord:
    """One (A)-type run: LIRK init, base training, error scale, difference training."""
    p = LirkParams(*p)
    rec = RunRecord(run=run, p1=p.p1, p2=p.p2, action="A", base_run=run)
    f = problem.nonlinearity
    ss_base, ss_diff = _run_seed(seed, run).spawn(2)
    try:
        W0 = bm.from_lirk_params(p, problem.grid.laplacian(), problem.terminal_time, problem.base_steps)
        rec.init_L2 = _l2(bm.forward(W0, f, data.validation[0]), data.validation[1])
        cfg = TrainConfig(**{**base_cfg.__dict__, "seed": int(ss_base.generate_state(1)[0])})
        res = train_base(W0, f, data.train, data.validation, cfg)
        rec.curves["base"] = res.curve
        rec.train_time += res.seconds
        rec.base = res.model
        rec.base_L2 = _l2(bm.forward(rec.base, f, data.validation[0]), data.validation[1])
        n_eps = min(data.eps_samples, len(data.train[0]))
        rec.epsilon = estimate_error_scale(rec.base, f, data.train[0], data.train[1], n_eps)
        _attach_difference(rec, problem, data, diff_cfg, ss_diff)
        if res.diverged:
            rec.status = "diverged"
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        log.warning("run %d (p=%s) failed: %s", run, p, exc)
        rec.status = "failed"
        rec.base = rec.diff = None
        rec.init_L2 = rec.init_L2 if np.isfinite(rec.init_L2) else float("inf")
        rec.base_L2 = rec.full_L2 = float("inf")
    for name in ("init_L2", "base_L2", "full_L2"):
        if not np.isfinite(getattr(rec, name)):
            setattr(rec, name, float("inf"))
            if rec.status == "ok":
                rec.status = "failed"
    return rec


def _grid_job(args):
    return run_pipeline(*args)


def grid_sweep(plan: SweepPlan, problem: ProblemSpec, data: RunData, base_cfg: TrainConfig,
               diff_cfg: TrainConfig, seed: int = 0, workers: int = 1):
    """Full pipeline at every grid point. Returns ``(records, heatmap rows)``."""
    if plan.mode != "grid":
        raise ValueError("grid_sweep needs a grid plan")
    jobs = [(problem, p, data, base_cfg, diff_cfg, seed, r + 1) for r, p in enumerate(plan.points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_grid_job, jobs))
    else:
        records = []
        for job in jobs:
            t0 = time.perf_counter()
            records.append(_grid_job(job))
            r = records[-1]
            log.info("run %d p=(%.3g, %.3g): init %.3e base %.3e full %.3e [%s] %.1fs", r.run, r.p1, r.p2,
                     r.init_L2, r.base_L2, r.full_L2, r.status, time.perf_counter() - t0)
    return records, heatmap_rows(records)


def heatmap_rows(records) -> list:
    return [{k: getattr(r, k) for k in HEATMAP_COLUMNS} for r in records]


def adaptive_sweep(plan: SweepPlan, problem: ProblemSpec, data: RunData, base_cfg: TrainConfig,
                   diff_cfg: TrainConfig, seed: int = 0) -> list:
    """Sequential runs; run 1 is always (A). Later runs exploit (B) with
    probability ``plan.exploit_prob``: a new difference model on the base model
    of the record with the best full-model validation error."""
    if plan.mode != "adaptive_random":
        raise ValueError("adaptive_sweep needs an adaptive_random plan")
    decide = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    (lo1, hi1), (lo2, hi2) = plan.box
    records = []
    for run in range(1, plan.runs + 1):
        u, q1, q2 = decide.random(3)
        usable = [r for r in records if r.base is not None]
        if run > 1 and usable and u < plan.exploit_prob:
            best = min(usable, key=lambda r: (r.full_L2, r.run))
            rec = RunRecord(run=run, p1=best.p1, p2=best.p2, action="B", base_run=best.base_run,
                            init_L2=best.init_L2, base_L2=best.base_L2, epsilon=best.epsilon, base=best.base)
            try:
                _attach_difference(rec, problem, data, diff_cfg, _run_seed(seed, run))
            except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
                log.warning("run %d failed: %s", run, exc)
                rec.status, rec.diff, rec.full_L2 = "failed", None, float("inf")
        else:
            p = (lo1 + (hi1 - lo1) * q1, lo2 + (hi2 - lo2) * q2)
            rec = run_pipeline(problem, p, data, base_cfg, diff_cfg, seed, run)
        log.info("run %d (%s) p=(%.3f, %.3f): base %.3e full %.3e [%s]", run, rec.action, rec.p1, rec.p2,
                 rec.base_L2, rec.full_L2, rec.status)
        records.append(rec)
    return records


def select_best_run(records, f=None, selection=None) -> RunRecord:
    """Record with the smallest full-model loss on held-out ``selection`` data.

    Without ``selection`` the stored ``selection_loss`` values are used. Failed
    runs count as +inf; ties go to the lowest run index.
    """
    if not records:
        raise ValueError("no runs to select from")
    if selection is not None:
        x, y = selection
        for r in records:
            if r.status == "failed" or r.base is None:
                r.selection_loss = float("inf")
                continue
            loss = float(np.mean(seminorm(r.predict(f, x) - y) ** 2))
            r.selection_loss = loss if np.isfinite(loss) else float("inf")
    return min(records, key=lambda r: (r.selection_loss, r.run))


def evaluate_run(rec: RunRecord, problem: ProblemSpec, test, base_only=False):
    f = problem.nonlinearity
    if base_only:
        return evaluate(lambda u: bm.forward(rec.base, f, u), *test, n_params=rec.base.n_params)
    return evaluate(lambda u: rec.predict(f, u), *test, n_params=rec.base.n_params + rec.diff.n_params)


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), delimiter=";", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in row.items() if k in columns})
