"""Losses, ADAM training loops and error estimates for base/difference models.

Losses are batch means of the squared seminorm (RMS over evaluation nodes).
Training keeps the best-validation checkpoint, so a returned model is never
worse on validation data than the one it started from.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import base_model as bm
from .mlp import MlpWeights, mlp_backward, mlp_forward, mlp_forward_with_tape
from .problems import seminorm

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-12


# --- losses -----------------------------------------------------------------


def _check_pair(pred_shape, targets):
    if pred_shape != np.shape(targets):
        raise ValueError(f"prediction shape {pred_shape} != target shape {np.shape(targets)}")


def base_loss(W: bm.BaseWeights, f, inputs, targets, with_grad: bool = True):
    """Mean squared seminorm of ``base(W, inputs) - targets`` and its gradient in ``W``."""
    inputs = np.atleast_2d(inputs)
    targets = np.atleast_2d(targets)
    if not with_grad:
        pred = bm.forward(W, f, inputs)
        _check_pair(pred.shape, targets)
        return float(np.mean(seminorm(pred - targets) ** 2))
    pred, tape = bm.forward_with_tape(W, f, inputs)
    _check_pair(pred.shape, targets)
    r = pred - targets
    loss = float(np.mean(seminorm(r) ** 2))
    B, O = r.shape
    grad = bm.backward(W, f, tape, (2.0 / (O * B)) * r).W
    return loss, grad


def estimate_error_scale(W: bm.BaseWeights, f, inputs, targets, n_mc: int | None = None) -> float:
    """Monte-Carlo estimate of the root expected squared seminorm error, floored at 1e-12."""
    n = len(inputs)
    if n == 0:
        raise ValueError("empty dataset")
    n_mc = n if n_mc is None else n_mc
    if not 1 <= n_mc <= n:
        raise ValueError(f"n_mc={n_mc} must lie in [1, {n}]")
    loss = base_loss(W, f, inputs[:n_mc], targets[:n_mc], with_grad=False)
    return max(float(np.sqrt(loss)), EPS_FLOOR)


def residual_targets(W: bm.BaseWeights, f, eps: float, inputs, targets) -> np.ndarray:
    """Regression targets ``(targets - base(W, inputs)) / eps`` for the difference model."""
    if not eps > 0:
        raise ValueError("error scale must be positive")
    return (np.asarray(targets) - bm.forward(W, f, inputs)) / eps


def _mlp_loss(theta: MlpWeights, inputs, scaled, with_grad=True):
    inputs = np.atleast_2d(inputs)
    scaled = np.atleast_2d(scaled)
    if not with_grad:
        out = mlp_forward(theta, inputs)
        _check_pair(out.shape, scaled)
        return float(np.mean(seminorm(out - scaled) ** 2))
    out, tape = mlp_forward_with_tape(theta, inputs)
    _check_pair(out.shape, scaled)
    r = out - scaled
    B, O = r.shape
    grads, _ = mlp_backward(theta, tape, (2.0 / (O * B)) * r)
    return float(np.mean(seminorm(r) ** 2)), grads


def diff_loss(theta: MlpWeights, W: bm.BaseWeights, f, eps: float, inputs, targets, with_grad=True):
    """Mean squared seminorm of ``D(theta, i) - (target - base(W, i)) / eps``.

    ``W`` and ``eps`` are frozen; the gradient is with respect to ``theta`` only.
    """
    return _mlp_loss(theta, inputs, residual_targets(W, f, eps, inputs, targets), with_grad)


def full_model_eval(W: bm.BaseWeights, f, theta: MlpWeights, eps: float, inputs) -> np.ndarray:
    base = bm.forward(W, f, inputs)
    if eps == 0:
        return base
    return base + eps * mlp_forward(theta, inputs)


# --- ADAM -------------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params, grads, lr: float):
    """Bias-corrected ADAM update applied in place to each array in ``params``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state must have equal length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# --- training loops ---------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 1e-3
    steps: int = 2000
    decay: float = 0.3
    patience: int = 5
    min_improvement: float = 0.01
    batch_size: int = 64
    max_batch_size: int = 1024
    eval_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        for name in ("lr", "decay", "patience", "batch_size", "max_batch_size", "eval_every"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def batch_at(self, step: int) -> int:
        """Batch size doubles every quarter of the step budget, capped."""
        quarter = min(4 * step // max(self.steps, 1), 3)
        return min(self.batch_size * 2**quarter, self.max_batch_size)


@dataclass
class TrainResult:
    model: object
    curve: list = field(default_factory=list)
    init_loss: float = float("nan")
    best_loss: float = float("nan")
    best_step: int = 0
    diverged: bool = False
    seconds: float = 0.0


def _adam_loop(params, loss_grad: Callable, val_loss: Callable, n_train: int, cfg: TrainConfig,
               rng: np.random.Generator) -> TrainResult:
    """Generic mini-batch ADAM with plateau decay and best-validation checkpointing.

    ``params`` is a list of arrays updated in place; the returned model is a
    list of copies of the best parameters seen (step 0 included).
    """
    t0 = time.perf_counter()
    state = AdamState.for_params(params)
    best = [p.copy() for p in params]
    init = best_val = val_loss()
    res = TrainResult(best, init_loss=init, best_loss=init, best_step=0)
    res.curve.append((0, float("nan"), init, cfg.lr, cfg.batch_at(0)))
    lr, stale, plateau_ref = cfg.lr, 0, init
    train_acc, train_n = 0.0, 0
    for step in range(1, cfg.steps + 1):
        bs = cfg.batch_at(step - 1)
        idx = rng.integers(0, n_train, size=bs)
        loss, grads = loss_grad(idx)
        adam_step(state, params, grads, lr)
        train_acc += loss
        train_n += 1
        if step % cfg.eval_every and step != cfg.steps:
            continue
        v = val_loss()
        res.curve.append((step, train_acc / train_n, v, lr, bs))
        train_acc, train_n = 0.0, 0
        if not np.isfinite(v):
            log.warning("validation loss diverged at step %d; keeping step %d", step, res.best_step)
            res.diverged = True
            break
        if v < best_val:
            best_val = v
            best = [p.copy() for p in params]
            res.best_step = step
        if v < (1.0 - cfg.min_improvement) * plateau_ref:
            plateau_ref, stale = v, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                lr *= cfg.decay
                stale = 0
                plateau_ref = min(plateau_ref, v)
    res.model = best
    res.best_loss = best_val
    res.seconds = time.perf_counter() - t0
    return res


def train_base(W0: bm.BaseWeights, f, train, val, cfg: TrainConfig) -> TrainResult:
    """Train the base model; ``train`` and ``val`` are ``(inputs, targets)`` pairs
    of coarse-grid arrays. ``result.model`` is a :class:`BaseWeights`."""
    x, y = train
    if len(x) == 0:
        raise ValueError("empty training set")
    W = W0.copy()
    rng = np.random.default_rng(cfg.seed)

    def loss_grad(idx):
        loss, g = base_loss(W, f, x[idx], y[idx])
        return loss, [g]

    res = _adam_loop([W.W], loss_grad, lambda: base_loss(W, f, *val, with_grad=False), len(x), cfg, rng)
    res.model = bm.BaseWeights(res.model[0])
    return res


def train_difference(theta0: MlpWeights, W: bm.BaseWeights, f, eps: float, train, val,
                     cfg: TrainConfig) -> TrainResult:
    """Train the difference model against frozen ``W`` and ``eps``.

    The all-zero network (full model = base model) competes as the step-0
    candidate, so the full model never validates worse than the base alone.
    With ``cfg.steps == 0`` nothing is trained and ``theta0`` is returned as is.
    """
    x, y = train
    if len(x) == 0:
        raise ValueError("empty training set")
    if cfg.steps == 0:
        loss = diff_loss(theta0, W, f, eps, val[0], val[1], with_grad=False)
        return TrainResult(theta0.copy(), [(0, float("nan"), loss, cfg.lr, cfg.batch_at(0))], loss, loss)
    r_train = residual_targets(W, f, eps, x, y)
    xv = np.asarray(val[0])
    r_val = residual_targets(W, f, eps, xv, val[1])
    theta = theta0.copy()
    rng = np.random.default_rng(cfg.seed)
    zero_loss = float(np.mean(seminorm(r_val) ** 2))

    def loss_grad(idx):
        loss, g = _mlp_loss(theta, x[idx], r_train[idx])
        return loss, g.params()

    res = _adam_loop(theta.params(), loss_grad, lambda: _mlp_loss(theta, xv, r_val, with_grad=False),
                     len(x), cfg, rng)
    best = res.model
    model = MlpWeights(best[0::2], best[1::2])
    if not res.best_loss <= zero_loss:
        model = MlpWeights.zeros(theta0.widths)
        res.best_loss, res.best_step = zero_loss, -1
    res.model = model
    res.curve.insert(0, (-1, float("nan"), zero_loss, 0.0, 0))
    return res


def train_mlp(theta0: MlpWeights, train, val, cfg: TrainConfig) -> TrainResult:
    """Plain regression of targets from inputs (the baseline ANN)."""
    x, y = train
    theta = theta0.copy()
    rng = np.random.default_rng(cfg.seed)

    def loss_grad(idx):
        loss, g = _mlp_loss(theta, x[idx], y[idx])
        return loss, g.params()

    res = _adam_loop(theta.params(), loss_grad, lambda: _mlp_loss(theta, *val, with_grad=False),
                     len(x), cfg, rng)
    res.model = MlpWeights(res.model[0::2], res.model[1::2])
    return res


# --- evaluation -------------------------------------------------------------


@dataclass
class ErrorReport:
    l1: float
    l2: float
    n_samples: int
    n_params: int = 0
    train_time: float = float("nan")
    eval_time: float = float("nan")

    def __post_init__(self):
        # Jensen: mean |e| <= sqrt(mean e^2)
        assert self.l1 <= self.l2 * (1 + 1e-12) + 1e-300, (self.l1, self.l2)


def evaluate(modelfn: Callable, inputs, targets, n_params: int = 0) -> ErrorReport:
    """Estimated L1 / L2 errors: mean and root-mean-square of per-sample seminorm errors."""
    if len(inputs) == 0:
        raise ValueError("empty dataset")
    err = seminorm(np.asarray(modelfn(inputs)) - np.asarray(targets))
    return ErrorReport(float(np.mean(err)), float(np.sqrt(np.mean(err**2))), len(err), n_params)


def time_evaluations(modelfn: Callable, inputs, n: int) -> float:
    """Wall-clock seconds to evaluate ``modelfn`` on ``n`` samples (inputs tiled)."""
    reps = -(-n // len(inputs))
    batch = np.concatenate([inputs] * reps)[:n]
    t0 = time.perf_counter()
    modelfn(batch)
    return time.perf_counter() - t0
