"""Fully connected GELU networks used as difference models and plain baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x):
    """Exact GELU ``x * Phi(x)``."""
    return x * ndtr(x)


def gelu_prime(x):
    return ndtr(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


# sup of gelu', attained at x = sqrt(2)
GELU_LIPSCHITZ = float(gelu_prime(np.sqrt(2.0)))


@dataclass
class MlpWeights:
    """Layer ``l`` maps ``x -> x @ weights[l].T + biases[l]``; GELU between layers."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need matching, nonempty weight and bias lists")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {l}: weight {w.shape} / bias {b.shape} mismatch")
            if l and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l} input width does not chain")

    @property
    def widths(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list:
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` sharing memory with self."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpWeights":
        return MlpWeights([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    @classmethod
    def zeros(cls, widths) -> "MlpWeights":
        return cls([np.zeros((o, i)) for i, o in zip(widths[:-1], widths[1:])],
                   [np.zeros(o) for o in widths[1:]])


def glorot_uniform_init(widths, rng: np.random.Generator) -> MlpWeights:
    """Weights ~ U(-a, a) with ``a = sqrt(6 / (fan_in + fan_out))``; zero biases."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    weights = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
    return MlpWeights(weights, [np.zeros(o) for o in widths[1:]])


def mlp_forward(w: MlpWeights, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != w.widths[0]:
        raise ValueError(f"input width {x.shape[-1]} != {w.widths[0]}")
    last = len(w.weights) - 1
    for l, (W, b) in enumerate(zip(w.weights, w.biases)):
        x = x @ W.T + b
        if l < last:
            x = gelu(x)
    return x


def mlp_forward_with_tape(w: MlpWeights, x: np.ndarray):
    """Forward pass keeping each layer's input and pre-activation."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != w.widths[0]:
        raise ValueError(f"input width {x.shape[-1]} != {w.widths[0]}")
    tape = []
    last = len(w.weights) - 1
    for l, (W, b) in enumerate(zip(w.weights, w.biases)):
        z = x @ W.T + b
        tape.append((x, z))
        x = gelu(z) if l < last else z
    return x, tape


def mlp_backward(w: MlpWeights, tape, output_cotangent: np.ndarray):
    """Gradients of ``<output_cotangent, output>`` summed over the batch.

    Returns ``(grad_weights, grad_input)`` with ``grad_weights`` an
    :class:`MlpWeights` of the same shapes.
    """
    g = np.atleast_2d(np.asarray(output_cotangent, dtype=float))
    squeeze = np.ndim(output_cotangent) == 1
    gw, gb = [], []
    last = len(w.weights) - 1
    for l in reversed(range(len(w.weights))):
        x, z = tape[l]
        x = np.atleast_2d(x)
        if l < last:
            g = g * gelu_prime(np.atleast_2d(z))
        gw.append(g.T @ x)
        gb.append(g.sum(axis=0))
        g = g @ w.weights[l]
    grads = MlpWeights(gw[::-1], gb[::-1])
    return grads, (g[0] if squeeze else g)
