"""Base model: ``M`` blocks of five trainable ``d x d`` matrices.

Each block maps

    U_m = W1 U + W2 f(U) + W3 f(W4 U + W5 f(U)),      U = U_{m-1}

and the model returns ``U_M``. With every block set to the matrices from
:func:`from_lirk_params` the untrained model is exactly ``M`` steps of the
two-stage LIRK scheme with parameters ``p``.

Batches are row-major: a state array has shape ``(d,)`` or ``(B, d)``, so a
matrix acts as ``U @ W.T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import make_shifted_solver
from .lirk import LirkParams


@dataclass
class BaseWeights:
    """Block weights stacked as an array of shape ``(M, 5, d, d)``."""

    W: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 4 or self.W.shape[1] != 5 or self.W.shape[2] != self.W.shape[3]:
            raise ValueError(f"expected shape (M, 5, d, d), got {self.W.shape}")
        if self.W.shape[0] < 1:
            raise ValueError("need at least one block")

    @property
    def n_blocks(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[2]

    @property
    def n_params(self) -> int:
        return self.W.size

    def copy(self) -> "BaseWeights":
        return BaseWeights(self.W.copy())


def lirk_block(p: LirkParams, A: np.ndarray, H: float) -> np.ndarray:
    """The five matrices reproducing one LIRK step of size ``H``; shape ``(5, d, d)``."""
    p1, p2 = p
    A = np.asarray(A, dtype=float)
    eye = np.eye(A.shape[0])
    S = make_shifted_solver(A, H * p2).inverse()
    SA = S @ A
    W1 = S @ (eye + H * (1 - p2) * A) + H**2 * (0.5 - p2) * (SA @ SA)
    W2 = H * (1 - 1 / (2 * p1)) * S + H**2 * (0.5 - p2) * (SA @ S)
    W3 = H / (2 * p1) * S
    W4 = S @ (eye + H * (p1 - p2) * A)
    W5 = H * p1 * S
    return np.stack([W1, W2, W3, W4, W5])


def from_lirk_params(p: LirkParams, A: np.ndarray, T: float, M: int) -> BaseWeights:
    if not isinstance(p, LirkParams):
        p = LirkParams(*p)
    if M < 1:
        raise ValueError("need at least one block")
    block = lirk_block(p, A, T / M)
    return BaseWeights(np.repeat(block[None], M, axis=0))


def _check_dims(W: BaseWeights, U0: np.ndarray):
    if np.shape(U0)[-1] != W.dim:
        raise ValueError(f"state has {np.shape(U0)[-1]} unknowns, weights expect {W.dim}")


def forward(W: BaseWeights, f, U0: np.ndarray) -> np.ndarray:
    _check_dims(W, U0)
    U = np.asarray(U0, dtype=float)
    for W1, W2, W3, W4, W5 in W.W:
        fU = f(U)
        fV = f(U @ W4.T + fU @ W5.T)
        U = U @ W1.T + fU @ W2.T + fV @ W3.T
    return U


@dataclass
class ForwardTape:
    """Per-block intermediates: inputs ``U_{m-1}``, ``V_m``, ``f(U_{m-1})``, ``f(V_m)``."""

    inputs: list
    pre: list
    f_inputs: list
    f_pre: list
    output: np.ndarray

    @property
    def n_blocks(self) -> int:
        return len(self.inputs)


def forward_with_tape(W: BaseWeights, f, U0: np.ndarray) -> tuple[np.ndarray, ForwardTape]:
    _check_dims(W, U0)
    U = np.asarray(U0, dtype=float)
    tape = ForwardTape([], [], [], [], None)
    for W1, W2, W3, W4, W5 in W.W:
        fU = f(U)
        V = U @ W4.T + fU @ W5.T
        fV = f(V)
        tape.inputs.append(U)
        tape.pre.append(V)
        tape.f_inputs.append(fU)
        tape.f_pre.append(fV)
        U = U @ W1.T + fU @ W2.T + fV @ W3.T
    tape.output = U
    return U, tape


def replay(W: BaseWeights, tape: ForwardTape) -> np.ndarray:
    """Recompute ``U_M`` from the taped intermediates of the last block."""
    W1, W2, W3 = W.W[-1, :3]
    return tape.inputs[-1] @ W1.T + tape.f_inputs[-1] @ W2.T + tape.f_pre[-1] @ W3.T


@dataclass
class BaseGradient:
    W: np.ndarray
    input: np.ndarray


def backward(W: BaseWeights, f, tape: ForwardTape, output_cotangent: np.ndarray) -> BaseGradient:
    """Reverse-mode gradient of ``<output_cotangent, U_M>``, summed over the batch.

    ``f`` must provide ``derivative``.
    """
    if tape.n_blocks != W.n_blocks or tape.inputs[0].shape[-1] != W.dim:
        raise ValueError("tape does not match the weights")
    lam = np.asarray(output_cotangent, dtype=float)
    if lam.shape != tape.output.shape:
        raise ValueError(f"cotangent shape {lam.shape} != output shape {tape.output.shape}")
    batched = lam.ndim > 1
    grad = np.zeros_like(W.W)
    for m in reversed(range(W.n_blocks)):
        W1, W2, W3, W4, W5 = W.W[m]
        U, V, fU, fV = tape.inputs[m], tape.pre[m], tape.f_inputs[m], tape.f_pre[m]
        L, U2, fU2, fV2 = (lam, U, fU, fV) if batched else (lam[None], U[None], fU[None], fV[None])
        mu = (L @ W3) * f.derivative(V if batched else V[None])
        grad[m, 0] = L.T @ U2
        grad[m, 1] = L.T @ fU2
        grad[m, 2] = L.T @ fV2
        grad[m, 3] = mu.T @ U2
        grad[m, 4] = mu.T @ fU2
        dfU = (L @ W2 + mu @ W5) * f.derivative(U2)
        L = L @ W1 + mu @ W4 + dfU
        lam = L if batched else L[0]
    return BaseGradient(grad, lam)
