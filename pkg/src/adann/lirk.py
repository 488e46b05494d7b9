"""Linearly implicit Runge-Kutta (LIRK) schemes for ``u' = A u + f(u)``.

The linear part is treated implicitly, the nonlinearity explicitly. The
two-parameter family ``p = (p1, p2)`` of two-stage second-order schemes is
the designing algorithm for :mod:`adann.base_model`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import ShiftedSolver, make_shifted_solver


@dataclass(frozen=True)
class LirkParams:
    p1: float
    p2: float

    def __post_init__(self):
        if not (self.p1 > 0 and self.p2 > 0):
            raise ValueError(f"LIRK parameters must be positive, got ({self.p1}, {self.p2})")

    def __iter__(self):
        return iter((self.p1, self.p2))


CRANK_NICOLSON = LirkParams(0.5, 0.5)


@dataclass(frozen=True)
class ButcherTableau:
    """General LIRK data. Only ``alpha[i, j]`` for j < i and ``beta[i, j]`` for
    j <= i are ever read."""

    alpha: np.ndarray
    beta: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        s = len(self.b)
        if np.shape(self.alpha) != (s, s) or np.shape(self.beta) != (s, s):
            raise ValueError("alpha and beta must be s x s with s = len(b)")

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def C(self) -> np.ndarray:
        return np.tril(self.beta).sum(axis=1)

    @property
    def c(self) -> np.ndarray:
        return np.tril(self.alpha, k=-1).sum(axis=1)


def order2_tableau(p: LirkParams) -> ButcherTableau:
    """Two-stage tableau with ``beta_11 = beta_22 = p2`` and ``alpha_21 = p1``
    solving the second-order conditions."""
    p1, p2 = p
    alpha = np.array([[0.0, 0.0], [p1, 0.0]])
    beta = np.array([[p2, 0.0], [2 * p1 * (0.5 - p2), p2]])
    b = np.array([1 - 1 / (2 * p1), 1 / (2 * p1)])
    return ButcherTableau(alpha, beta, b)


def check_order2_conditions(t: ButcherTableau, tol: float = 1e-12) -> tuple[bool, np.ndarray]:
    """Residuals of ``sum b = 1``, ``sum b C = 1/2`` and ``sum b c = 1/2``."""
    b = np.asarray(t.b, dtype=float)
    residuals = np.array([b.sum() - 1.0, b @ t.C - 0.5, b @ t.c - 0.5])
    return bool(np.all(np.abs(residuals) <= tol)), residuals


@dataclass
class OdeSystem:
    """Semi-discrete system ``u' = A u + f(u)`` with ``f`` applied componentwise.

    Shifted solvers for ``I - c*A`` are built lazily and cached per ``c``.
    """

    A: np.ndarray
    f: Callable[[np.ndarray], np.ndarray]
    _solvers: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def apply_A(self, U: np.ndarray) -> np.ndarray:
        # written as (A U^T)^T so sparse operators work unchanged
        return np.asarray(self.A @ np.asarray(U).T).T

    def solver(self, c: float) -> ShiftedSolver:
        c = float(c)
        if c not in self._solvers:
            self._solvers[c] = make_shifted_solver(self.A, c)
        return self._solvers[c]


def general_lirk_step(sys: OdeSystem, t: ButcherTableau, h: float, U: np.ndarray) -> np.ndarray:
    """One step ``U + h * sum_i b_i k_i`` with stages resolved explicitly:

    ``k_i = (I - h beta_ii A)^-1 (A (U + h sum_{j<i} beta_ij k_j) + f(U + h sum_{j<i} alpha_ij k_j))``
    """
    U = np.asarray(U, dtype=float)
    if h == 0:
        return U.copy()
    k = []
    for i in range(t.stages):
        lin = U + h * sum((t.beta[i, j] * k[j] for j in range(i)), np.zeros_like(U))
        nonlin = U + h * sum((t.alpha[i, j] * k[j] for j in range(i)), np.zeros_like(U))
        rhs = sys.apply_A(lin) + sys.f(nonlin)
        k.append(sys.solver(h * t.beta[i, i]).solve(rhs))
    return U + h * sum(bi * ki for bi, ki in zip(t.b, k))


def lirk_step2(p: LirkParams, sys: OdeSystem, h: float, U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if h == 0:
        return U.copy()
    p1, p2 = p
    S = sys.solver(h * p2)
    k1 = S.solve(sys.apply_A(U) + sys.f(U))
    k2 = S.solve(sys.apply_A(U + h * 2 * p1 * (0.5 - p2) * k1) + sys.f(U + h * p1 * k1))
    return U + h * ((1 - 1 / (2 * p1)) * k1 + (1 / (2 * p1)) * k2)


def crank_nicolson_midpoint_step(sys: OdeSystem, h: float, U: np.ndarray) -> np.ndarray:
    """Closed form of the ``p = (1/2, 1/2)`` member:

    ``(I - h/2 A)^-1 ((I + h/2 A) U + h f((I - h/2 A)^-1 (U + h/2 f(U))))``
    """
    U = np.asarray(U, dtype=float)
    if h == 0:
        return U.copy()
    S = sys.solver(h / 2)
    mid = S.solve(U + (h / 2) * sys.f(U))
    return S.solve(U + (h / 2) * sys.apply_A(U) + h * sys.f(mid))


def rollout(p: LirkParams, sys: OdeSystem, T: float, M: int, U0: np.ndarray) -> np.ndarray:
    """``M``-fold composition of :func:`lirk_step2` with step ``T/M``."""
    if M < 1:
        raise ValueError("need at least one time step")
    h = T / M
    U = np.asarray(U0, dtype=float)
    for _ in range(M):
        U = lirk_step2(p, sys, h, U)
    return U
