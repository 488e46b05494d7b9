"""Semilinear heat-type benchmark problems, initial-value laws and reference solves.

Three presets are provided:

* ``rd1d``   reaction-diffusion nonlinearity, 1D Dirichlet, 35 nodes, T = 1
* ``sg1d``   Sine-Gordon type nonlinearity, 1D periodic, 30 nodes, T = 2
* ``heat2d`` ``sqrt(1 + u^2)`` nonlinearity, 2D periodic, 40x40 nodes, T = 2

All use diffusion scale 1/100. Reference targets come from the Crank-Nicolson
explicit midpoint scheme on a fine grid that contains the coarse nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridSpec
from .lirk import CRANK_NICOLSON, OdeSystem, rollout


@dataclass(frozen=True)
class Nonlinearity:
    tag: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, u):
        return self.func(u)

    def derivative(self, u):
        return self.deriv(u)


def _rd(u):
    return (1.0 - u) / (1.0 + u * u)


def _rd_prime(u):
    q = 1.0 + u * u
    return (u * u - 2.0 * u - 1.0) / (q * q)


def _sqrt1p(u):
    return np.sqrt(1.0 + u * u)


def _sqrt1p_prime(u):
    return u / np.sqrt(1.0 + u * u)


NONLINEARITIES = {
    "reaction_diffusion": Nonlinearity("reaction_diffusion", _rd, _rd_prime),
    "sine": Nonlinearity("sine", np.sin, np.cos),
    "sqrt_one_plus_sq": Nonlinearity("sqrt_one_plus_sq", _sqrt1p, _sqrt1p_prime),
    "zero": Nonlinearity("zero", np.zeros_like, np.zeros_like),
}


def seminorm(values: np.ndarray) -> np.ndarray:
    """Root mean square over the evaluation nodes (last axis)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 0 or values.shape[-1] == 0:
        raise ValueError("seminorm of an empty vector")
    return np.sqrt(np.mean(values * values, axis=-1))


# --- initial-value laws -----------------------------------------------------


@dataclass(frozen=True)
class SineDecay:
    """``sum_{n=1}^{n_modes} amplitude * Z_n sin(pi n x) / n^2``."""

    n_modes: int = 32
    amplitude: float = 5.0
    tag: str = "sine_decay"

    @property
    def n_coefficients(self) -> int:
        return self.n_modes

    def evaluate(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        n = np.arange(1, self.n_modes + 1)
        basis = self.amplitude * np.sin(np.pi * np.outer(n, x)) / n[:, None] ** 2
        return np.asarray(coeffs, dtype=float) @ basis

    def sample(self, rng: np.random.Generator, grid: GridSpec) -> np.ndarray:
        return self.evaluate(rng.standard_normal(self.n_coefficients), grid.nodes())


@dataclass(frozen=True)
class FourierDecay:
    """``amplitude * (Z_0 + sum_{n=1}^{n_modes} (A_n sin(2 pi n x) + B_n cos(2 pi n x)) / n^2)``.

    With ``shared=True`` the sine and cosine terms of mode ``n`` use the same
    coefficient; otherwise they are independent. Coefficients are laid out as
    ``[Z_0, A_1..A_n, B_1..B_n]`` (or ``[Z_0, Z_1..Z_n]`` when shared).
    """

    n_modes: int = 16
    amplitude: float = 2.0
    shared: bool = False
    tag: str = "fourier_decay"

    @property
    def n_coefficients(self) -> int:
        return 1 + (1 if self.shared else 2) * self.n_modes

    def evaluate(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = np.arange(1, self.n_modes + 1)[:, None]
        sin = np.sin(2 * np.pi * n * x) / n**2
        cos = np.cos(2 * np.pi * n * x) / n**2
        if self.shared:
            basis = np.vstack([np.ones_like(x)[None], sin + cos])
        else:
            basis = np.vstack([np.ones_like(x)[None], sin, cos])
        return self.amplitude * (np.asarray(coeffs, dtype=float) @ basis)

    def sample(self, rng: np.random.Generator, grid: GridSpec) -> np.ndarray:
        return self.evaluate(rng.standard_normal(self.n_coefficients), grid.nodes())


@dataclass(frozen=True)
class Grf2d:
    """Periodic Gaussian field ``scale * (2 I - Lap)^-1 X`` on an ``n x n`` grid,
    ``X`` with i.i.d. ``N(0, n^2)`` entries and ``Lap`` the periodic 5-point
    Laplacian. The circulant operator is inverted exactly in Fourier space.
    """

    n: int = 80
    scale: float = 2.0
    shift: float = 2.0
    tag: str = "grf2d"

    def symbol(self) -> np.ndarray:
        """Eigenvalues of ``shift*I - Lap`` indexed by 2D FFT frequency."""
        k = np.arange(self.n)
        lam1 = self.n**2 * (2 * np.cos(2 * np.pi * k / self.n) - 2)
        return self.shift - (lam1[:, None] + lam1[None, :])

    def field_from_noise(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] == self.n**2:
            X = X.reshape(*X.shape[:-1], self.n, self.n)
        out = np.fft.ifft2(np.fft.fft2(X) / self.symbol()).real
        return self.scale * out.reshape(*out.shape[:-2], self.n * self.n)

    def sample(self, rng: np.random.Generator, grid: GridSpec) -> np.ndarray:
        if grid.dimension != 2 or grid.points_per_axis != self.n:
            raise ValueError(f"Grf2d samples live on a {self.n}x{self.n} grid")
        X = self.n * rng.standard_normal((self.n, self.n))
        return self.field_from_noise(X)


# --- reference solver -------------------------------------------------------


@dataclass(frozen=True)
class ReferenceSolver:
    """Fine-grid Crank-Nicolson solve restricted to the coarse nodes.

    ``factor`` k relates the grids: Dirichlet ``N_fine + 1 = k (N + 1)``,
    periodic ``N_fine = k N`` (per axis).
    """

    factor: int
    n_steps: int

    def fine_grid(self, coarse: GridSpec) -> GridSpec:
        n, k = coarse.points_per_axis, self.factor
        n_fine = k * (n + 1) - 1 if coarse.boundary == "dirichlet" else k * n
        return GridSpec(coarse.dimension, n_fine, coarse.boundary, coarse.diffusion_scale)

    def restriction_indices(self, coarse: GridSpec) -> np.ndarray:
        n, k = coarse.points_per_axis, self.factor
        if coarse.boundary == "dirichlet":
            return k * np.arange(1, n + 1) - 1
        idx = k * np.arange(n)
        if coarse.dimension == 1:
            return idx
        n_fine = k * n
        return (idx[:, None] * n_fine + idx[None, :]).ravel()

    def check_compatible(self, coarse: GridSpec, fine: GridSpec):
        expected = self.fine_grid(coarse)
        if fine != expected:
            raise ValueError(f"fine grid {fine} does not contain coarse grid {coarse}")
        if not np.allclose(fine.nodes()[self.restriction_indices(coarse)], coarse.nodes(), atol=1e-14):
            raise ValueError("restriction does not land on coarse nodes")


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    grid: GridSpec
    nonlinearity: Nonlinearity
    terminal_time: float
    law: object
    reference: ReferenceSolver
    base_steps: int
    diff_hidden: tuple
    ann_hidden: tuple
    sweep_grid: tuple
    sample_box: tuple
    eval_batch: int = 4096

    @property
    def diffusion(self) -> float:
        return self.grid.diffusion_scale

    @property
    def fine_grid(self) -> GridSpec:
        return self.reference.fine_grid(self.grid)

    @property
    def d(self) -> int:
        return self.grid.n_unknowns

    def coarse_system(self) -> OdeSystem:
        return OdeSystem(self.grid.laplacian(), self.nonlinearity)

    def fine_system(self) -> OdeSystem:
        return OdeSystem(self.fine_grid.laplacian(sparse=True), self.nonlinearity)

    def restrict(self, fine_values: np.ndarray) -> np.ndarray:
        return np.asarray(fine_values)[..., self.reference.restriction_indices(self.grid)]


def reference_solve(spec: ProblemSpec, g_fine: np.ndarray, solver: ReferenceSolver | None = None,
                    system: OdeSystem | None = None) -> np.ndarray:
    """Terminal values on the coarse nodes for fine-grid initial samples ``g_fine``.

    Pass a prebuilt fine ``system`` to reuse its cached factorizations.
    """
    solver = solver or spec.reference
    fine = solver.fine_grid(spec.grid)
    g_fine = np.asarray(g_fine, dtype=float)
    if g_fine.shape[-1] != fine.n_unknowns:
        raise ValueError(f"initial samples have {g_fine.shape[-1]} unknowns, fine grid has {fine.n_unknowns}")
    if system is None:
        system = OdeSystem(fine.laplacian(sparse=True), spec.nonlinearity)
    elif system.dim != fine.n_unknowns:
        raise ValueError("system does not match the fine grid")
    out = rollout(CRANK_NICOLSON, system, spec.terminal_time, solver.n_steps, g_fine)
    return out[..., solver.restriction_indices(spec.grid)]


def _frac_grid(p1s, p2s):
    return tuple((a, b) for a in p1s for b in p2s)


_NU = 1 / 100

PRESETS = {
    "rd1d": ProblemSpec(
        name="rd1d",
        grid=GridSpec(1, 35, "dirichlet", _NU),
        nonlinearity=NONLINEARITIES["reaction_diffusion"],
        terminal_time=1.0,
        law=SineDecay(),
        reference=ReferenceSolver(factor=8, n_steps=300),
        base_steps=5,
        diff_hidden=(50, 150),
        ann_hidden=(100, 220, 150),
        sweep_grid=_frac_grid([i / 10 for i in range(1, 10)], [j / 10 for j in range(3, 10)]),
        sample_box=((0.1, 0.9), (0.3, 0.9)),
    ),
    "sg1d": ProblemSpec(
        name="sg1d",
        grid=GridSpec(1, 30, "periodic", _NU),
        nonlinearity=NONLINEARITIES["sine"],
        terminal_time=2.0,
        law=FourierDecay(),
        reference=ReferenceSolver(factor=14, n_steps=420),
        base_steps=15,
        diff_hidden=(128, 128),
        ann_hidden=(100, 300, 160),
        sweep_grid=_frac_grid([1 / 10, 3 / 10, 5 / 10, 7 / 10, 9 / 10], [6 / 30, 13 / 30, 20 / 30, 27 / 30]),
        sample_box=((0.1, 0.9), (0.2, 0.9)),
    ),
    "heat2d": ProblemSpec(
        name="heat2d",
        grid=GridSpec(2, 40, "periodic", _NU),
        nonlinearity=NONLINEARITIES["sqrt_one_plus_sq"],
        terminal_time=2.0,
        law=Grf2d(),
        reference=ReferenceSolver(factor=2, n_steps=200),
        base_steps=2,
        diff_hidden=(512, 512),
        ann_hidden=(3200, 3200, 3200),
        sweep_grid=_frac_grid([i / 10 for i in range(1, 10)], [j / 10 for j in range(2, 10)]),
        sample_box=((0.1, 0.9), (0.2, 0.9)),
        eval_batch=512,
    ),
}


def get_problem(name: str) -> ProblemSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown problem preset {name!r}; choose from {sorted(PRESETS)}") from None
