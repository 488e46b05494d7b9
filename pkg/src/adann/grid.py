"""Finite-difference Laplacians on uniform 1D/2D grids and shifted linear solves.

Operators are dense ``numpy`` arrays by default; ``sparse=True`` gives CSR
matrices with identical entries, which the fine reference grids use. States are
arrays whose last axis runs over grid unknowns; 2D unknowns are ordered
row-major over ``(i, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import linalg
from scipy.sparse.linalg import splu

BOUNDARIES = ("dirichlet", "periodic")


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when ``I - c*A`` cannot be factorized reliably."""


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    points_per_axis: int
    boundary: str
    diffusion_scale: float = 1.0

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.points_per_axis < 1:
            raise ValueError("points_per_axis must be positive")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if self.diffusion_scale < 0:
            raise ValueError("diffusion_scale must be nonnegative")

    @property
    def n_unknowns(self) -> int:
        return self.points_per_axis**self.dimension

    def axis_nodes(self) -> np.ndarray:
        n = self.points_per_axis
        if self.boundary == "dirichlet":
            return np.arange(1, n + 1) / (n + 1)
        return np.arange(n) / n

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(N,)`` in 1D or ``(N*N, 2)`` in 2D."""
        x = self.axis_nodes()
        if self.dimension == 1:
            return x
        xx, yy = np.meshgrid(x, x, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=-1)

    def laplacian(self, sparse: bool = False):
        n, nu = self.points_per_axis, self.diffusion_scale
        if self.boundary == "dirichlet":
            if self.dimension == 2:
                raise NotImplementedError("2D Dirichlet grids are not supported")
            return build_dirichlet_laplacian_1d(n, nu, sparse)
        if self.dimension == 1:
            return build_periodic_laplacian_1d(n, nu, sparse)
        return build_periodic_laplacian_2d(n, nu, sparse)


def _second_difference(n: int, as_sparse: bool = False):
    if as_sparse:
        return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n), format="lil")
    return -2.0 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)


def _finish(M, as_sparse):
    return M.tocsr() if as_sparse else M


def build_dirichlet_laplacian_1d(n: int, nu: float = 1.0, sparse: bool = False):
    """``nu * (n+1)**2 * tridiag(1, -2, 1)`` on the nodes ``i/(n+1)``, i=1..n."""
    if n < 1:
        raise ValueError("need at least one interior node")
    return _finish(nu * (n + 1) ** 2 * _second_difference(n, sparse), sparse)


def _periodic_stencil(n: int, as_sparse: bool = False):
    if n < 3:
        raise ValueError("periodic stencil needs at least 3 nodes")
    D = _second_difference(n, as_sparse)
    D[0, n - 1] = D[n - 1, 0] = 1.0
    return n**2 * (D.tocsr() if as_sparse else D)


def build_periodic_laplacian_1d(n: int, nu: float = 1.0, sparse: bool = False):
    """Circulant second difference on the nodes ``i/n``, i=0..n-1."""
    return _finish(nu * _periodic_stencil(n, sparse), sparse)


def build_periodic_laplacian_2d(n: int, nu: float = 1.0, sparse: bool = False):
    """Kronecker sum ``A1 (x) I + I (x) A1`` of the 1D periodic operator."""
    A1 = _periodic_stencil(n, sparse)
    if sparse:
        eye = sp.identity(n, format="csr")
        return (nu * (sp.kron(A1, eye) + sp.kron(eye, A1))).tocsr()
    eye = np.eye(n)
    return nu * (np.kron(A1, eye) + np.kron(eye, A1))


class ShiftedSolver:
    """LU factorization of ``I - c*A`` reused across many right-hand sides.

    Dense operators use LAPACK with a reciprocal-condition check; sparse
    operators use SuperLU. ``solve`` accepts a single state ``(d,)`` or a
    batch ``(..., d)``.
    """

    def __init__(self, A, c: float, rcond_min: float = 1e-13):
        self.sparse = sp.issparse(A)
        A = sp.csc_matrix(A, dtype=float) if self.sparse else np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"operator must be square, got shape {A.shape}")
        self.A = A
        self.c = float(c)
        if self.sparse:
            self.matrix = (sp.identity(A.shape[0], format="csc") - self.c * A).tocsc()
            try:
                self._lu = splu(self.matrix)
            except RuntimeError as exc:
                raise SingularSystemError(f"I - {self.c}*A is singular: {exc}") from exc
            self.rcond = float("nan")
            return
        self.matrix = np.eye(A.shape[0]) - self.c * A
        with np.errstate(all="ignore"):
            lu, piv, info = linalg.lapack.dgetrf(self.matrix)
        if info > 0:
            raise SingularSystemError(f"I - {self.c}*A is singular (zero pivot {info})")
        anorm = np.abs(self.matrix).sum(axis=0).max()
        rcond, _ = linalg.lapack.dgecon(lu, anorm, norm="1")
        if not np.isfinite(rcond) or rcond < rcond_min:
            raise SingularSystemError(f"I - {self.c}*A is ill-conditioned (rcond={rcond:.3g})")
        self.rcond = float(rcond)
        self._lu = (lu, piv)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def _solve_columns(self, B: np.ndarray) -> np.ndarray:
        if self.sparse:
            return self._lu.solve(np.asfortranarray(B))
        return linalg.lu_solve(self._lu, B, check_finite=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[-1] != self.dim:
            raise ValueError(f"expected last axis {self.dim}, got shape {b.shape}")
        if b.ndim == 1:
            return self._solve_columns(b)
        flat = b.reshape(-1, self.dim)
        return self._solve_columns(flat.T).T.reshape(b.shape)

    def inverse(self) -> np.ndarray:
        """Dense ``(I - c*A)^-1``, obtained by solving against the identity."""
        return self._solve_columns(np.eye(self.dim))


def make_shifted_solver(A, c: float) -> ShiftedSolver:
    if c < 0:
        raise ValueError("shift coefficient must be nonnegative")
    return ShiftedSolver(A, c)
