"""Dense matrix/vector kernel used by every other module.

All routines operate on float64 numpy arrays and are deterministic: identical
inputs produce bit-identical outputs. Matrices in this package are tiny
(n <= ~8), so clarity and reproducibility win over speed everywhere.
"""

from __future__ import annotations

import numpy as np

# Relative asymmetry above this in a "symmetric" input is treated as a bug in
# the caller, not as noise to be averaged away.
SYM_TOL = 1e-9

# Residual gate for solve_linear: ||a v - b|| <= SOLVE_RTOL * (1 + ||b||).
SOLVE_RTOL = 1e-10


class SingularMatrixError(ValueError):
    """Linear solve hit a matrix that is singular to working tolerance."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d float array, rejecting anything else."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected 2-d array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: entries must be finite")
    return arr


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-d float array."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name}: expected 1-d array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: entries must be finite")
    return arr


def require_square(a, name: str = "matrix") -> np.ndarray:
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name}: expected square matrix, got shape {arr.shape}")
    return arr


def mat_mul(a, b) -> np.ndarray:
    """Matrix product with explicit dimension checking."""
    am = as_matrix(a, "a")
    bm = as_matrix(b, "b")
    if am.shape[1] != bm.shape[0]:
        raise ValueError(f"dimension mismatch: {am.shape} x {bm.shape}")
    return am @ bm


def solve_linear(a, b) -> np.ndarray:
    """Solve a v = b with row pivoting (LAPACK LU).

    The result is gated on the residual ||a v - b|| <= 1e-10 * (1 + ||b||);
    a failure of that bound, or an exactly singular factorization, raises
    SingularMatrixError.
    """
    am = require_square(a, "a")
    bv = as_vector(b, "b")
    if am.shape[0] != bv.shape[0]:
        raise ValueError(f"dimension mismatch: {am.shape} vs rhs {bv.shape}")
    try:
        v = np.linalg.solve(am, bv)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular matrix: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise SingularMatrixError("singular matrix: non-finite solution")
    residual = np.linalg.norm(am @ v - bv)
    if residual > SOLVE_RTOL * (1.0 + np.linalg.norm(bv)):
        raise SingularMatrixError(
            f"singular to tolerance: residual {residual:.3e} exceeds bound"
        )
    return v


def symmetrize(s, name: str = "matrix") -> np.ndarray:
    """Return (s + s^T)/2, rejecting inputs with asymmetry beyond SYM_TOL.

    Asymmetry is measured as max|s - s^T| relative to 1 + max|s|; anything
    larger indicates an assembly bug upstream rather than rounding noise.
    """
    arr = require_square(s, name)
    asym = np.max(np.abs(arr - arr.T)) if arr.size else 0.0
    if asym > SYM_TOL * (1.0 + np.max(np.abs(arr), initial=0.0)):
        raise ValueError(f"{name}: asymmetry {asym:.3e} beyond tolerance")
    return 0.5 * (arr + arr.T)


def sym_eigen(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, orthonormal basis as columns) such that
    s @ basis[:, i] == eigenvalues[i] * basis[:, i] up to roundoff. The input
    is symmetrized first; see symmetrize() for the asymmetry gate.
    """
    sym = symmetrize(s, "s")
    vals, vecs = np.linalg.eigh(sym)
    return vals, vecs


def spectral_norm(a) -> float:
    """Induced 2-norm: sqrt of the largest eigenvalue of a^T a."""
    am = as_matrix(a, "a")
    if not np.any(am):
        return 0.0
    vals, _ = sym_eigen(am.T @ am)
    return float(np.sqrt(max(vals[-1], 0.0)))


def is_negative_definite(s, margin: float = 0.0) -> bool:
    """True iff lambda_max(sym(s)) <= -margin.

    Implemented as a Cholesky attempt on -(s + margin I): it succeeds exactly
    when that shift is positive definite. Exact-boundary inputs (an eigenvalue
    at -margin) report False, a discrepancy of measure zero versus the
    eigenvalue route that callers absorb with a tiny slack.
    """
    if margin < 0.0:
        raise ValueError("margin must be >= 0")
    sym = symmetrize(s, "s")
    shifted = -(sym + margin * np.eye(sym.shape[0]))
    try:
        np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError:
        return False
    return True
