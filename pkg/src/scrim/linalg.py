"""Dense linear-algebra kernels shared by the rest of the package.

Matrices and vectors are plain float64 numpy arrays. The helpers here
validate shapes and finiteness at the package boundary, compute
rank-revealing truncated SVDs, and apply Moore-Penrose pseudoinverses
without forming them.
"""
from dataclasses import dataclass

import numpy as np

DEFAULT_RANK_TOL = 1e-12


def as_matrix(a, name="a"):
    """Return `a` as a finite 2-D float64 array (copying only if needed)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def as_vector(v, name="v"):
    """Return `v` as a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``A = U diag(sigma) Vt`` restricted to the numerical rank.

    Attributes
    ----------
    u : ndarray, shape (m, r)
    sigma : ndarray, shape (r,)
        Positive singular values in nonincreasing order.
    vt : ndarray, shape (r, n)
    """

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    @property
    def rank(self):
        return self.sigma.shape[0]

    @property
    def shape(self):
        return (self.u.shape[0], self.vt.shape[1])


def svd_truncated(a, rank_tol=DEFAULT_RANK_TOL, scale=None):
    """Truncated SVD keeping ``sigma_i > rank_tol * max(m, n) * sigma_1``.

    ``scale`` replaces ``sigma_1`` in the cut when larger; pass the norm of
    a parent matrix when ``a`` was derived from it and may be pure rounding
    noise. The zero matrix (and a matrix with no rows or columns) gives
    rank 0 with empty factors.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m == 0 or n == 0:
        return SvdFactors(np.zeros((m, 0)), np.zeros(0), np.zeros((0, n)))
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"SVD did not converge for a {m}x{n} matrix") from exc
    if s.size == 0 or s[0] == 0.0:
        return SvdFactors(np.zeros((m, 0)), np.zeros(0), np.zeros((0, n)))
    ref = s[0] if scale is None else max(s[0], float(scale))
    r = int(np.count_nonzero(s > rank_tol * max(m, n) * ref))
    return SvdFactors(u[:, :r].copy(), s[:r].copy(), vt[:r].copy())


def numerical_rank(a, rank_tol=DEFAULT_RANK_TOL, scale=None):
    return svd_truncated(a, rank_tol, scale).rank


def pinv_apply(f, v):
    """Apply ``A^+ v = V diag(1/sigma) U^T v`` from cached factors."""
    v = np.asarray(v, dtype=np.float64)
    m = f.shape[0]
    if v.shape[0] != m:
        raise ValueError(f"dimension mismatch: factors have {m} rows, vector has length {v.shape[0]}")
    return f.vt.T @ ((f.u.T @ v) / (f.sigma if v.ndim == 1 else f.sigma[:, None]))


def pinv_matrix(f):
    """Explicit pseudoinverse from factors (verification paths only)."""
    return (f.vt.T / f.sigma) @ f.u.T


def pinv_solve_least_norm(a, b, rank_tol=DEFAULT_RANK_TOL, scale=None):
    """Minimum-norm least-squares solution ``A^+ b`` by truncated SVD."""
    a = as_matrix(a)
    b = as_vector(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A is {a.shape[0]}x{a.shape[1]}, b has length {b.shape[0]}")
    return pinv_apply(svd_truncated(a, rank_tol, scale), b)


def matvec(a, v):
    if a.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ ({v.shape[0]},)")
    return a @ v


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def gram_row_norms(a):
    """Squared Euclidean row norms ``||a_i||^2``."""
    a = np.asarray(a, dtype=np.float64)
    return np.einsum("ij,ij->i", a, a)
