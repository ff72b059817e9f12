"""Subspace-constraint machinery for a fixed set of constraint rows.

Given the constraint rows ``I_p`` of ``A``, everything the solvers need is
kept in a :class:`ConstraintFactor`: an orthonormal basis ``Vp`` of
``Range(A_Ip^T)`` (so that ``P = I - A_Ip^+ A_Ip = I - Vp Vp^T`` is applied
without being formed), the truncated SVD of ``A_Ip`` for applying
``A_Ip^+``, and the feasible starting point ``x0 = A_Ip^+ b_Ip``.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .linalg import (
    DEFAULT_RANK_TOL,
    SvdFactors,
    as_matrix,
    as_vector,
    pinv_apply,
    pinv_matrix,
    pinv_solve_least_norm,
    svd_truncated,
)


class InconsistentSubsystemError(ValueError):
    """The constraint rows ``A_Ip x = b_Ip`` admit no exact solution."""


@dataclass(frozen=True)
class IndexPartition:
    """Split of ``{0, ..., m-1}`` into constraint rows and remaining rows."""

    i_p: np.ndarray
    i_r: np.ndarray

    @classmethod
    def from_constraint_rows(cls, i_p, m):
        idx = np.asarray(list(i_p) if not isinstance(i_p, np.ndarray) else i_p, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= m):
            raise ValueError(f"constraint row index out of range for m={m}: {idx.min()}..{idx.max()}")
        uniq = np.unique(idx)
        if uniq.size != idx.size:
            raise ValueError("constraint row indices must be distinct")
        mask = np.ones(m, dtype=bool)
        mask[uniq] = False
        return cls(uniq, np.flatnonzero(mask))

    @property
    def m(self):
        return self.i_p.size + self.i_r.size

    @property
    def m_p(self):
        return self.i_p.size

    @property
    def m_r(self):
        return self.i_r.size


@dataclass(frozen=True)
class ConstraintFactor:
    """Cached factorization of ``A_Ip`` together with the remaining rows.

    ``a_ir`` and ``b_ir`` are copies of the non-constraint rows, kept here
    because every solver iteration touches them.
    """

    partition: IndexPartition
    vp: np.ndarray
    pinv_factors: SvdFactors
    x0: np.ndarray
    a_ip: np.ndarray
    b_ip: np.ndarray
    a_ir: np.ndarray
    b_ir: np.ndarray

    @property
    def r_p(self):
        return self.pinv_factors.rank

    @property
    def n(self):
        return self.vp.shape[0]

    @cached_property
    def b_ir_norm(self):
        return float(np.linalg.norm(self.b_ir))

    @cached_property
    def a_ir_fro(self):
        return float(np.linalg.norm(self.a_ir))

    def apply_p(self, v):
        """Project onto ``Null(A_Ip)``: ``v - Vp (Vp^T v)``; works on columns of a matrix too."""
        if v.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: expected leading size {self.n}, got {v.shape[0]}")
        if self.r_p == 0:
            return np.array(v, dtype=np.float64, copy=True)
        if self.r_p == self.n:
            # Null(A_Ip) = {0}; subtracting would leave only rounding residue
            return np.zeros(np.shape(v))
        return v - self.vp @ (self.vp.T @ v)

    def apply_pinv(self, v):
        """Apply ``A_Ip^+`` to a vector of length ``m_p``."""
        return pinv_apply(self.pinv_factors, v)

    def reduced_matrix(self):
        """Explicit ``A_Ir P`` (rows of ``A_Ir`` projected onto ``Null(A_Ip)``).

        Projected twice: when ``A_Ir P`` is tiny compared to ``A_Ir`` (rows of
        ``A_Ir`` nearly inside ``Range(A_Ip^T)``), one pass leaves rounding
        noise that is not orthogonal to ``A_Ip``; a second pass fixes that.
        """
        once = self.apply_p(self.a_ir.T)
        return self.apply_p(once).T

    def scale(self):
        """Estimate of ``||A||_2`` (within a factor ``sqrt(2)``), the reference for rank decisions on ``A_Ir P``."""
        top_ip = float(self.pinv_factors.sigma[0]) if self.r_p else 0.0
        top_ir = float(np.linalg.norm(self.a_ir, 2)) if self.a_ir.size else 0.0
        return max(top_ip, top_ir)

    def reduced_rhs(self):
        """``b_Ir - A_Ir A_Ip^+ b_Ip``."""
        return self.b_ir - self.a_ir @ self.x0


def build_constraint(a, b, i_p, rank_tol=DEFAULT_RANK_TOL, consistency_tol=1e-8):
    """Factor the constraint rows ``i_p`` of the system ``A x = b``.

    Raises
    ------
    InconsistentSubsystemError
        If ``||A_Ip x0 - b_Ip|| > consistency_tol * ||b_Ip||``.
    """
    a = as_matrix(a)
    b = as_vector(b, "b")
    m, n = a.shape
    if b.shape[0] != m:
        raise ValueError(f"dimension mismatch: A is {m}x{n}, b has length {b.shape[0]}")
    part = IndexPartition.from_constraint_rows(i_p, m)
    a_ip = a[part.i_p]
    b_ip = b[part.i_p]
    f = svd_truncated(a_ip, rank_tol)
    x0 = pinv_apply(f, b_ip) if part.m_p else np.zeros(n)
    if part.m_p:
        resid = float(np.linalg.norm(a_ip @ x0 - b_ip))
        bound = consistency_tol * float(np.linalg.norm(b_ip))
        if resid > bound:
            raise InconsistentSubsystemError(
                f"constraint subsystem is inconsistent: ||A_Ip x0 - b_Ip|| = {resid:.3e} > {bound:.3e}"
            )
    return ConstraintFactor(
        partition=part,
        vp=f.vt.T.copy(),
        pinv_factors=f,
        x0=x0,
        a_ip=a_ip,
        b_ip=b_ip,
        a_ir=a[part.i_r],
        b_ir=b[part.i_r],
    )


def apply_p(f, v):
    return f.apply_p(np.asarray(v, dtype=np.float64))


def id_error(a, f):
    """Interpolative-decomposition error ``||A - A A_Ip^+ A_Ip||_F = ||A P||_F``."""
    return float(np.linalg.norm(f.apply_p(np.asarray(a, dtype=np.float64).T)))


@dataclass(frozen=True)
class QrLikeFactorization:
    """``A = L @ a_hat`` with block-orthogonal ``a_hat`` and unit block-triangular ``L``.

    All arrays use the original row order of ``A``: rows in ``I_p`` of
    ``a_hat`` are ``A_Ip``, rows in ``I_r`` are ``A_Ir P``; ``L`` is the
    identity except for the ``(I_r, I_p)`` block ``A_Ir A_Ip^+``.
    """

    a_hat: np.ndarray
    l: np.ndarray
    b_hat: np.ndarray
    partition: IndexPartition


def qr_like_factorize(a, b, f):
    a = as_matrix(a)
    b = as_vector(b, "b")
    part = f.partition
    m = a.shape[0]
    a_hat = a.copy()
    a_hat[part.i_r] = f.reduced_matrix()
    l = np.eye(m)
    if part.m_p and part.m_r:
        coupling = (f.a_ir @ pinv_matrix(f.pinv_factors)) if f.r_p else np.zeros((part.m_r, part.m_p))
        l[np.ix_(part.i_r, part.i_p)] = coupling
    b_hat = b.copy()
    b_hat[part.i_r] = f.reduced_rhs()
    return QrLikeFactorization(a_hat, l, b_hat, part)


def least_norm_via_blocks(a, b, f, rank_tol=DEFAULT_RANK_TOL):
    """``A^+ b`` assembled as ``A_Ip^+ b_Ip + (A_Ir P)^+ b_hat_Ir``."""
    if f.partition.m_r == 0:
        return f.x0.copy()
    return f.x0 + pinv_solve_least_norm(f.reduced_matrix(), f.reduced_rhs(), rank_tol, f.scale())


class PinvCheck(NamedTuple):
    passed: bool
    deviation: float
    scale: float


def stacked_pinv_check(b_mat, c_mat, tol=1e-9, orth_tol=1e-9, rank_tol=DEFAULT_RANK_TOL):
    """Compare ``pinv([B; C])`` with ``[pinv(B), pinv(C)]`` for ``B C^T = 0``.

    Returns the Frobenius deviation and whether it is within
    ``tol * max(1, ||pinv([B; C])||_F)``.
    """
    b_mat = as_matrix(b_mat, "B")
    c_mat = as_matrix(c_mat, "C")
    if b_mat.shape[1] != c_mat.shape[1]:
        raise ValueError(f"column mismatch: B has {b_mat.shape[1]}, C has {c_mat.shape[1]}")
    cross = float(np.linalg.norm(b_mat @ c_mat.T))
    if cross > orth_tol * max(1.0, np.linalg.norm(b_mat) * np.linalg.norm(c_mat)):
        raise ValueError(f"B C^T is not zero: ||B C^T||_F = {cross:.3e}")
    stacked = pinv_matrix(svd_truncated(np.vstack([b_mat, c_mat]), rank_tol))
    concat = np.hstack([pinv_matrix(svd_truncated(b_mat, rank_tol)), pinv_matrix(svd_truncated(c_mat, rank_tol))])
    dev = float(np.linalg.norm(stacked - concat))
    scale = max(1.0, float(np.linalg.norm(stacked)))
    return PinvCheck(dev <= tol * scale, dev, scale)
