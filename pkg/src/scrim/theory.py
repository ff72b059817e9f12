"""Exact convergence-rate quantities for finite sketch spaces.

For a reduced matrix ``M = A_Ir P`` and a finite sketch space, the rate of
SCRIM in expectation is ``rho = 1 - zeta (2 - zeta) sigma_min(H^{1/2} M)^2``
with ``H = E[S S^T / ||S^T M||_2^2]``; ``sigma_min`` is always the smallest
*nonzero* singular value. Rank decisions on ``M`` take an optional
``scale`` (the norm of ``A``) so that a reduced matrix that is pure
rounding noise counts as zero. Everything here is computed by enumerating the
atoms of the space, using the convention ``0/0 = 0``.
"""
from dataclasses import asdict, dataclass

import numpy as np

from .constraint import build_constraint
from .linalg import DEFAULT_RANK_TOL, as_matrix, svd_truncated
from .sampling import BlockSpace, enumerate_atoms


@dataclass
class RateReport:
    zeta: float
    sigma_min_h_half: float = None
    rho: float = None
    rho_tilde: float = None
    surrogate_lower_bound: float = None
    kappa_scaled: float = None
    reason: str = ""

    def to_dict(self):
        return asdict(self)


def _zero_cut(m, scale=None):
    """Absolute size below which ``||S^T M||`` counts as zero."""
    if m.size == 0:
        return 0.0
    ref = float(np.linalg.norm(m, 2))
    if scale is not None:
        ref = max(ref, float(scale))
    return DEFAULT_RANK_TOL * max(m.shape) * ref


def compute_h_matrices(space, a_ir_p, scale=None):
    """``(H, H_bar)`` with ``H = E[S S^T / ||S^T M||_2^2]`` and ``H_bar = E[S S^T / ||S||_2^2]``.

    Atoms with ``S^T M = 0`` (numerically) contribute nothing to ``H``:
    such sketches never produce a step, so they are resampled.
    """
    m_mat = as_matrix(a_ir_p, "a_ir_p")
    size = space.size
    if m_mat.shape[0] != size:
        raise ValueError(f"space acts on {size} rows but the matrix has {m_mat.shape[0]}")
    cut = _zero_cut(m_mat, scale)
    h = np.zeros((size, size))
    h_bar = np.zeros((size, size))
    for s, p in enumerate_atoms(space):
        if p == 0.0 or s.width == 0:
            continue
        gram = s.gram(size)
        sm = s.sketch_rows(m_mat)
        sm_norm = float(np.linalg.norm(sm, 2)) if sm.size else 0.0
        if sm_norm > cut:
            h += (p / sm_norm ** 2) * gram
        s_norm2 = 1.0 if s.matrix is None else float(np.linalg.norm(s.matrix, 2)) ** 2
        if s_norm2 > 0:
            h_bar += (p / s_norm2) * gram
    return h, h_bar


def psd_sqrt(h):
    w, v = np.linalg.eigh((h + h.T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sigma_min_nonzero(m, rank_tol=DEFAULT_RANK_TOL, scale=None):
    f = svd_truncated(m, rank_tol, scale)
    if f.rank == 0:
        return 0.0
    return float(f.sigma[-1])


def _sigma_min_weighted(h, m_mat, rank_tol, scale):
    """Smallest nonzero singular value of ``H^{1/2} M``.

    ``H`` is positive definite on the rows a covering space can reach, so
    ``H^{1/2} M`` has the rank of ``M``; that rank is decided on ``M``,
    where the scale of ``A`` is known.
    """
    if m_mat.size == 0:
        return 0.0
    r = svd_truncated(m_mat, rank_tol, scale).rank
    if r == 0:
        return 0.0
    return float(np.linalg.svd(psd_sqrt(h) @ m_mat, compute_uv=False)[r - 1])


def compute_rho(h, a_ir_p, zeta, rank_tol=DEFAULT_RANK_TOL, scale=None):
    """Return ``(sigma_min(H^{1/2} M), rho)``; raises if ``M`` is zero."""
    m_mat = as_matrix(a_ir_p, "a_ir_p")
    sig = _sigma_min_weighted(h, m_mat, rank_tol, scale)
    if sig == 0.0:
        raise ValueError("A_Ir P is zero: the convergence factor is undefined")
    return sig, 1.0 - zeta * (2.0 - zeta) * sig ** 2


def rate_report(space, a_ir_p, zeta=1.0, rank_tol=DEFAULT_RANK_TOL, scale=None):
    """Assemble a :class:`RateReport` for one sketch space and reduced matrix."""
    m_mat = as_matrix(a_ir_p, "a_ir_p")
    rep = RateReport(zeta=zeta)
    sig_m = sigma_min_nonzero(m_mat, rank_tol, scale) if m_mat.size else 0.0
    if sig_m == 0.0:
        rep.reason = "A_Ir P is zero"
        return rep
    h, h_bar = compute_h_matrices(space, m_mat, scale)
    rep.sigma_min_h_half, rep.rho = compute_rho(h, m_mat, zeta, rank_tol, scale)
    fro = float(np.linalg.norm(m_mat))
    rep.kappa_scaled = fro / sig_m
    rep.surrogate_lower_bound = float(np.linalg.eigvalsh(h_bar)[0]) * sig_m / fro
    return rep


@dataclass
class SurrogateReport:
    lhs: float
    rhs: float
    margin: float
    passed: bool


def verify_surrogate_bound(h, h_bar, a_ir_p, slack=1e-10, rank_tol=DEFAULT_RANK_TOL, scale=None):
    """Check ``sigma_min(H^{1/2} M) >= lambda_min(H_bar) sigma_min(M) / ||M||_F``."""
    m_mat = as_matrix(a_ir_p, "a_ir_p")
    lhs = _sigma_min_weighted(h, m_mat, rank_tol, scale)
    rhs = float(np.linalg.eigvalsh((h_bar + h_bar.T) / 2)[0]) * sigma_min_nonzero(m_mat, rank_tol, scale) / float(
        np.linalg.norm(m_mat))
    return SurrogateReport(lhs, rhs, lhs - rhs, lhs >= rhs - slack)


@dataclass
class RateComparison:
    rho: float
    rho_tilde: float
    passed: bool
    reason: str = ""


def induced_space(blocks, probs, i_r, m):
    """Push a block space over all ``m`` rows forward to the rows ``i_r``.

    Each block keeps its probability; rows outside ``i_r`` are dropped, so
    blocks inside ``I_p`` become the zero sketch.
    """
    pos = np.full(m, -1, dtype=np.int64)
    pos[i_r] = np.arange(i_r.size)
    local = []
    for blk in blocks:
        loc = pos[np.asarray(blk, dtype=np.int64)]
        local.append(np.sort(loc[loc >= 0]))
    return BlockSpace(local, probs, i_r.size)


def _check_partition(blocks, m):
    seen = np.zeros(m, dtype=np.int64)
    for blk in blocks:
        blk = np.asarray(blk, dtype=np.int64)
        if blk.size and (blk.min() < 0 or blk.max() >= m):
            raise ValueError(f"block index out of range for m={m}")
        np.add.at(seen, blk, 1)
    if not np.all(seen == 1):
        raise ValueError("blocks must partition {0, ..., m-1}: every row exactly once")


def compare_rates(a, i_p, blocks, zeta=1.0, probs=None, rank_tol=DEFAULT_RANK_TOL, tol=1e-12):
    """Constrained rate ``rho`` vs unconstrained ``rho_tilde`` for one block space.

    ``blocks`` partition all rows of ``A``; the unconstrained method samples
    block ``i`` with probability ``probs[i]`` (default: squared Frobenius
    norm of the block). The constrained method uses the pushforward of that
    space onto ``I_r``. When the pushforward does not cover every row of
    ``I_r`` the comparison is skipped (``passed is None``).
    """
    a = as_matrix(a)
    m = a.shape[0]
    blocks = [np.asarray(blk, dtype=np.int64).reshape(-1) for blk in blocks]
    _check_partition(blocks, m)
    if probs is None:
        probs = np.array([float(np.sum(a[blk] ** 2)) for blk in blocks])
    full = BlockSpace(blocks, probs, m)
    h_tilde, _ = compute_h_matrices(full, a)
    _, rho_tilde = compute_rho(h_tilde, a, zeta, rank_tol)
    f = build_constraint(a, np.zeros(m), i_p, rank_tol)
    if f.partition.m_r == 0:
        return RateComparison(None, rho_tilde, None, "no remaining rows")
    red = f.reduced_matrix()
    scale = float(np.linalg.norm(a, 2))
    if sigma_min_nonzero(red, rank_tol, scale) == 0.0:
        return RateComparison(None, rho_tilde, None, "A_Ir P is zero")
    space = induced_space(blocks, full.probs, f.partition.i_r, m)
    if not space.covers_all_rows():
        return RateComparison(None, rho_tilde, None, "pushforward space does not cover I_r")
    h, _ = compute_h_matrices(space, red, scale)
    _, rho = compute_rho(h, red, zeta, rank_tol, scale)
    return RateComparison(rho, rho_tilde, bool(rho <= rho_tilde + tol))


@dataclass
class InterlacingReport:
    sv_a: np.ndarray
    sv_reduced: np.ndarray
    rank_a: int
    rank_p: int
    rank_reduced: int
    max_violation: float
    rank_additive: bool
    passed: bool


def _padded_sv(m, n):
    out = np.zeros(n)
    if m.size:
        s = np.linalg.svd(m, compute_uv=False)
        out[:s.size] = s
    return out


def verify_interlacing(a, i_p, slack=1e-8, rank_tol=DEFAULT_RANK_TOL):
    """Check ``sigma_{i+r_p}(A) <= sigma_i(A_Ir P) <= sigma_i(A)`` and rank additivity."""
    a = as_matrix(a)
    m, n = a.shape
    f = build_constraint(a, np.zeros(m), i_p, rank_tol)
    red = f.reduced_matrix()
    sv_a = _padded_sv(a, n)
    sv_r = _padded_sv(red, n)
    r_p = f.r_p
    rank_a = svd_truncated(a, rank_tol).rank
    # rank of A_Ir P relative to the scale of A: its rows are rounded against a basis of size ||A||
    cut = rank_tol * max(m, n) * (sv_a[0] if n else 0.0)
    rank_red = int(np.count_nonzero(sv_r > cut))
    viol = 0.0
    for i in range(n - r_p):
        viol = max(viol, sv_r[i] - sv_a[i], sv_a[i + r_p] - sv_r[i])
    additive = rank_red == rank_a - r_p
    return InterlacingReport(sv_a, sv_r, rank_a, r_p, rank_red, float(viol), additive,
                             bool(viol <= slack and additive))


def fit_contraction_rate(ks, mean_err, k_min=20, k_max=200):
    """Least-squares slope of ``log(mean_err)`` over ``k_min <= k <= k_max``, as a rate."""
    ks = np.asarray(ks)
    mean_err = np.asarray(mean_err)
    sel = (ks >= k_min) & (ks <= k_max) & (mean_err > 0)
    slope = np.polyfit(ks[sel], np.log(mean_err[sel]), 1)[0]
    return float(np.exp(slope))
