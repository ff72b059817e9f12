"""Choosing the constraint rows ``I_p``.

Every strategy targets a small interpolative-decomposition error
``||A - A A_Ip^+ A_Ip||_F``, which equals ``||A_Ir P||_F``. The greedy ones
share the row-deflation kernel :func:`_cpqr_pivots`.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constraint import build_constraint, id_error
from .linalg import DEFAULT_RANK_TOL, as_matrix, gram_row_norms, svd_truncated
from .sampling import make_rng

METHODS = ("cpqr", "svd", "sqnorm", "skcpqr", "rbrp")

# relative residual row norm below which pivoting stops
_STOP_REL = 1e-12
# downdated squared norms below this fraction of their original value are recomputed
_CANCEL_FRAC = 1e-3


@dataclass
class SelectionResult:
    method: str
    m_p: int
    indices: np.ndarray
    seed: int = None
    achieved_id_error: float = None
    truncated: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "method": self.method,
            "m_p": int(self.m_p),
            "indices": [int(i) for i in self.indices],
            "seed": None if self.seed is None else int(self.seed),
            "achieved_id_error": self.achieved_id_error,
        }


def _cpqr_pivots(x, m_p):
    """Greedy row pivoting with rank-one deflation.

    Returns ``(pivots, truncated)``. ``x`` is consumed (deflated in place).
    Ties go to the lowest row index (``np.argmax`` semantics).
    """
    norms = gram_row_norms(x)
    orig = norms.copy()
    stop = (_STOP_REL * np.sqrt(norms.sum())) ** 2
    pivots = []
    for _ in range(m_p):
        s = int(np.argmax(norms))
        if norms[s] <= stop or norms[s] <= 0.0:
            return np.array(pivots, dtype=np.int64), True
        pivots.append(s)
        u = x[s] / np.sqrt(norms[s])
        coef = x @ u
        x -= np.outer(coef, u)
        x[s] = 0.0
        norms -= coef ** 2
        norms[s] = 0.0
        redo = norms < _CANCEL_FRAC * orig
        redo[s] = False
        if redo.any():
            norms[redo] = gram_row_norms(x[redo])
            orig[redo] = norms[redo]
        np.maximum(norms, 0.0, out=norms)
    return np.array(pivots, dtype=np.int64), False


def _check_mp(a, m_p):
    m = a.shape[0]
    if a.size == 0:
        raise ValueError("cannot select rows of an empty matrix")
    if not 1 <= m_p <= m:
        raise ValueError(f"m_p={m_p} must satisfy 1 <= m_p <= m={m}")


def select_cpqr(a, m_p):
    """Deterministic greedy (column-pivoted QR on ``A^T``) row selection."""
    a = as_matrix(a)
    _check_mp(a, m_p)
    pivots, truncated = _cpqr_pivots(a.copy(), m_p)
    return SelectionResult("cpqr", m_p, pivots, truncated=truncated)


def select_svd(a, m_p, rank_tol=DEFAULT_RANK_TOL):
    """CPQR on ``A V_k``, ``V_k`` the leading right singular vectors.

    ``m_p`` is clipped to the numerical rank of ``A`` with a warning.
    """
    a = as_matrix(a)
    _check_mp(a, m_p)
    f = svd_truncated(a, rank_tol)
    k = m_p
    notes = []
    if m_p > f.rank:
        k = f.rank
        msg = f"m_p={m_p} exceeds numerical rank {f.rank}; clipped"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    if k == 0:
        return SelectionResult("svd", m_p, np.zeros(0, dtype=np.int64), truncated=True, notes=notes)
    pivots, truncated = _cpqr_pivots(a @ f.vt[:k].T, k)
    return SelectionResult("svd", m_p, pivots, truncated=truncated or k < m_p, notes=notes)


def select_sqnorm(a, m_p, seed):
    """Sample ``m_p`` rows without replacement with probabilities ``||a_i||^2 / ||A||_F^2``.

    Draws are sequential; the distribution is renormalized over the
    remaining rows after each draw.
    """
    a = as_matrix(a)
    _check_mp(a, m_p)
    w = gram_row_norms(a)
    if np.count_nonzero(w) < m_p:
        raise ValueError(f"only {np.count_nonzero(w)} nonzero rows, cannot sample m_p={m_p}")
    rng = make_rng(seed)
    idx = _weighted_without_replacement(rng, w, m_p)
    return SelectionResult("sqnorm", m_p, idx, seed=seed)


def _weighted_without_replacement(rng, w, k):
    w = w.astype(np.float64, copy=True)
    out = np.empty(k, dtype=np.int64)
    for t in range(k):
        c = np.cumsum(w)
        j = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
        j = min(j, int(np.flatnonzero(w > 0)[-1]))
        out[t] = j
        w[j] = 0.0
    return out


def select_skcpqr(a, m_p, s, seed, sketch=None):
    """CPQR on the compressed rows ``Y = A G`` with Gaussian ``G`` (``n x s``).

    ``sketch`` overrides ``G`` (used to check the ``G = I`` reduction).
    """
    a = as_matrix(a)
    _check_mp(a, m_p)
    if s < m_p:
        raise ValueError(f"sketch columns s={s} must be >= m_p={m_p}")
    if sketch is None:
        sketch = make_rng(seed).standard_normal((a.shape[1], s))
    pivots, truncated = _cpqr_pivots(a @ np.asarray(sketch, dtype=np.float64), m_p)
    return SelectionResult("skcpqr", m_p, pivots, seed=seed, truncated=truncated)


def select_rbrp(a, m_p, b, seed, accept_ratio=None):
    """Robust blockwise random pivoting.

    Each round samples up to ``b`` candidate rows without replacement with
    probability proportional to their squared residual norms, runs greedy
    pivoting on the candidate block, and keeps candidates in pivot order
    while each one's residual squared norm is at least
    ``accept_ratio * (squared Frobenius norm of the remaining candidate residual)``.
    ``accept_ratio`` defaults to ``1 / b``. Accepted pivots deflate the
    global residual.
    """
    a = as_matrix(a)
    _check_mp(a, m_p)
    if b < 1:
        raise ValueError(f"block size b={b} must be >= 1")
    ratio = 1.0 / b if accept_ratio is None else float(accept_ratio)
    rng = make_rng(seed)
    x = a.copy()
    norms = gram_row_norms(x)
    stop = (_STOP_REL * np.linalg.norm(a)) ** 2
    chosen = []
    truncated = False
    while len(chosen) < m_p:
        live = norms > stop
        if not live.any():
            truncated = True
            break
        k = min(b, m_p - len(chosen), int(np.count_nonzero(live)))
        w = np.where(live, norms, 0.0)
        cand = _weighted_without_replacement(rng, w, k)
        local = x[cand].copy()
        lnorms = gram_row_norms(local)
        basis = []
        while True:
            avail = np.flatnonzero(lnorms > stop)
            if avail.size == 0:
                break
            j = int(avail[np.argmax(lnorms[avail])])
            if basis and lnorms[j] < ratio * lnorms[avail].sum():
                break
            u = local[j] / np.sqrt(lnorms[j])
            coef = local @ u
            local -= np.outer(coef, u)
            local[j] = 0.0
            lnorms = gram_row_norms(local)
            basis.append(u)
            chosen.append(int(cand[j]))
        for u in basis:
            x -= np.outer(x @ u, u)
        x[cand] = np.where(np.isin(cand, chosen)[:, None], 0.0, x[cand])
        norms = gram_row_norms(x)
    return SelectionResult("rbrp", m_p, np.array(chosen, dtype=np.int64), seed=seed, truncated=truncated)


def select_rows(a, method, m_p, seed=0, sketch_cols=None, block_size=None, rank_tol=DEFAULT_RANK_TOL,
                with_error=True):
    """Dispatch to a selection strategy; optionally attach the achieved ID error."""
    if method == "cpqr":
        res = select_cpqr(a, m_p)
    elif method == "svd":
        res = select_svd(a, m_p, rank_tol)
    elif method == "sqnorm":
        res = select_sqnorm(a, m_p, seed)
    elif method == "skcpqr":
        s = sketch_cols if sketch_cols is not None else m_p + 10
        res = select_skcpqr(a, m_p, s, seed)
    elif method == "rbrp":
        res = select_rbrp(a, m_p, block_size if block_size is not None else 4, seed)
    else:
        raise ValueError(f"unknown selection method {method!r}; expected one of {METHODS}")
    if with_error:
        res.achieved_id_error = selection_id_error(a, res.indices, rank_tol)
    return res


def selection_id_error(a, indices, rank_tol=DEFAULT_RANK_TOL):
    a = as_matrix(a)
    f = build_constraint(a, np.zeros(a.shape[0]), indices, rank_tol)
    return id_error(a, f)
