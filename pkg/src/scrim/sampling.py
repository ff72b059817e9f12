"""Finite probability spaces of sketching matrices.

A sketch ``S`` (``m_r x q``) only ever enters the solvers through ``S^T v``
and ``S w``. For row and block sketches ``S^T`` is a row-selection matrix,
so a draw is stored as an index array and applied by fancy indexing.
Small dense spaces are supported for verification.

Random streams are numpy ``Generator`` objects over the counter-based
Philox bit generator. :func:`make_rng` derives independent streams from a
base seed plus integer keys (e.g. trial index, purpose), so that trials run
in any order or concurrently produce identical results.
"""
from dataclasses import dataclass

import numpy as np

from .linalg import gram_row_norms


def make_rng(seed, *keys):
    """Independent Philox stream for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SketchDraw:
    """One sketch ``S``.

    ``kind`` is ``"row"`` or ``"block"`` (``indices`` holds the selected rows,
    possibly empty for the zero sketch) or ``"dense"`` (``matrix`` holds
    ``S`` explicitly).
    """

    kind: str
    indices: np.ndarray = None
    matrix: np.ndarray = None

    @property
    def width(self):
        return self.indices.size if self.matrix is None else self.matrix.shape[1]

    def apply_t(self, v):
        """``S^T v``."""
        if self.matrix is None:
            return v[self.indices]
        return self.matrix.T @ v

    def apply(self, w, size):
        """``S w`` as a vector of length ``size``."""
        if self.matrix is None:
            out = np.zeros(size)
            out[self.indices] = w
            return out
        return self.matrix @ w

    def sketch_rows(self, a):
        """``S^T a`` for a matrix ``a`` with ``m_r`` rows."""
        if self.matrix is None:
            return a[self.indices]
        return self.matrix.T @ a

    def gram(self, size):
        """Explicit ``S S^T`` (``size x size``)."""
        if self.matrix is None:
            out = np.zeros((size, size))
            out[self.indices, self.indices] = 1.0
            return out
        return self.matrix @ self.matrix.T


def _cdf(probs):
    c = np.cumsum(probs)
    c /= c[-1]
    return c


class SketchSpace:
    """Finite space ``{(S_j, p_j)}`` drawn i.i.d. by :meth:`draw`.

    Subclasses set ``size`` (the number of rows ``m_r`` of each ``S``),
    ``probs`` and implement :meth:`atom`.
    """

    kind = None
    size = 0
    probs = None

    def __len__(self):
        return self.probs.size

    def atom(self, j):
        raise NotImplementedError

    def draw(self, rng):
        """Draw one sketch from ``rng`` according to ``probs``."""
        j = int(np.searchsorted(self._cdf, rng.random(), side="right"))
        return self.atom(min(j, self._last))

    def _finalize(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0 or np.any(probs < 0) or not np.isfinite(probs).all():
            raise ValueError("atom probabilities must be a nonempty vector of nonnegative numbers")
        total = probs.sum()
        if total <= 0:
            raise ValueError("all atom probabilities are zero")
        self.probs = probs / total
        self._cdf = _cdf(self.probs)
        self._last = int(np.flatnonzero(self.probs > 0)[-1])


class BlockSpace(SketchSpace):
    """Block-indicator sketches ``S^T = I_{block}`` over ``{0, ..., size-1}``.

    Blocks may be empty (the zero sketch). Single-row spaces are block
    spaces whose blocks are singletons.
    """

    def __init__(self, blocks, probs, size, kind="block"):
        self.blocks = tuple(np.asarray(blk, dtype=np.int64).reshape(-1) for blk in blocks)
        self.size = int(size)
        self.kind = kind
        for blk in self.blocks:
            if blk.size and (blk.min() < 0 or blk.max() >= self.size):
                raise ValueError(f"block index out of range for size {self.size}")
        self.probs = probs
        self._finalize()
        if len(self.blocks) != self.probs.size:
            raise ValueError("need exactly one probability per block")

    def atom(self, j):
        return SketchDraw(self.kind, indices=self.blocks[j])

    def covers_all_rows(self):
        """Whether blocks with positive probability cover every row (then ``E[S S^T]`` is positive definite)."""
        covered = np.zeros(self.size, dtype=bool)
        for blk, p in zip(self.blocks, self.probs):
            if p > 0:
                covered[blk] = True
        return bool(covered.all())


class PartitionSpace(BlockSpace):
    """Fixed random partition of the rows into blocks of nominal size ``q``.

    Block ``I_i`` is drawn with probability ``||(A_Ir)_{I_i}||_F^2 / ||A_Ir||_F^2``.
    """

    def __init__(self, blocks, probs, size, q):
        super().__init__(blocks, probs, size, kind="block")
        self.q = int(q)


class DenseSpace(SketchSpace):
    """Finite space of explicit dense sketches (verification only)."""

    kind = "dense"

    def __init__(self, matrices, probs):
        self.matrices = tuple(np.asarray(s, dtype=np.float64) for s in matrices)
        self.size = self.matrices[0].shape[0]
        if any(s.shape[0] != self.size for s in self.matrices):
            raise ValueError("all sketches must have the same number of rows")
        self.probs = probs
        self._finalize()

    def atom(self, j):
        return SketchDraw("dense", matrix=self.matrices[j])


def make_single_row_space(row_sq_norms):
    """Sample row ``i`` with probability proportional to ``row_sq_norms[i]``.

    For SCRK-type sampling pass the squared row norms of ``A_Ir P``.
    """
    w = np.asarray(row_sq_norms, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("row norms must be a nonempty vector")
    if not np.any(w > 0):
        raise ValueError("all row norms are zero; no row can be sampled")
    return BlockSpace([[i] for i in range(w.size)], w, w.size, kind="row")


def make_partition_space(a_ir, q, rng):
    """Random partition of the rows of ``a_ir`` into blocks of size ``q``.

    The permutation is drawn once from ``rng`` (an ``int`` seed is accepted
    too) and stays fixed for the lifetime of the space.
    """
    a_ir = np.asarray(a_ir, dtype=np.float64)
    m_r = a_ir.shape[0]
    q = int(q)
    if not 1 <= q <= m_r:
        raise ValueError(f"block size q={q} must satisfy 1 <= q <= m_r={m_r}")
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    perm = rng.permutation(m_r)
    blocks = [np.sort(perm[i:i + q]) for i in range(0, m_r, q)]
    row_norms = gram_row_norms(a_ir)
    probs = np.array([row_norms[blk].sum() for blk in blocks])
    return PartitionSpace(blocks, probs, m_r, q)


def make_identity_space(m_r):
    """The one-atom space ``{I}``."""
    return BlockSpace([np.arange(m_r)], [1.0], m_r, kind="block")


def draw(space, rng):
    return space.draw(rng)


def enumerate_atoms(space):
    """All ``(SketchDraw, probability)`` pairs of a finite space, in atom order."""
    if not isinstance(space, SketchSpace):
        raise TypeError(f"{type(space).__name__} is not an enumerable sketch space")
    return [(space.atom(j), float(space.probs[j])) for j in range(len(space))]


def expected_gram(space):
    """``E[S S^T]`` by enumeration."""
    out = np.zeros((space.size, space.size))
    for s, p in enumerate_atoms(space):
        if p > 0:
            out += p * s.gram(space.size)
    return out
