"""Synthetic ``A = U D V^T`` matrices with three singular-value clusters.

``n_L`` large values come from ``R_L``, ``n_S`` small values from ``R_S``
and the remaining ``r - n_L - n_S`` from the middle interval ``R_M``, all
uniformly; they are sorted in nonincreasing order. ``U`` and ``V`` are the
Q factors of Gaussian matrices with the sign convention ``diag(R) >= 0``.
"""
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .linalg import pinv_solve_least_norm
from .sampling import make_rng

DEFAULT_RS = (50.0, 150.0)
DEFAULT_RM = (300.0, 400.0)
DEFAULT_RL = (900.0, 1000.0)


class SpecError(ValueError):
    """A :class:`ClusterSpec` violates one of its invariants."""


@dataclass(frozen=True)
class ClusterSpec:
    m: int
    n: int
    r: int
    n_l: int
    n_s: int
    kappa_m: float
    r_s: tuple = DEFAULT_RS
    r_m: tuple = DEFAULT_RM
    r_l: tuple = DEFAULT_RL
    seed: int = 0

    def validate(self):
        if min(self.m, self.n, self.r) < 1 or min(self.n_l, self.n_s) < 0:
            raise SpecError("m, n, r must be positive and n_L, n_S nonnegative")
        if not self.n_l + self.n_s < self.r <= min(self.m, self.n):
            raise SpecError(
                f"need n_L + n_S < r <= min(m, n); got n_L + n_S = {self.n_l + self.n_s}, r = {self.r}, "
                f"min(m, n) = {min(self.m, self.n)}")
        if not self.kappa_m > 1:
            raise SpecError(f"kappa_M must exceed 1, got {self.kappa_m}")
        (bs, gs), (bm, gm), (bl, gl) = self.r_s, self.r_m, self.r_l
        if not 0 < bm <= gm:
            raise SpecError(f"middle interval must satisfy 0 < beta_M <= gamma_M, got [{bm}, {gm}]")
        if gm / bm > self.kappa_m:
            raise SpecError(f"gamma_M / beta_M = {gm / bm:g} exceeds kappa_M = {self.kappa_m:g}")
        if self.n_s and not 0 < bs <= gs < bm:
            raise SpecError(f"small interval must satisfy 0 < beta_S <= gamma_S < beta_M, got [{bs}, {gs}]")
        if self.n_l and not gm < bl <= gl:
            raise SpecError(f"large interval must satisfy gamma_M < beta_L <= gamma_L, got [{bl}, {gl}]")
        return self

    def to_dict(self):
        d = asdict(self)
        for key in ("r_s", "r_m", "r_l"):
            d[key] = [float(v) for v in d[key]]
        return d


def _orthonormal(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs


def generate(spec):
    """Return ``(A, sigma)`` with ``sigma`` the nonincreasing singular values."""
    spec.validate()
    rng = make_rng(spec.seed)
    u = _orthonormal(rng, spec.m, spec.r)
    v = _orthonormal(rng, spec.n, spec.r)
    n_mid = spec.r - spec.n_l - spec.n_s
    sigma = np.concatenate([
        rng.uniform(*spec.r_l, size=spec.n_l),
        rng.uniform(*spec.r_m, size=n_mid),
        rng.uniform(*spec.r_s, size=spec.n_s),
    ])
    sigma = np.sort(sigma)[::-1]
    return (u * sigma) @ v.T, sigma


class ConsistentSystem(NamedTuple):
    b: np.ndarray
    x_ref: np.ndarray
    x_true: np.ndarray


def make_consistent_system(a, seed):
    """``b = A x_true`` with standard normal ``x_true``; ``x_ref = A^+ b`` is the solver target."""
    a = np.asarray(a, dtype=np.float64)
    x_true = make_rng(seed, 1).standard_normal(a.shape[1])
    b = a @ x_true
    return ConsistentSystem(b, pinv_solve_least_norm(a, b), x_true)
