"""Iteration engines: SCRIM and SC-IS-Krylov.

Both methods start from the feasible point ``x0 = A_Ip^+ b_Ip`` held by the
:class:`~scrim.constraint.ConstraintFactor` and only ever move along
directions in ``Range(P A_Ir^T)``, so every iterate satisfies the constraint
rows exactly (up to rounding). With an empty constraint set they reduce to
the plain randomized iterative method and to IS-Krylov respectively.

SC-IS-Krylov keeps the last ``ell - 1`` search directions in a ring buffer
and orthogonalizes each new projected stochastic gradient against them
(classical Gram-Schmidt, one extra pass when cancellation is detected).
``ell = 1`` performs exactly the same floating-point operations as SCRIM
with ``zeta = 1``.
"""
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .sampling import make_rng

EPS = np.finfo(np.float64).eps
_REORTH_RATIO = 0.1
# a computed direction this small relative to its source is rounding noise
_DIR_REL = 1e-12


@dataclass
class ScrimConfig:
    zeta: float = 1.0
    max_iters: int = 10_000
    rse_tol: float = 1e-12
    null_tol: float = None
    max_resample: int = None

    def __post_init__(self):
        if not 0.0 < self.zeta < 2.0:
            raise ValueError(f"zeta must lie in (0, 2), got {self.zeta}")
        _check_common(self)


@dataclass
class KrylovConfig:
    ell: float = 10
    max_iters: int = 10_000
    rse_tol: float = 1e-12
    null_tol: float = None
    max_resample: int = None

    def __post_init__(self):
        if not (self.ell == math.inf or (int(self.ell) == self.ell and self.ell >= 1)):
            raise ValueError(f"ell must be a positive integer or inf, got {self.ell}")
        _check_common(self)

    @property
    def window(self):
        """Number of stored directions (``None`` for unbounded)."""
        return None if self.ell == math.inf else int(self.ell) - 1


def _check_common(cfg):
    if cfg.max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    if cfg.rse_tol < 0:
        raise ValueError("rse_tol must be nonnegative")
    if cfg.null_tol is not None and cfg.null_tol < 0:
        raise ValueError("null_tol must be nonnegative")


@dataclass
class StepInfo:
    """What happened in one iteration ``x^k -> x^{k+1}``.

    ``block_res2`` is ``||S_k^T (A_Ir x^k - b_Ir)||^2``, ``dir_norm2`` the
    squared norm of the direction moved along (``d^k`` or ``p^k``),
    ``grad_norm2`` the squared norm of the projected gradient ``d^k``, and
    ``step`` the step length (``alpha_k`` or ``delta_k``).
    ``q`` is ``||d^k||^2 / ||p^k||^2`` (1 for SCRIM).
    """

    k: int
    block_res2: float
    dir_norm2: float
    grad_norm2: float
    step: float
    q: float = 1.0
    reorth: bool = False


@dataclass
class SolverState:
    x: np.ndarray
    rng: np.random.Generator
    k: int = 0
    window: deque = None
    p: np.ndarray = None
    p_norm2: float = 0.0
    d_norm2: float = 0.0
    block_res2: float = 0.0
    reorth: bool = False
    status: str = "running"
    message: str = ""
    n_reorth: int = 0


@dataclass
class RunTrace:
    ks: np.ndarray
    rse: np.ndarray
    residual_norm: np.ndarray
    status: str
    iterations: int
    x: np.ndarray
    message: str = ""
    n_reorth: int = 0
    has_rse: bool = True
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def full_iterations(self, q, m_r):
        """Iterations normalized by the fraction of rows touched per step."""
        return self.iterations * q / m_r if m_r else 0.0


def _null_tol(x, f, cfg):
    if cfg.null_tol is not None:
        return cfg.null_tol
    return EPS * (1.0 + f.b_ir_norm + f.a_ir_fro * float(np.linalg.norm(x)))


def _max_resample(space, cfg):
    if cfg.max_resample is not None:
        return cfg.max_resample
    return 50 * min(len(space), 50)


def _degenerate(v, ref):
    """``v`` is rounding noise relative to the vector ``ref`` it was computed from."""
    return not float(np.linalg.norm(v)) > _DIR_REL * float(np.linalg.norm(ref))


def _sample_direction(state, f, space, cfg, finish=None):
    """Draw sketches until one gives a usable step.

    Returns ``(block_res2, d, extra)`` with ``d = P (-A_Ir^T S S^T r)``, or
    ``None`` after setting ``state.status`` to ``"converged"`` or
    ``"stalled"``. A draw is skipped when ``||S^T r|| <= null_tol``, when
    the projection annihilates the gradient, or when ``finish(d)`` (if
    given) returns ``None``. On the first skipped draw the full residual on
    ``I_r`` is checked: if it is negligible, or orthogonal to every feasible
    direction, the run has converged.
    """
    x = state.x
    tol = _null_tol(x, f, cfg)
    checked_full = False
    attempts = _max_resample(space, cfg)
    for _ in range(attempts):
        s = space.draw(state.rng)
        if s.matrix is None:
            rows = f.a_ir[s.indices]
            sres = rows @ x - f.b_ir[s.indices]
        else:
            sres = s.matrix.T @ (f.a_ir @ x - f.b_ir)
        res2 = float(sres @ sres)
        if math.sqrt(res2) > tol:
            g = -(rows.T @ sres) if s.matrix is None else -(f.a_ir.T @ (s.matrix @ sres))
            d = f.apply_p(g)
            if not _degenerate(d, g):
                extra = None if finish is None else finish(d)
                if finish is None or extra is not None:
                    return res2, d, extra
        if not checked_full:
            checked_full = True
            r = f.a_ir @ x - f.b_ir
            full = float(np.linalg.norm(r))
            if full <= tol * math.sqrt(max(f.partition.m_r, 1)):
                state.status = "converged"
                state.message = f"residual on I_r is {full:.3e}"
                return None
            g = f.a_ir.T @ r
            if _degenerate(f.apply_p(g), g):
                state.status = "converged"
                state.message = f"residual on I_r ({full:.3e}) is orthogonal to all feasible directions"
                return None
    state.status = "stalled"
    state.message = f"no sketch gave a usable step after {attempts} draws at k={state.k}"
    return None


def init_state(f, cfg, rng):
    window = None
    if isinstance(cfg, KrylovConfig):
        window = deque(maxlen=cfg.window)
    return SolverState(x=f.x0.copy(), rng=rng, window=window)


def scrim_step(state, f, space, cfg):
    """One SCRIM iteration; returns a :class:`StepInfo` or ``None`` when stopped."""
    got = _sample_direction(state, f, space, cfg)
    if got is None:
        return None
    res2, d, _ = got
    dn2 = float(d @ d)
    alpha = (2.0 - cfg.zeta) * (res2 / dn2)
    state.x = state.x + alpha * d
    state.k += 1
    return StepInfo(state.k, res2, dn2, dn2, alpha)


def _orthogonalize(d, window):
    p = d
    if window:
        p = d - sum(((d @ pi) / ni) * pi for pi, ni in window)
        if np.linalg.norm(p) < _REORTH_RATIO * np.linalg.norm(d):
            p = p - sum(((p @ pi) / ni) * pi for pi, ni in window)
            return p, True
    return p, False


def krylov_prepare(state, f, space, cfg):
    """Draw ``S_k`` at the current iterate and form the direction ``p^k``.

    Returns ``False`` if sampling stopped the run.
    """
    def finish(d):
        p, redo = _orthogonalize(d, state.window)
        return None if _degenerate(p, d) else (p, redo)

    got = _sample_direction(state, f, space, cfg, finish)
    if got is None:
        state.p = None
        return False
    res2, d, (p, redo) = got
    pn2 = float(p @ p)
    state.p = p
    state.p_norm2 = pn2
    state.d_norm2 = float(d @ d)
    state.block_res2 = res2
    state.reorth = redo
    state.n_reorth += int(redo)
    return True


def krylov_step(state, f, space, cfg):
    """Move along ``p^k``, then prepare ``p^{k+1}`` from a fresh draw.

    If preparing the next direction stops the run, the update is kept and
    the stop is reported through ``state.status``.
    """
    if state.p is None and not krylov_prepare(state, f, space, cfg):
        return None
    delta = state.block_res2 / state.p_norm2
    info = StepInfo(state.k + 1, state.block_res2, state.p_norm2, state.d_norm2, delta,
                    q=state.d_norm2 / state.p_norm2, reorth=state.reorth)
    state.x = state.x + delta * state.p
    state.k += 1
    if state.window.maxlen != 0:
        state.window.append((state.p, state.p_norm2))
    state.p = None
    krylov_prepare(state, f, space, cfg)
    return info


def _record_stride(max_iters):
    return max(1, math.ceil(max_iters / 1000))


def run(a, b, f, space, cfg, *, x_star=None, rng=None, seed=0, record_residual=True, callback=None):
    """Run SCRIM (``ScrimConfig``) or SC-IS-Krylov (``KrylovConfig``) to completion.

    Stops when ``RSE = ||x - x_star||^2 / ||x_star||^2 < rse_tol`` (if
    ``x_star = A^+ b`` is given), otherwise when
    ``||A x - b|| / ||b|| < sqrt(rse_tol)``, or after ``max_iters`` steps.
    Every iteration up to 1000 is recorded, then every
    ``ceil(max_iters / 1000)``-th one, plus the final iterate.
    ``callback(state, info)`` is called after each step.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if rng is None:
        rng = make_rng(seed)
    krylov = isinstance(cfg, KrylovConfig)
    state = init_state(f, cfg, rng)
    b_norm = float(np.linalg.norm(b))
    if x_star is not None:
        x_star = np.asarray(x_star, dtype=np.float64)
        if np.linalg.norm(a @ x_star - b) > 1e-8 * max(b_norm, 1.0):
            raise ValueError("x_star does not solve A x = b; the system must be consistent")
        ref2 = float(x_star @ x_star) or 1.0

    def measure(x):
        res = float(np.linalg.norm(a @ x - b)) if (record_residual or x_star is None) else math.nan
        if x_star is None:
            return math.nan, res
        e = x - x_star
        return float(e @ e) / ref2, res

    def done(rse, res):
        if x_star is not None:
            return rse < cfg.rse_tol
        return res <= math.sqrt(cfg.rse_tol) * b_norm

    stride = _record_stride(cfg.max_iters)
    ks, rses, resids = [], [], []
    t0 = time.perf_counter()
    rse, res = measure(state.x)
    ks.append(0)
    rses.append(rse)
    resids.append(res)
    if done(rse, res):
        state.status = "converged"
    elif krylov:
        krylov_prepare(state, f, space, cfg)
    step = krylov_step if krylov else scrim_step
    while state.status == "running" and state.k < cfg.max_iters:
        info = step(state, f, space, cfg)
        if info is None:
            break
        rse, res = measure(state.x)
        if state.k <= 1000 or state.k % stride == 0:
            ks.append(state.k)
            rses.append(rse)
            resids.append(res)
        if callback is not None:
            callback(state, info)
        if done(rse, res):
            state.status = "converged"
    if state.status == "running":
        state.status = "max_iters"
    if ks[-1] != state.k:
        rse, res = measure(state.x)
        ks.append(state.k)
        rses.append(rse)
        resids.append(res)
    return RunTrace(
        ks=np.array(ks, dtype=np.int64),
        rse=np.array(rses),
        residual_norm=np.array(resids),
        status=state.status,
        iterations=state.k,
        x=state.x,
        message=state.message,
        n_reorth=state.n_reorth,
        has_rse=x_star is not None,
        wall_time=time.perf_counter() - t0,
    )
