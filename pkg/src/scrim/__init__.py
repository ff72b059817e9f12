"""Subspace-constrained randomized iterative solvers for consistent linear systems.

The constraint rows ``I_p`` are satisfied exactly at every iterate; the
remaining rows are handled by sketched projection steps (SCRIM) or by a
windowed Krylov-style variant (SC-IS-Krylov).
"""
from .constraint import (
    ConstraintFactor,
    InconsistentSubsystemError,
    IndexPartition,
    QrLikeFactorization,
    build_constraint,
    id_error,
    least_norm_via_blocks,
    qr_like_factorize,
    stacked_pinv_check,
)
from .linalg import SvdFactors, pinv_apply, pinv_solve_least_norm, svd_truncated
from .matgen import ClusterSpec, SpecError, generate, make_consistent_system
from .sampling import (
    make_identity_space,
    make_partition_space,
    make_rng,
    make_single_row_space,
)
from .selection import METHODS, SelectionResult, select_rows
from .solvers import KrylovConfig, RunTrace, ScrimConfig, run
from .theory import (
    RateReport,
    compare_rates,
    compute_h_matrices,
    compute_rho,
    rate_report,
    verify_interlacing,
    verify_surrogate_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterSpec", "ConstraintFactor", "InconsistentSubsystemError", "IndexPartition", "KrylovConfig",
    "METHODS", "QrLikeFactorization", "RateReport", "RunTrace", "ScrimConfig", "SelectionResult",
    "SpecError", "SvdFactors", "build_constraint", "compare_rates", "compute_h_matrices", "compute_rho",
    "generate", "id_error", "least_norm_via_blocks", "make_consistent_system", "make_identity_space",
    "make_partition_space", "make_rng", "make_single_row_space", "pinv_apply", "pinv_solve_least_norm",
    "qr_like_factorize", "rate_report", "run", "select_rows", "stacked_pinv_check", "svd_truncated",
    "verify_interlacing", "verify_surrogate_bound",
]
