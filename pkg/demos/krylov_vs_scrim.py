"""
Longer Gram-Schmidt windows
===========================

SC-IS-Krylov keeps the last ``ell - 1`` search directions and orthogonalizes
against them; ``ell = 1`` is SCRIM with unit relaxation. With the identity
sketch and no truncation it stops after ``rank(A_Ir P)`` steps.
"""

import math

import numpy as np

from scrim import (ClusterSpec, KrylovConfig, build_constraint, generate, make_consistent_system,
                   make_identity_space, run)
from scrim.linalg import numerical_rank
from scrim.sampling import make_partition_space, make_rng

a, _ = generate(ClusterSpec(m=400, n=60, r=60, n_l=8, n_s=8, kappa_m=2.0, seed=2))
b, x_ref, _ = make_consistent_system(a, 2)
f = build_constraint(a, b, np.random.default_rng(2).choice(400, 20, replace=False))
space = make_partition_space(f.a_ir, 20, make_rng(2))

for ell in (1, 2, 5, 10, 20):
    iters = [run(a, b, f, space, KrylovConfig(ell=ell), x_star=x_ref, rng=make_rng(2, 1, t)).iterations
             for t in range(10)]
    print(f"ell = {ell:2d}: median iterations to RSE < 1e-12: {np.median(iters):.0f}")

tau = numerical_rank(f.reduced_matrix(), scale=f.scale())
tr = run(a, b, f, make_identity_space(f.partition.m_r), KrylovConfig(ell=math.inf, max_iters=tau, rse_tol=0.0),
         x_star=x_ref)
print(f"identity sketch, ell = inf: RSE after tau = {tau} steps is {tr.rse[-1]:.1e}")
