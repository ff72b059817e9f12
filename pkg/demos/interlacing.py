"""
Singular values of the reduced matrix
=====================================

Removing constraint rows and projecting the rest onto the null space of
the constraint block squeezes the spectrum: the nonzero singular values of
``A_Ir P`` sit between ``sigma_{i+m_p}(A)`` and ``sigma_i(A)``.
"""

import numpy as np

from scrim import ClusterSpec, build_constraint, generate
from scrim.theory import verify_interlacing

# a clustered spectrum: 30 large, 30 small and 30 middle singular values
a, sigma = generate(ClusterSpec(m=500, n=100, r=90, n_l=30, n_s=30, kappa_m=2.0, seed=0))
print(f"A: sigma_1 = {sigma[0]:.1f}, sigma_90 = {sigma[-1]:.1f}")

rng = np.random.default_rng(0)
for m_p in (15, 30, 45):
    ip = rng.choice(500, m_p, replace=False)
    rep = verify_interlacing(a, ip)
    sv = rep.sv_reduced[:rep.rank_reduced]
    print(f"m_p = {m_p:2d}: rank {rep.rank_reduced} = {rep.rank_a} - {rep.rank_p}, "
          f"sigma range [{sv[-1]:.1f}, {sv[0]:.1f}], bounds hold: {rep.passed}")

# the scaled condition number ||B||_F / sigma_min(B) drops as m_p grows
f = build_constraint(a, np.zeros(500), rng.choice(500, 45, replace=False))
red = f.reduced_matrix()
s = np.linalg.svd(red, compute_uv=False)[:90 - 45]
print(f"kappa(A) = {np.linalg.norm(sigma) / sigma[-1]:.1f}, kappa(A_Ir P) = {np.linalg.norm(s) / s[-1]:.1f}")
