"""
Choosing the constraint rows
============================

Five strategies pick ``m_p`` rows; the interpolative-decomposition error
``||A_Ir P||_F`` measures how much of ``A`` the chosen rows leave behind,
and the iteration count shows what that buys SC-IS-Krylov.
"""

import numpy as np

from scrim import METHODS, ClusterSpec, bench, generate, select_rows

spec = {"m": 1024, "n": 128, "r": 128, "n_l": 16, "n_s": 16, "kappa_m": 2.0, "seed": 1}
a, _ = generate(ClusterSpec(**spec))
base = {"matrix": {"generate": spec}, "sampler": {"kind": "partition", "q": 32},
        "algorithm": {"name": "krylov", "ell": 10}, "trials": 10}

res = bench.run_experiment(dict(base, selection="none"), a=a)
print(f"{'none':7s} ID error {np.linalg.norm(a):9.1f}   median iterations {res.summary['median_iterations']:.0f}")

for method in METHODS:
    sel = select_rows(a, method, 64, seed=1)
    res = bench.run_experiment(dict(base, selection={"method": method, "m_p": 64, "seed": 1}), a=a)
    print(f"{method:7s} ID error {sel.achieved_id_error:9.1f}   median iterations {res.summary['median_iterations']:.0f}")
