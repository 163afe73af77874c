"""
Newton in n dimensions instead of 1 + d
=======================================

With fewer observations than features the chi-step is solved through the
dual reparameterization. Both routes return the same minimizer; the dual one
works with an n x n system.
"""

import time

import numpy as np

from fusedlogit.newton import ChiSubproblem, solve_chi_column

rng = np.random.default_rng(0)
n, d = 40, 2000
X = np.column_stack([np.ones(n), rng.normal(size=(n, d))])
y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
lam2 = np.r_[0.0, np.full(d, 0.1)]
sub = ChiSubproblem(X, y, omega=0.1 * rng.normal(size=d + 1), lambda2_vec=lam2, rho=1.0)

for route in ("primal", "dual"):
    t0 = time.perf_counter()
    res = solve_chi_column(sub, route=route)
    print(f"{route:6s} {time.perf_counter() - t0:7.3f}s  iterations {int(res.iterations[0])}")
    if route == "primal":
        reference = res.chi
print("max |primal - dual| =", np.max(np.abs(res.chi - reference)))
