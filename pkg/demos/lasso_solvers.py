"""A rank-deficient lasso: no strong convexity, still convergent.

The design has rank 2 with six columns, so the smooth part is flat along a
four-dimensional subspace.  The proximal term keeps every Newton system
solvable; the result is compared with the forward-backward Newton baseline
on a full-rank instance.
"""
# %%
import numpy as np

from proxmm import FBNConfig, GeometricC, OuterConfig, build_lasso, fb_newton_solve, pmm_solve
from proxmm.lagrangian import objective

rng = np.random.default_rng(3)
A = rng.uniform(-1, 1, (4, 2)) @ rng.uniform(-1, 1, (2, 6))
b = rng.standard_normal(4)
p = build_lasso(A, b, alpha=0.3)

for r in (0, 1):
    state, trace = pmm_solve(p, OuterConfig(c_schedule=GeometricC(1.0, 2.0, 1e4), r=r))
    print(f"r={r}: {len(trace)} outer steps, objective {objective(p, state.x):.12f}")
    for row in trace.rows:
        print(f"   k={row.k:2d}  c={row.c:7.1f}  kkt=({row.kkt_stat:.1e}, {row.kkt_feas:.1e})"
              f"  newton steps {row.inner_iters}")

# %% Forward-backward Newton needs c above the gradient Lipschitz constant
A2 = rng.standard_normal((8, 4))
q = build_lasso(A2, rng.standard_normal(8), alpha=0.2)
x, trace = fb_newton_solve(q, 2 * q.f.lipschitz, FBNConfig())
print(f"fbn: {len(trace) - 1} Newton steps, fixed-point residual {trace.final.inner_grad_norm:.1e}")
state, _ = pmm_solve(q, OuterConfig(c_schedule=GeometricC(1.0, 2.0, 1e4)))
print("pmm and fbn differ by", np.abs(state.x - x).max())
