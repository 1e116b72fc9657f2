"""One proximal subproblem solved by semismooth Newton.

Shows the unit steps and the fast decay of the gradient norm once the
iterates are close, on an 8 x 8 total-variation denoising instance.
"""
# %%
import numpy as np

from proxmm import build_l1tv, newton_solve, phantom, salt_pepper_noise

img = salt_pepper_noise(phantom(8), 0.2, seed=2024)
p = build_l1tv(img, alpha=1.5)

x = img.vector
lam = 0.5 * np.random.default_rng(8).standard_normal(p.m)
res = newton_solve(p, x, lam, c=1.0, stop_tol=1e-12)

# %%
print(f"{'iter':>4}  {'||grad psi||':>12}  {'step':>5}  {'ratio':>8}")
h = res.residual_history
for i, g in enumerate(h):
    step = res.step_sizes[i - 1] if i else float("nan")
    ratio = g / h[i - 1] if i else float("nan")
    print(f"{i:4d}  {g:12.3e}  {step:5.2f}  {ratio:8.1e}")
print("CG iterations:", res.cg_iters, " flags:", res.flags or "none")
