"""Total-variation denoising of a salt-and-pepper corrupted phantom.

Writes ``noisy.pgm`` and ``clean.pgm`` into the current directory and
compares three solvers on the same problem.
"""
# %%
import time

from proxmm import (
    GeometricC,
    Image,
    OuterConfig,
    admm_solve,
    alm_solve,
    build_l1tv,
    phantom,
    pmm_solve,
    salt_pepper_noise,
    write_pgm,
)

truth = phantom(32)
noisy = salt_pepper_noise(truth, 0.2, seed=2024)
p = build_l1tv(noisy, alpha=1.5)
cfg = OuterConfig(c_schedule=GeometricC(1.0, 2.0, 1e3))

# %%
results = {}
for name, solve in (("pmm", lambda: pmm_solve(p, cfg)), ("alm", lambda: alm_solve(p, cfg)),
                    ("admm", lambda: admm_solve(p, tol=1e-8, max_iters=50000))):
    t0 = time.perf_counter()
    state, trace = solve()
    results[name] = state
    print(f"{name:5s} {len(trace):6d} iterations  objective {trace.final.objective:.10f}  "
          f"{time.perf_counter() - t0:6.2f}s")

# %%
clean = Image.from_vector(results["pmm"].x, clip=True)
err_noisy = abs(noisy.pixels - truth.pixels).mean()
err_clean = abs(clean.pixels - truth.pixels).mean()
print(f"mean abs error: noisy {err_noisy:.4f}, denoised {err_clean:.4f}")
write_pgm(noisy, "noisy.pgm")
write_pgm(clean, "clean.pgm")
