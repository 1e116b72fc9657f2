"""Proximal maps, Moreau envelopes and their generalized Jacobians.

Run with ``python demos/prox_calculus.py``.
"""
# %%
import numpy as np

from proxmm.prox import (
    L1,
    AffineShifted,
    BlockSum,
    GroupL21,
    IndicatorNonpositive,
    Scaled,
    conjugate_prox,
    envelope_eval,
    prox_eval,
    prox_jacobian,
)

# %% Soft thresholding and its envelope (a Huber function)
z = np.linspace(-3, 3, 7)
c = 1.0
print("z          ", z)
print("prox |.|   ", prox_eval(L1(1.0), z, c))
print("envelope   ", np.array([envelope_eval(L1(1.0), [zi], c) for zi in z]))

# %% Group l2,1: pairs (z_i, z_{i+p}) shrink toward zero together
g = GroupL21(2)
w = np.array([3.0, 0.1, 4.0, 0.2])
print("group prox ", prox_eval(g, w, 1.0))
print("jacobian\n", prox_jacobian(g, w, 1.0).to_dense().round(4))

# %% Building blocks compose: a * phi(alpha z + beta) + b, shifts, block sums
spec = BlockSum(
    [
        (AffineShifted(L1(1.5), [0.2, 0.8]), (0, 2)),
        (Scaled(IndicatorNonpositive(), a=1.0, alpha=-1.0, beta=[1.0]), (2, 3)),
    ]
)
v = np.array([1.0, 0.0, 2.0])
p = prox_eval(spec, v, 2.0)
print("block prox ", p)

# %% Moreau decomposition: prox_{phi/c}(z) + prox_{c phi*}(c z)/c = z
print("decomposition error", np.abs(p + conjugate_prox(spec, 2.0 * v, 2.0) / 2.0 - v).max())
