"""Matrix-free linear operators.

Images of side ``n`` are vectorized column-major, ``x[i + n*j] = F[i, j]``,
so ``x.reshape(n, n, order="F")`` recovers ``F``.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "LinearOperator",
    "Identity",
    "Dense",
    "Grad2DPeriodic",
    "VStack",
    "apply",
    "adjoint_apply",
    "opnorm_sq_upper",
    "materialize",
]


class LinearOperator:
    """Base class: a linear map from R^n (domain) to R^m (codomain)."""

    n: int
    m: int

    def _forward(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {x.shape}")
        return self._forward(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.m,):
            raise ValueError(f"expected a vector of length {self.m}, got shape {y.shape}")
        return self._adjoint(y)

    @property
    def shape(self):
        return (self.m, self.n)

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m}, n={self.n})"


class Identity(LinearOperator):
    def __init__(self, n: int):
        self.n = self.m = int(n)

    def _forward(self, x):
        return x.copy()

    def _adjoint(self, y):
        return y.copy()


class Dense(LinearOperator):
    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float, ndmin=2)
        if matrix.ndim != 2:
            raise ValueError("Dense operator needs a 2-D matrix")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.m, self.n = matrix.shape

    def _forward(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y


class Grad2DPeriodic(LinearOperator):
    """Forward differences with wraparound on an ``side x side`` image.

    Maps R^{n^2} to R^{2 n^2} as ``[D1; D2]`` with ``D1 = I kron D`` (along
    the row index i) and ``D2 = D kron I`` (along the column index j), where
    ``(D z)_i = z_{(i+1) mod n} - z_i``.
    """

    def __init__(self, side: int):
        if side < 1:
            raise ValueError("image side must be positive")
        self.side = int(side)
        self.n = self.side**2
        self.m = 2 * self.n

    def _forward(self, x):
        F = x.reshape(self.side, self.side, order="F")
        d1 = np.roll(F, -1, axis=0) - F
        d2 = np.roll(F, -1, axis=1) - F
        return np.concatenate([d1.ravel(order="F"), d2.ravel(order="F")])

    def _adjoint(self, y):
        n = self.side
        P = y[: self.n].reshape(n, n, order="F")
        Q = y[self.n :].reshape(n, n, order="F")
        out = (np.roll(P, 1, axis=0) - P) + (np.roll(Q, 1, axis=1) - Q)
        return out.ravel(order="F")


class VStack(LinearOperator):
    """Vertical stack [E1; E2; ...] of operators sharing one domain."""

    def __init__(self, ops):
        ops = tuple(ops)
        if not ops:
            raise ValueError("VStack needs at least one operator")
        n = ops[0].n
        if any(op.n != n for op in ops):
            raise ValueError("stacked operators must share the domain dimension")
        self.ops = ops
        self.n = n
        self.m = sum(op.m for op in ops)
        self._offsets = np.cumsum([0] + [op.m for op in ops])

    def _forward(self, x):
        return np.concatenate([op._forward(x) for op in self.ops])

    def _adjoint(self, y):
        out = np.zeros(self.n)
        for op, lo, hi in zip(self.ops, self._offsets[:-1], self._offsets[1:]):
            out += op._adjoint(y[lo:hi])
        return out


def apply(op: LinearOperator, x):
    return op.apply(x)


def adjoint_apply(op: LinearOperator, y):
    return op.adjoint(y)


def opnorm_sq_upper(op: LinearOperator, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of ||E||^2, inflated by 1% for use as a bound.

    Returns 0 for the zero operator.
    """
    if iters < 1:
        raise ValueError("iters must be at least 1")
    if op.n == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(op.n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = op.adjoint(op.apply(v))
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return 1.01 * est


def materialize(op: LinearOperator) -> np.ndarray:
    """Dense m x n matrix of ``op``, built column by column."""
    if isinstance(op, Dense):
        return np.array(op.matrix)
    out = np.empty((op.m, op.n))
    e = np.zeros(op.n)
    for k in range(op.n):
        e[k] = 1.0
        out[:, k] = op.apply(e)
        e[k] = 0.0
    return out
