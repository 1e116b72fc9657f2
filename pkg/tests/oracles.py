"""Independent reference computations used by the tests.

Nothing here calls into the solver code paths it is used to check.
"""
import itertools

import numpy as np


def lasso_enumeration(A, b, alpha, tol=1e-10):
    """Optimal value and one minimizer of 0.5||Ax - b||^2 + alpha ||x||_1.

    Enumerates sign patterns s in {-1, 0, 1}^n whose support has linearly
    independent columns (some minimizer always has such a support), solves
    the KKT system on the support and keeps the candidates satisfying sign
    consistency and the off-support subgradient bound.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    n = A.shape[1]
    rank = np.linalg.matrix_rank(A)
    best = None
    for s in itertools.product((-1, 0, 1), repeat=n):
        s = np.array(s, dtype=float)
        S = np.flatnonzero(s)
        if S.size > rank:
            continue
        x = np.zeros(n)
        if S.size:
            AS = A[:, S]
            if np.linalg.matrix_rank(AS) < S.size:
                continue
            x[S] = np.linalg.solve(AS.T @ AS, AS.T @ b - alpha * s[S])
            if np.any(s[S] * x[S] < -tol):
                continue
        g = A.T @ (A @ x - b)
        off = np.setdiff1d(np.arange(n), S)
        if off.size and np.max(np.abs(g[off])) > alpha + tol:
            continue
        val = 0.5 * np.sum((A @ x - b) ** 2) + alpha * np.abs(x).sum()
        if best is None or val < best[0]:
            best = (val, x)
    return best


def central_diff(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def periodic_diff_matrix(n):
    """(D z)_i = z_{(i+1) mod n} - z_i."""
    return np.roll(np.eye(n), 1, axis=1) - np.eye(n)


def grad2d_matrix(n):
    D = periodic_diff_matrix(n)
    I = np.eye(n)
    return np.vstack([np.kron(I, D), np.kron(D, I)])
