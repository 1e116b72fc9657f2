"""Semismooth Newton method for the proximal subproblem.

Given an outer iterate (x, lam) and penalty c, the subproblem is

    min_xi  psi(xi) = L_c(xi, lam) + ||xi - x||^2 / (2c).

psi is strongly convex with a semismooth gradient.  Each Newton step solves
V d = -grad psi(xi) with

    V = hess f(xi) + I/c + c E^T (I - G) E,    G in d_B prox_{phi/c}(E xi + lam/c),

by matrix-free conjugate gradients, followed by an Armijo backtracking search.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import LinearOperator as _ScipyOperator
from scipy.sparse.linalg import cg

from . import prox as _prox
from .lagrangian import Problem

__all__ = [
    "InnerConfig",
    "InnerResult",
    "CGInfo",
    "LineSearchError",
    "Subproblem",
    "psi_value",
    "psi_grad",
    "lna_apply",
    "solve_newton_system",
    "armijo_search",
    "newton_solve",
]

log = logging.getLogger(__name__)


class LineSearchError(RuntimeError):
    """Raised when backtracking exhausts its budget without sufficient decrease."""


@dataclass(frozen=True)
class InnerConfig:
    gamma: float = 0.1
    rho: float = 0.5
    max_iters: int = 100
    max_backtracks: int = 60
    cg_rel_tol_cap: float = 0.5
    cg_max_iters: int | None = None  # None means 10 * n

    def __post_init__(self):
        if not 0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2)")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not 0 < self.cg_rel_tol_cap < 1:
            raise ValueError("cg_rel_tol_cap must lie in (0, 1)")
        if self.max_iters < 1 or self.max_backtracks < 0:
            raise ValueError("iteration budgets must be positive")


@dataclass
class InnerResult:
    """Outcome of one subproblem solve.

    ``residual_history`` holds ||grad psi|| at every iterate (start included),
    ``psi_decrease`` the change psi(xi_{l+1}) - psi(xi_l) of every accepted
    step, and ``step_sizes`` the accepted Armijo steps.
    """

    xi: np.ndarray
    grad_norm: float
    iters: int
    step_sizes: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    psi_decrease: list = field(default_factory=list)
    cg_iters: int = 0
    converged: bool = False
    flags: list = field(default_factory=list)


@dataclass
class CGInfo:
    iters: int
    residual: float
    degraded: bool = False
    fallback: bool = False


class Subproblem:
    """psi(xi) = f(xi) + phi_c(E xi + lam/c) - ||lam||^2/(2c) + w ||xi - x||^2 / 2.

    ``w = 1/c`` gives the proximal subproblem; ``w = 0`` gives the plain
    augmented Lagrangian minimized by the classical method of multipliers.
    ``ridge`` is added to the Newton operator only, never to psi.
    """

    def __init__(self, p: Problem, x, lam, c: float, prox_weight: float | None = None, ridge: float = 0.0):
        if not c > 0:
            raise ValueError(f"penalty c must be positive, got {c}")
        self.p = p
        self.x = np.asarray(x, dtype=float)
        self.lam = np.asarray(lam, dtype=float)
        if self.x.shape != (p.n,) or self.lam.shape != (p.m,):
            raise ValueError("dimension mismatch between iterate and problem")
        self.c = float(c)
        self.w = 1.0 / self.c if prox_weight is None else float(prox_weight)
        self.ridge = float(ridge)
        self._lam_sq = float(self.lam @ self.lam)

    def shifted(self, xi):
        return self.p.E.apply(xi) + self.lam / self.c

    def value(self, xi) -> float:
        xi = np.asarray(xi, dtype=float)
        dx = xi - self.x
        return (
            self.p.f.value(xi)
            + _prox.envelope_eval(self.p.phi, self.shifted(xi), self.c)
            - self._lam_sq / (2 * self.c)
            + 0.5 * self.w * float(dx @ dx)
        )

    def grad(self, xi):
        xi = np.asarray(xi, dtype=float)
        z = self.shifted(xi)
        g = self.p.f.grad(xi) + self.c * self.p.E.adjoint(z - _prox.prox_eval(self.p.phi, z, self.c))
        if self.w:
            g = g + self.w * (xi - self.x)
        return g

    def diff(self, xi, step) -> float:
        """psi(xi + step) - psi(xi), evaluated term by term."""
        dz = self.p.E.apply(step)
        out = self.p.f.value_diff(xi, step) + _prox.envelope_diff(self.p.phi, self.shifted(xi), dz, self.c)
        if self.w:
            out += self.w * (float(step @ (xi - self.x)) + 0.5 * float(step @ step))
        return out

    def jacobian(self, xi):
        return _prox.prox_jacobian(self.p.phi, self.shifted(xi), self.c)

    def newton_apply(self, xi, G, d):
        out = lna_apply(self.p, xi, self.c, G, d, prox_weight=self.w)
        if self.ridge:
            out = out + self.ridge * d
        return out


def psi_value(p: Problem, x, lam, c: float, xi) -> float:
    return Subproblem(p, x, lam, c).value(xi)


def psi_grad(p: Problem, x, lam, c: float, xi):
    return Subproblem(p, x, lam, c).grad(xi)


def lna_apply(p: Problem, xi, c: float, G, d, prox_weight: float | None = None):
    """V d for V = hess f(xi) + w I + c E^T (I - G) E, with w = 1/c by default.

    G must be the Jacobian element taken at E xi + lam/c.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (p.n,):
        raise ValueError(f"direction must have length {p.n}")
    w = 1.0 / c if prox_weight is None else prox_weight
    Ed = p.E.apply(d)
    return p.f.hess_apply(xi, d) + w * d + c * p.E.adjoint(Ed - G.apply(Ed))


def solve_newton_system(
    V_apply: Callable,
    rhs,
    tol_abs: float,
    max_iters: int | None = None,
    fallback_scale: float = 1.0,
) -> tuple[np.ndarray, CGInfo]:
    """Solve V d = rhs by conjugate gradients, where rhs = -grad psi.

    Stops once ||V d - rhs|| <= tol_abs.  If the iteration budget runs out,
    the last iterate is returned with ``degraded`` set.  A result that is not
    a descent direction (rhs . d <= 0) is replaced by ``fallback_scale * rhs``
    and marked ``fallback``.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    if max_iters is None:
        max_iters = 10 * n
    count = [0]

    def _tick(_):
        count[0] += 1

    op = _ScipyOperator((n, n), matvec=V_apply, dtype=float)
    d, info = cg(op, rhs, rtol=0.0, atol=tol_abs, maxiter=max_iters, callback=_tick)
    residual = float(np.linalg.norm(V_apply(d) - rhs))
    out = CGInfo(iters=count[0], residual=residual, degraded=info != 0 and residual > tol_abs)
    if not float(rhs @ d) > 0:
        log.debug("CG direction is not a descent direction; using scaled steepest descent")
        d = fallback_scale * rhs
        out.fallback = True
    return d, out


def armijo_search(
    psi: Callable,
    xi,
    d,
    grad,
    gamma: float = 0.1,
    rho: float = 0.5,
    max_backtracks: int = 60,
    diff: Callable | None = None,
) -> float:
    """Largest step tau = rho**i (i = 0, 1, ...) with sufficient decrease

        psi(xi + tau d) <= psi(xi) + gamma * tau * grad . d.

    ``diff(tau)``, when given, must return psi(xi + tau d) - psi(xi) and is
    used instead of differencing two calls to ``psi``.
    """
    slope = float(np.dot(grad, d))
    if not slope < 0:
        raise ValueError(f"d is not a descent direction (slope {slope:g})")
    if diff is None:
        psi0 = psi(xi)

        def diff(tau):
            return psi(xi + tau * np.asarray(d)) - psi0

    tau = 1.0
    for _ in range(max_backtracks + 1):
        if diff(tau) <= gamma * tau * slope:
            return tau
        tau *= rho
    raise LineSearchError(f"no sufficient decrease after {max_backtracks} backtracks")


def _minimize(sub: Subproblem, stop_tol: float, cfg: InnerConfig, xi0=None) -> InnerResult:
    if not stop_tol > 0:
        raise ValueError("stop_tol must be positive")
    n = sub.p.n
    cg_max = cfg.cg_max_iters or 10 * n
    xi = np.array(sub.x if xi0 is None else xi0, dtype=float)
    g = sub.grad(xi)
    gnorm = float(np.linalg.norm(g))
    res = InnerResult(xi=xi, grad_norm=gnorm, iters=0, residual_history=[gnorm])
    while gnorm > stop_tol:
        if res.iters >= cfg.max_iters:
            res.flags.append("max-iters")
            break
        G = sub.jacobian(xi)
        forcing = min(cfg.cg_rel_tol_cap, np.sqrt(gnorm))
        d, info = solve_newton_system(
            lambda v: sub.newton_apply(xi, G, v), -g, forcing * gnorm, cg_max, fallback_scale=sub.c
        )
        res.cg_iters += info.iters
        if info.degraded:
            res.flags.append("cg-degraded")
        if info.fallback:
            res.flags.append("steepest-descent-fallback")
        try:
            tau = armijo_search(
                sub.value, xi, d, g, cfg.gamma, cfg.rho, cfg.max_backtracks,
                diff=lambda t: sub.diff(xi, t * d),
            )
        except LineSearchError:
            res.flags.append("line-search-stalled")
            break
        res.psi_decrease.append(sub.diff(xi, tau * d))
        res.step_sizes.append(tau)
        xi = xi + tau * d
        g = sub.grad(xi)
        gnorm = float(np.linalg.norm(g))
        res.residual_history.append(gnorm)
        res.iters += 1
    res.xi = xi
    res.grad_norm = gnorm
    res.converged = gnorm <= stop_tol
    return res


def newton_solve(p: Problem, x, lam, c: float, stop_tol: float, cfg: InnerConfig | None = None, xi0=None) -> InnerResult:
    """Approximately minimize psi until ||grad psi(xi)|| <= stop_tol.

    Starts from ``xi0`` (default: the outer iterate ``x``).  Nonconvergence is
    reported through ``converged`` and ``flags`` rather than raised.
    """
    return _minimize(Subproblem(p, x, lam, c), stop_tol, cfg or InnerConfig(), xi0)
