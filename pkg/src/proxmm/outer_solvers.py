"""Outer loops: proximal method of multipliers and three baselines.

``pmm_solve``
    Proximal method of multipliers; each subproblem adds (1/2c)||x - x_k||^2
    to the augmented Lagrangian and is solved by semismooth Newton.
``alm_solve``
    Classical method of multipliers on the same augmented Lagrangian.
``admm_solve``
    Alternating direction method of multipliers on the split Ex = v.
``fb_newton_solve``
    Newton's method on the forward-backward fixed-point equation (E = I),
    globalized on the forward-backward envelope.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.sparse.linalg import LinearOperator as _ScipyOperator
from scipy.sparse.linalg import cg

from . import prox as _prox
from .inner_newton import InnerConfig, LineSearchError, Subproblem, _minimize, armijo_search
from .lagrangian import (
    IterateState,
    Problem,
    Quadratic,
    kkt_residual,
    multiplier_update,
    objective,
)
from .operators import Dense, Identity, opnorm_sq_upper

__all__ = [
    "ConstantC",
    "GeometricC",
    "GeometricEps",
    "OuterConfig",
    "FBNConfig",
    "TraceRow",
    "ConvergenceTrace",
    "pmm_solve",
    "alm_solve",
    "admm_solve",
    "fb_newton_solve",
    "fb_envelope_value",
]

log = logging.getLogger(__name__)

MAX_TIGHTENINGS = 5
TIGHTEN_FACTOR = 0.1
ALM_RIDGE = 1e-8


@dataclass(frozen=True)
class ConstantC:
    c0: float = 1.0

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")

    def at(self, k: int) -> float:
        return self.c0


@dataclass(frozen=True)
class GeometricC:
    """c_k = min(c0 * factor**k, cap)."""

    c0: float = 1.0
    factor: float = 2.0
    cap: float = 1e6

    def __post_init__(self):
        if not self.c0 > 0 or self.factor < 1 or self.cap < self.c0:
            raise ValueError("need c0 > 0, factor >= 1 and cap >= c0")

    def at(self, k: int) -> float:
        return min(self.c0 * self.factor**k, self.cap)


@dataclass(frozen=True)
class GeometricEps:
    """eps_k = eps0 * kappa**k, summable since kappa < 1."""

    eps0: float = 1e-2
    kappa: float = 0.5

    def __post_init__(self):
        if not self.eps0 > 0 or not 0 < self.kappa < 1:
            raise ValueError("need eps0 > 0 and kappa in (0, 1)")

    def at(self, k: int) -> float:
        return self.eps0 * self.kappa**k


@dataclass(frozen=True)
class OuterConfig:
    c_schedule: Union[ConstantC, GeometricC] = field(default_factory=ConstantC)
    eps_schedule: GeometricEps = field(default_factory=GeometricEps)
    r: int = 0
    max_outer: int = 100
    kkt_tol: float = 1e-8
    inner: InnerConfig = field(default_factory=InnerConfig)

    def __post_init__(self):
        if self.r not in (0, 1):
            raise ValueError("r must be 0 or 1")
        if self.max_outer < 1 or not self.kkt_tol > 0:
            raise ValueError("max_outer must be >= 1 and kkt_tol > 0")


@dataclass
class TraceRow:
    k: int
    c: float
    eps: float
    objective: float
    kkt_stat: float
    kkt_feas: float
    inner_iters: int
    inner_grad_norm: float
    wall_ms: float
    # bookkeeping for the inner accuracy test; not part of the CSV schema
    inner_tol: float = math.nan
    step_norm: float = math.nan
    tightenings: int = 0
    criterion_met: bool = True


CSV_COLUMNS = (
    "k", "c", "eps", "objective", "kkt_stat", "kkt_feas",
    "inner_iters", "inner_grad_norm", "wall_ms",
)


@dataclass
class ConvergenceTrace:
    rows: list = field(default_factory=list)
    converged: bool = False
    flags: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]


def _flag(trace, msg):
    if msg not in trace.flags:
        log.info("%s", msg)
        trace.flags.append(msg)


def _start(p: Problem, x0, lam0):
    x = np.zeros(p.n) if x0 is None else np.array(x0, dtype=float).ravel()
    lam = np.zeros(p.m) if lam0 is None else np.array(lam0, dtype=float).ravel()
    if x.size != p.n or lam.size != p.m:
        raise ValueError("initial point has the wrong dimension")
    return x, lam


def _multiplier_loop(p, cfg, x0, lam0, callback, proximal: bool):
    cfg = cfg or OuterConfig()
    x, lam = _start(p, x0, lam0)
    trace = ConvergenceTrace()
    ridge_ok = proximal or p.f.strongly_convex
    for k in range(cfg.max_outer):
        t0 = time.perf_counter()
        c = cfg.c_schedule.at(k)
        eps = cfg.eps_schedule.at(k)
        if proximal:
            sub = Subproblem(p, x, lam, c)
        else:
            sub = Subproblem(p, x, lam, c, prox_weight=0.0, ridge=0.0 if ridge_ok else ALM_RIDGE * c)
            if not ridge_ok:
                _flag(trace, "ridge-guard")
        tol = eps / c
        res = _minimize(sub, tol, cfg.inner, x)
        iters = res.iters
        s = IterateState(x, lam, c)
        lam_new = multiplier_update(p, s, res.xi)
        step = math.hypot(np.linalg.norm(res.xi - x), np.linalg.norm(lam_new - lam))
        bound = tol * min(1.0, step**cfg.r)
        tightenings = 0
        target = tol
        while res.grad_norm > bound and tightenings < MAX_TIGHTENINGS and cfg.r:
            tightenings += 1
            # tighten below what was achieved, so every re-solve takes a step
            target = TIGHTEN_FACTOR * min(target, res.grad_norm)
            more = _minimize(sub, target, cfg.inner, res.xi)
            iters += more.iters
            res = more
            lam_new = multiplier_update(p, s, res.xi)
            step = math.hypot(np.linalg.norm(res.xi - x), np.linalg.norm(lam_new - lam))
            bound = tol * min(1.0, step**cfg.r)
        met = res.grad_norm <= bound
        if not met:
            _flag(trace, "inner accuracy not met")
        for f in res.flags:
            _flag(trace, f"inner: {f}")
        x, lam = res.xi, lam_new
        state = IterateState(x, lam, c)
        stat, feas = kkt_residual(p, state)
        trace.rows.append(
            TraceRow(
                k=k, c=c, eps=eps, objective=objective(p, x),
                kkt_stat=stat, kkt_feas=feas, inner_iters=iters,
                inner_grad_norm=res.grad_norm,
                wall_ms=1e3 * (time.perf_counter() - t0),
                inner_tol=tol, step_norm=step, tightenings=tightenings,
                criterion_met=met,
            )
        )
        if callback is not None:
            callback(k, state)
        if max(stat, feas) <= cfg.kkt_tol:
            trace.converged = True
            break
        if not met and ({"line-search-stalled", "max-iters"} & set(res.flags)):
            _flag(trace, "aborted: inner solver stalled")
            break
    else:
        _flag(trace, "max-outer reached")
    return IterateState(x, lam, c), trace


def pmm_solve(p: Problem, cfg: OuterConfig | None = None, x0=None, lam0=None, callback: Callable | None = None):
    """Proximal method of multipliers.

    Each outer step approximately solves

        x_{k+1} ~ argmin_x L_{c_k}(x, lam_k) + ||x - x_k||^2 / (2 c_k)

    with Newton until the gradient is below (eps_k/c_k) min(1, ||Delta_k||^r),
    where Delta_k is the realized primal-dual step, and then updates the
    multiplier.  For r = 1 the solve is repeated (at most five times), each
    time to a tenth of the smaller of the previous target and the gradient
    norm actually reached, until the test holds for the realized step.  Stops once both KKT
    residuals fall below ``cfg.kkt_tol``.

    ``callback(k, state)`` is called after every outer step.

    Returns
    -------
    state : IterateState
    trace : ConvergenceTrace
    """
    return _multiplier_loop(p, cfg, x0, lam0, callback, proximal=True)


def alm_solve(p: Problem, cfg: OuterConfig | None = None, x0=None, lam0=None, callback: Callable | None = None):
    """Method of multipliers on the same augmented Lagrangian, no proximal term.

    Without strong convexity of f the Newton operator may be singular, so a
    ridge of 1e-8 * c is added to it; the trace carries a ``ridge-guard``
    flag whenever that happens.
    """
    return _multiplier_loop(p, cfg, x0, lam0, callback, proximal=False)


def admm_solve(p: Problem, c: float = 1.0, max_iters: int = 10000, tol: float = 1e-8,
               x0=None, v0=None, lam0=None):
    """ADMM on min f(x) + phi(v) subject to Ex = v.

    The x-update solves (hess f + c E^T E) x = E^T (c v - lam) - grad f(0)
    by conjugate gradients, warm-started from the previous x.  Stops when
    max(||Ex - v||, c ||E^T (v+ - v)||) <= tol.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    x, lam = _start(p, x0, lam0)
    v = p.E.apply(x) if v0 is None else np.array(v0, dtype=float).ravel()
    trace = ConvergenceTrace()
    n = p.n
    E, f = p.E, p.f
    g0 = f.grad(np.zeros(n))
    op = _ScipyOperator((n, n), matvec=lambda d: f.hess_apply(x, d) + c * E.adjoint(E.apply(d)), dtype=float)
    for k in range(max_iters):
        t0 = time.perf_counter()
        rhs = E.adjoint(c * v - lam) - g0
        count = [0]

        def _tick(_):
            count[0] += 1

        atol = max(1e-3 * tol, 1e-15 * np.linalg.norm(rhs))
        x, info = cg(op, rhs, x0=x, rtol=0.0, atol=atol, maxiter=10 * n, callback=_tick)
        cg_res = float(np.linalg.norm(op.matvec(x) - rhs))
        if info != 0 and cg_res > atol:
            _flag(trace, "cg-degraded")
        Ex = E.apply(x)
        v_new = _prox.prox_eval(p.phi, Ex + lam / c, c)
        lam = lam + c * (Ex - v_new)
        primal = float(np.linalg.norm(Ex - v_new))
        dual = c * float(np.linalg.norm(E.adjoint(v_new - v)))
        v = v_new
        stat, feas = kkt_residual(p, IterateState(x, lam, c))
        trace.rows.append(
            TraceRow(
                k=k, c=c, eps=tol, objective=objective(p, x),
                kkt_stat=stat, kkt_feas=feas, inner_iters=count[0],
                inner_grad_norm=cg_res, wall_ms=1e3 * (time.perf_counter() - t0),
                step_norm=max(primal, dual),
            )
        )
        if max(primal, dual) <= tol:
            trace.converged = True
            break
    else:
        _flag(trace, "max-iters reached")
    return IterateState(x, lam, c), trace


@dataclass(frozen=True)
class FBNConfig:
    gamma: float = 0.1
    rho: float = 0.5
    max_iters: int = 200
    max_backtracks: int = 60
    tol: float = 1e-12
    delta_max: float = 1e-4  # regularization delta_k = min(delta_max, ||residual||)


def _smooth_lipschitz(f) -> float:
    if isinstance(f, Quadratic):
        return opnorm_sq_upper(Dense(f.A))
    return 0.0


class _FBEnvelope:
    """F_c(x) = f(x) + phi_c(x - grad f(x)/c) - ||grad f(x)||^2 / (2c)."""

    def __init__(self, p: Problem, c: float):
        self.p, self.c = p, c

    def value(self, x):
        g = self.p.f.grad(x)
        return self.p.f.value(x) + _prox.envelope_eval(self.p.phi, x - g / self.c, self.c) - float(g @ g) / (2 * self.c)

    def diff(self, x, step):
        f, c = self.p.f, self.c
        g = f.grad(x)
        dg = f.hess_apply(x, step)
        dz = step - dg / c
        return (
            f.value_diff(x, step)
            + _prox.envelope_diff(self.p.phi, x - g / c, dz, c)
            - float(dg @ (2 * g + dg)) / (2 * c)
        )

    def grad(self, x, residual):
        # grad F_c = (I - hess f / c) c (x - prox(z))
        r = self.c * residual
        return r - self.p.f.hess_apply(x, r) / self.c


def fb_newton_solve(p: Problem, c: float, cfg: FBNConfig | None = None, x0=None):
    """Forward-backward Newton for min f(x) + phi(x).

    Solves R(x) = x - prox_{phi/c}(x - grad f(x)/c) = 0 with the regularized
    semismooth Newton system

        (I - G (I - hess f / c) + delta I) d = -R(x),

    and an Armijo search on the forward-backward envelope.  Requires E = I
    and c above the Lipschitz constant of grad f.

    Returns
    -------
    x : ndarray
    trace : ConvergenceTrace
        ``kkt_stat``/``kkt_feas`` are evaluated at the multiplier
        lam = c (z - prox(z)) implied by the prox step.
    """
    if not isinstance(p.E, Identity):
        raise ValueError("forward-backward Newton needs E = Identity")
    lf = _smooth_lipschitz(p.f)
    if not c > lf:
        raise ValueError(f"c = {c:g} must exceed the gradient Lipschitz bound {lf:g}")
    cfg = cfg or FBNConfig()
    n = p.n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).ravel()
    fbe = _FBEnvelope(p, c)
    H = p.f.hessian()
    I = np.eye(n)
    trace = ConvergenceTrace()
    for k in range(cfg.max_iters + 1):
        t0 = time.perf_counter()
        z = x - p.f.grad(x) / c
        pz = _prox.prox_eval(p.phi, z, c)
        R = x - pz
        rnorm = float(np.linalg.norm(R))
        lam = c * (z - pz)
        stat, feas = kkt_residual(p, IterateState(x, lam, c))
        row = TraceRow(
            k=k, c=c, eps=cfg.tol, objective=objective(p, x), kkt_stat=stat,
            kkt_feas=feas, inner_iters=0, inner_grad_norm=rnorm, wall_ms=0.0,
        )
        trace.rows.append(row)
        if rnorm <= cfg.tol:
            trace.converged = True
            row.wall_ms = 1e3 * (time.perf_counter() - t0)
            break
        if k == cfg.max_iters:
            _flag(trace, "max-iters reached")
            break
        G = _prox.prox_jacobian(p.phi, z, c).to_dense()
        delta = min(cfg.delta_max, rnorm)
        M = (1.0 + delta) * I - G @ (I - H / c)
        try:
            d = np.linalg.solve(M, -R)
        except np.linalg.LinAlgError:
            _flag(trace, "singular Newton system")
            d = None
        grad = fbe.grad(x, R)
        if d is None or not float(grad @ d) < 0:
            _flag(trace, "steepest-descent-fallback")
            d = -grad / c
        try:
            tau = armijo_search(
                fbe.value, x, d, grad, cfg.gamma, cfg.rho, cfg.max_backtracks,
                diff=lambda t: fbe.diff(x, t * d),
            )
        except LineSearchError:
            _flag(trace, "line-search-stalled")
            break
        x = x + tau * d
        row.inner_iters = 1
        row.wall_ms = 1e3 * (time.perf_counter() - t0)
    return x, trace


def fb_envelope_value(p: Problem, c: float, x) -> float:
    """Forward-backward envelope F_c(x)."""
    return _FBEnvelope(p, c).value(np.asarray(x, dtype=float))
