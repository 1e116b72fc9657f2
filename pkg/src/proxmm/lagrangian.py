"""Augmented Lagrangian of min f(x) + phi(Ex).

With z = Ex + lam/c the augmented Lagrangian is

    L_c(x, lam) = f(x) + phi_c(z) - ||lam||^2 / (2c),

finite everywhere and differentiable in both arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import prox as _prox
from .operators import Identity, LinearOperator, opnorm_sq_upper

__all__ = [
    "ZeroSmooth",
    "Quadratic",
    "Problem",
    "IterateState",
    "objective",
    "aug_lagrangian_value",
    "aug_lagrangian_grad_x",
    "aug_lagrangian_grad_lambda",
    "multiplier_update",
    "kkt_residual",
]


class ZeroSmooth:
    """f(x) = 0 on R^n."""

    strongly_convex = False

    def __init__(self, n: int):
        self.n = int(n)

    def value(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros(self.n)

    def hess_apply(self, x, d):
        return np.zeros(self.n)

    def value_diff(self, x, dx):
        return 0.0

    def hessian(self):
        return np.zeros((self.n, self.n))

    @property
    def lipschitz(self):
        return 0.0


class Quadratic:
    """f(x) = 0.5 * ||A x - b||^2."""

    def __init__(self, A, b):
        A = np.array(A, dtype=float, ndmin=2)
        b = np.array(b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ValueError(f"A has {A.shape[0]} rows but b has length {b.size}")
        A.setflags(write=False)
        b.setflags(write=False)
        self.A, self.b = A, b
        self.n = A.shape[1]

    def value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def grad(self, x):
        return self.A.T @ (self.A @ x - self.b)

    def hess_apply(self, x, d):
        return self.A.T @ (self.A @ d)

    def value_diff(self, x, dx):
        r = self.A @ x - self.b
        Ad = self.A @ dx
        return float(Ad @ r) + 0.5 * float(Ad @ Ad)

    def hessian(self):
        return self.A.T @ self.A

    @cached_property
    def _eigs(self):
        return np.linalg.eigvalsh(self.hessian())

    @property
    def lipschitz(self):
        return float(self._eigs[-1]) if self.n else 0.0

    @property
    def strongly_convex(self):
        ev = self._eigs
        return bool(self.n and ev[0] > 1e-12 * max(ev[-1], 1.0))


@dataclass(frozen=True, eq=False)
class Problem:
    """The triple (f, E, phi) of min f(x) + phi(Ex).

    f is assumed convex and twice continuously differentiable, and a
    minimizer is assumed to exist; neither is checked at runtime.
    """

    f: object
    E: LinearOperator
    phi: object

    def __post_init__(self):
        if self.f.n != self.E.n:
            raise ValueError(f"f acts on R^{self.f.n} but E has domain R^{self.E.n}")
        d = _prox.spec_dim(self.phi)
        if d is not None and d != self.E.m:
            raise ValueError(f"phi acts on R^{d} but E maps into R^{self.E.m}")

    @property
    def n(self) -> int:
        return self.E.n

    @property
    def m(self) -> int:
        return self.E.m

    @cached_property
    def E_norm_sq(self) -> float:
        if isinstance(self.E, Identity):
            return 1.0
        return opnorm_sq_upper(self.E)


@dataclass(frozen=True, eq=False)
class IterateState:
    """Primal-dual pair (x, lam) together with the penalty c."""

    x: np.ndarray
    lam: np.ndarray
    c: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.array(self.x, dtype=float).ravel())
        object.__setattr__(self, "lam", np.array(self.lam, dtype=float).ravel())
        if not self.c > 0:
            raise ValueError(f"penalty c must be positive, got {self.c}")

    def check(self, p: Problem) -> None:
        if self.x.size != p.n or self.lam.size != p.m:
            raise ValueError(
                f"state has x in R^{self.x.size}, lam in R^{self.lam.size}; "
                f"problem needs R^{p.n} and R^{p.m}"
            )


def objective(p: Problem, x) -> float:
    """Primal objective f(x) + phi(Ex); may be +inf."""
    return p.f.value(x) + _prox.phi_value(p.phi, p.E.apply(x))


def aug_lagrangian_value(p: Problem, s: IterateState) -> float:
    s.check(p)
    z = p.E.apply(s.x) + s.lam / s.c
    return p.f.value(s.x) + _prox.envelope_eval(p.phi, z, s.c) - float(s.lam @ s.lam) / (2 * s.c)


def aug_lagrangian_grad_x(p: Problem, s: IterateState):
    s.check(p)
    z = p.E.apply(s.x) + s.lam / s.c
    return p.f.grad(s.x) + s.c * p.E.adjoint(z - _prox.prox_eval(p.phi, z, s.c))


def aug_lagrangian_grad_lambda(p: Problem, s: IterateState):
    s.check(p)
    Ex = p.E.apply(s.x)
    return Ex - _prox.prox_eval(p.phi, Ex + s.lam / s.c, s.c)


def multiplier_update(p: Problem, s: IterateState, x_next):
    """lam+ = lam + c (E x+ - prox_{phi/c}(E x+ + lam/c))."""
    s.check(p)
    Ex = p.E.apply(np.asarray(x_next, dtype=float))
    return s.lam + s.c * (Ex - _prox.prox_eval(p.phi, Ex + s.lam / s.c, s.c))


def kkt_residual(p: Problem, s: IterateState) -> tuple[float, float]:
    """Stationarity and feasibility residuals of the saddle-point system.

    Returns ``(||grad f(x) + E^T lam||, ||Ex - prox_{phi/c}(Ex + lam/c)||)``;
    both vanish exactly at saddle points of the Lagrangian.
    """
    s.check(p)
    stat = np.linalg.norm(p.f.grad(s.x) + p.E.adjoint(s.lam))
    Ex = p.E.apply(s.x)
    feas = np.linalg.norm(Ex - _prox.prox_eval(p.phi, Ex + s.lam / s.c, s.c))
    return float(stat), float(feas)
