"""Proximal calculus for a closed family of convex functions.

Every function here lives in Gamma_0: proper, closed and convex.  For each
variant we can evaluate the function value, the proximal map

    prox_{phi/c}(z) = argmin_u  phi(u) + (c/2) ||u - z||^2,

the Moreau envelope (the optimal value of that problem), and one element of
the limiting Jacobian of ``prox_{phi/c}`` at ``z``.

The variants compose: ``AffineShifted`` and ``Scaled`` wrap an inner spec and
``BlockSum`` forms a separable sum over disjoint coordinate ranges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Zero",
    "L1",
    "GroupL21",
    "IndicatorNonpositive",
    "AffineShifted",
    "Scaled",
    "BlockSum",
    "ProxSpec",
    "Diagonal",
    "PairBlockDiagonal",
    "BlockCompound",
    "JacobianElement",
    "spec_dim",
    "phi_value",
    "prox_eval",
    "envelope_eval",
    "envelope_diff",
    "prox_jacobian",
    "conjugate_prox",
    "conjugate_envelope_eval",
]


# ---------------------------------------------------------------------------
# Function specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Zero:
    """phi(z) = 0 on any dimension."""


@dataclass(frozen=True)
class L1:
    """phi(z) = weight * ||z||_1."""

    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"L1 weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class GroupL21:
    """Sum of Euclidean norms of the pairs (z_i, z_{i+p}), i < p.

    The argument has length ``2 * pairs``; coordinate ``i`` is grouped with
    coordinate ``i + pairs``.
    """

    pairs: int

    def __post_init__(self):
        if self.pairs < 1:
            raise ValueError(f"GroupL21 needs at least one pair, got {self.pairs}")


@dataclass(frozen=True)
class IndicatorNonpositive:
    """Indicator of the nonpositive orthant {z <= 0}."""


@dataclass(frozen=True, eq=False)
class AffineShifted:
    """phi(z) = inner(z - shift)."""

    inner: "ProxSpec"
    shift: np.ndarray

    def __post_init__(self):
        shift = np.array(self.shift, dtype=float).ravel()
        shift.setflags(write=False)
        object.__setattr__(self, "shift", shift)
        _check_dim(self.inner, shift.size)


@dataclass(frozen=True, eq=False)
class Scaled:
    """phi(z) = a * inner(alpha * z + beta) + b, with a > 0 and alpha != 0."""

    inner: "ProxSpec"
    a: float
    alpha: float
    beta: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("Scaled requires a > 0 to stay convex")
        if self.alpha == 0:
            raise ValueError("Scaled requires alpha != 0")
        beta = np.array(self.beta, dtype=float).ravel()
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        _check_dim(self.inner, beta.size)


@dataclass(frozen=True, eq=False)
class BlockSum:
    """Separable sum of specs acting on disjoint coordinate ranges.

    ``blocks`` is a sequence of ``(spec, (start, stop))`` pairs.  The ranges
    must tile ``[0, dim)`` exactly; they are stored sorted by ``start``.
    """

    blocks: Sequence[tuple["ProxSpec", tuple[int, int]]]
    dim: int = field(default=-1)

    def __post_init__(self):
        blocks = sorted(
            ((spec, (int(lo), int(hi))) for spec, (lo, hi) in self.blocks),
            key=lambda item: item[1][0],
        )
        pos = 0
        for spec, (lo, hi) in blocks:
            if lo != pos or hi <= lo:
                raise ValueError("BlockSum ranges must be disjoint, nonempty and contiguous")
            _check_dim(spec, hi - lo)
            pos = hi
        if self.dim >= 0 and pos != self.dim:
            raise ValueError(f"BlockSum ranges cover {pos} coordinates, declared dim is {self.dim}")
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "dim", pos)


ProxSpec = Union[Zero, L1, GroupL21, IndicatorNonpositive, AffineShifted, Scaled, BlockSum]


def spec_dim(spec) -> int | None:
    """Dimension fixed by ``spec``, or None if it acts on any length."""
    if isinstance(spec, GroupL21):
        return 2 * spec.pairs
    if isinstance(spec, AffineShifted):
        return spec.shift.size
    if isinstance(spec, Scaled):
        return spec.beta.size
    if isinstance(spec, BlockSum):
        return spec.dim
    if isinstance(spec, (Zero, L1, IndicatorNonpositive)):
        return None
    raise TypeError(f"unknown prox spec {spec!r}")


def _check_dim(spec, m: int) -> None:
    d = spec_dim(spec)
    if d is not None and d != m:
        raise ValueError(f"dimension mismatch: spec expects {d}, got {m}")


def _as_vector(spec, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1)
    elif z.ndim != 1:
        raise ValueError("expected a 1-D vector")
    _check_dim(spec, z.size)
    return z


def _check_c(c: float) -> float:
    if not c > 0:
        raise ValueError(f"penalty c must be positive, got {c}")
    return float(c)


# ---------------------------------------------------------------------------
# Jacobian elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Diagonal:
    """Diagonal matrix with entries in [0, 1]."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.size

    def apply(self, v):
        return self.entries * v

    def to_dense(self):
        return np.diag(self.entries)


@dataclass(frozen=True, eq=False)
class PairBlockDiagonal:
    """Symmetric 2x2 blocks coupling coordinates i and i + p.

    Block i is ``[[g11[i], g12[i]], [g12[i], g22[i]]]``.
    """

    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.g11.size

    def apply(self, v):
        p = self.g11.size
        v1, v2 = v[:p], v[p:]
        return np.concatenate([self.g11 * v1 + self.g12 * v2, self.g12 * v1 + self.g22 * v2])

    def to_dense(self):
        p = self.g11.size
        idx = np.arange(p)
        out = np.zeros((2 * p, 2 * p))
        out[idx, idx] = self.g11
        out[idx, idx + p] = self.g12
        out[idx + p, idx] = self.g12
        out[idx + p, idx + p] = self.g22
        return out


@dataclass(frozen=True, eq=False)
class BlockCompound:
    """Block-diagonal element matching the ranges of a ``BlockSum``."""

    parts: tuple
    ranges: tuple

    @property
    def dim(self) -> int:
        return self.ranges[-1][1]

    def apply(self, v):
        return np.concatenate([g.apply(v[lo:hi]) for g, (lo, hi) in zip(self.parts, self.ranges)])

    def to_dense(self):
        out = np.zeros((self.dim, self.dim))
        for g, (lo, hi) in zip(self.parts, self.ranges):
            out[lo:hi, lo:hi] = g.to_dense()
        return out


JacobianElement = Union[Diagonal, PairBlockDiagonal, BlockCompound]


# ---------------------------------------------------------------------------
# Function value
# ---------------------------------------------------------------------------


def phi_value(spec, z) -> float:
    """Evaluate phi(z).  Returns ``math.inf`` outside the domain."""
    z = _as_vector(spec, z)
    return _value(spec, z)


def _value(spec, z):
    if isinstance(spec, Zero):
        return 0.0
    if isinstance(spec, L1):
        return spec.weight * float(np.abs(z).sum())
    if isinstance(spec, GroupL21):
        p = spec.pairs
        return float(np.hypot(z[:p], z[p:]).sum())
    if isinstance(spec, IndicatorNonpositive):
        return 0.0 if np.all(z <= 0) else math.inf
    if isinstance(spec, AffineShifted):
        return _value(spec.inner, z - spec.shift)
    if isinstance(spec, Scaled):
        return spec.a * _value(spec.inner, spec.alpha * z + spec.beta) + spec.b
    if isinstance(spec, BlockSum):
        return math.fsum(_value(s, z[lo:hi]) for s, (lo, hi) in spec.blocks)
    raise TypeError(f"unknown prox spec {spec!r}")


# ---------------------------------------------------------------------------
# Proximal map
# ---------------------------------------------------------------------------


def soft_threshold(z, t):
    """Componentwise prox of t*|.|: max(z - t, min(z + t, 0))."""
    return np.maximum(z - t, np.minimum(z + t, 0.0))


def prox_eval(spec, z, c):
    """Proximal point argmin_u phi(u) + (c/2)||u - z||^2."""
    z = _as_vector(spec, z)
    return _prox(spec, z, _check_c(c))


def _group_radius(spec, z):
    p = spec.pairs
    return np.hypot(z[:p], z[p:])


def _prox(spec, z, c):
    if isinstance(spec, Zero):
        return z.copy()
    if isinstance(spec, L1):
        return soft_threshold(z, spec.weight / c)
    if isinstance(spec, GroupL21):
        p = spec.pairs
        r = _group_radius(spec, z)
        keep = c * r >= 1.0
        scale = np.zeros_like(r)
        scale[keep] = 1.0 - 1.0 / (c * r[keep])
        return np.concatenate([scale * z[:p], scale * z[p:]])
    if isinstance(spec, IndicatorNonpositive):
        return np.minimum(z, 0.0)
    if isinstance(spec, AffineShifted):
        return _prox(spec.inner, z - spec.shift, c) + spec.shift
    if isinstance(spec, Scaled):
        # prox_{phi/c}(z) = (prox_{a alpha^2 psi / c}(alpha z + beta) - beta) / alpha
        c_in = c / (spec.a * spec.alpha**2)
        w = _prox(spec.inner, spec.alpha * z + spec.beta, c_in)
        return (w - spec.beta) / spec.alpha
    if isinstance(spec, BlockSum):
        return np.concatenate([_prox(s, z[lo:hi], c) for s, (lo, hi) in spec.blocks])
    raise TypeError(f"unknown prox spec {spec!r}")


# ---------------------------------------------------------------------------
# Moreau envelope
# ---------------------------------------------------------------------------


def envelope_eval(spec, z, c) -> float:
    """Moreau envelope phi_c(z) = phi(p) + (c/2)||p - z||^2 with p = prox(z).

    Finite for every z, including for indicator functions.
    """
    z = _as_vector(spec, z)
    return _envelope(spec, z, _check_c(c))


def _envelope(spec, z, c):
    if isinstance(spec, Zero):
        return 0.0
    if isinstance(spec, L1):
        t = spec.weight / c
        s = np.abs(z)
        quad = s <= t
        return float(0.5 * c * np.sum(s[quad] ** 2) + spec.weight * np.sum(s[~quad] - 0.5 * t))
    if isinstance(spec, GroupL21):
        r = _group_radius(spec, z)
        quad = c * r <= 1.0
        return float(0.5 * c * np.sum(r[quad] ** 2) + np.sum(r[~quad] - 0.5 / c))
    if isinstance(spec, IndicatorNonpositive):
        pos = np.maximum(z, 0.0)
        return float(0.5 * c * pos @ pos)
    if isinstance(spec, AffineShifted):
        return _envelope(spec.inner, z - spec.shift, c)
    if isinstance(spec, Scaled):
        c_in = c / (spec.a * spec.alpha**2)
        return spec.a * _envelope(spec.inner, spec.alpha * z + spec.beta, c_in) + spec.b
    if isinstance(spec, BlockSum):
        return math.fsum(_envelope(s, z[lo:hi], c) for s, (lo, hi) in spec.blocks)
    raise TypeError(f"unknown prox spec {spec!r}")


def envelope_diff(spec, z, dz, c) -> float:
    """Return phi_c(z + dz) - phi_c(z) without cancellation in the totals.

    Line searches compare envelope values that agree to many digits once the
    iterates settle; subtracting two full sums loses all significant figures
    there.  Each piece is differenced in closed form instead.
    """
    z = _as_vector(spec, z)
    dz = _as_vector(spec, dz)
    return _env_diff(spec, z, dz, _check_c(c))


def _huber_diff(s, ds, t, c, w):
    """Difference of w*huber terms with threshold t for s -> s + ds."""
    s1 = s + ds
    a0, a1 = np.abs(s), np.abs(s1)
    q0, q1 = a0 <= t, a1 <= t
    out = np.empty_like(s)
    both_q = q0 & q1
    out[both_q] = 0.5 * c * ds[both_q] * (s[both_q] + s1[both_q])
    both_l = ~q0 & ~q1
    # |s1| - |s| on the linear branch, exact when signs agree
    same = both_l & (np.sign(s) == np.sign(s1))
    out[same] = w * np.sign(s[same]) * ds[same]
    flip = both_l & ~same
    out[flip] = w * (a1[flip] - a0[flip])
    mixed = q0 != q1
    h0 = np.where(q0, 0.5 * c * a0**2, w * (a0 - 0.5 * t))
    h1 = np.where(q1, 0.5 * c * a1**2, w * (a1 - 0.5 * t))
    out[mixed] = h1[mixed] - h0[mixed]
    return out


def _env_diff(spec, z, dz, c):
    if isinstance(spec, Zero):
        return 0.0
    if isinstance(spec, L1):
        t = spec.weight / c
        return math.fsum(_huber_diff(z, dz, t, c, spec.weight))
    if isinstance(spec, GroupL21):
        p = spec.pairs
        z1 = z + dz
        r0 = _group_radius(spec, z)
        r1 = _group_radius(spec, z1)
        # r1^2 - r0^2 formed from the increments
        dsq = dz[:p] * (z[:p] + z1[:p]) + dz[p:] * (z[p:] + z1[p:])
        q0, q1 = c * r0 <= 1.0, c * r1 <= 1.0
        out = np.empty(p)
        both_q = q0 & q1
        out[both_q] = 0.5 * c * dsq[both_q]
        both_l = ~q0 & ~q1
        out[both_l] = dsq[both_l] / (r0[both_l] + r1[both_l])
        mixed = q0 != q1
        h0 = np.where(q0, 0.5 * c * r0**2, r0 - 0.5 / c)
        h1 = np.where(q1, 0.5 * c * r1**2, r1 - 0.5 / c)
        out[mixed] = h1[mixed] - h0[mixed]
        return math.fsum(out)
    if isinstance(spec, IndicatorNonpositive):
        p0 = np.maximum(z, 0.0)
        p1 = np.maximum(z + dz, 0.0)
        return 0.5 * c * math.fsum((p1 - p0) * (p1 + p0))
    if isinstance(spec, AffineShifted):
        return _env_diff(spec.inner, z - spec.shift, dz, c)
    if isinstance(spec, Scaled):
        c_in = c / (spec.a * spec.alpha**2)
        return spec.a * _env_diff(spec.inner, spec.alpha * z + spec.beta, spec.alpha * dz, c_in)
    if isinstance(spec, BlockSum):
        return math.fsum(_env_diff(s, z[lo:hi], dz[lo:hi], c) for s, (lo, hi) in spec.blocks)
    raise TypeError(f"unknown prox spec {spec!r}")


# ---------------------------------------------------------------------------
# Limiting Jacobian of the prox
# ---------------------------------------------------------------------------


def prox_jacobian(spec, z, c):
    """One element G of the limiting Jacobian of prox_{phi/c} at z.

    Ties on the kink set resolve to the zero element, which keeps ``I - G``
    as large as possible.
    """
    z = _as_vector(spec, z)
    return _jacobian(spec, z, _check_c(c))


def _jacobian(spec, z, c):
    if isinstance(spec, Zero):
        return Diagonal(np.ones_like(z))
    if isinstance(spec, L1):
        return Diagonal((np.abs(z) > spec.weight / c).astype(float))
    if isinstance(spec, GroupL21):
        p = spec.pairs
        z1, z2 = z[:p], z[p:]
        r = _group_radius(spec, z)
        active = c * r > 1.0
        g11 = np.zeros(p)
        g12 = np.zeros(p)
        g22 = np.zeros(p)
        ra = r[active]
        k = 1.0 / (c * ra**3)
        a1, a2 = z1[active], z2[active]
        g11[active] = 1.0 - k * a2**2
        g12[active] = k * a1 * a2
        g22[active] = 1.0 - k * a1**2
        return PairBlockDiagonal(g11, g12, g22)
    if isinstance(spec, IndicatorNonpositive):
        return Diagonal((z < 0).astype(float))
    if isinstance(spec, AffineShifted):
        return _jacobian(spec.inner, z - spec.shift, c)
    if isinstance(spec, Scaled):
        # the 1/alpha and alpha factors of the chain rule cancel
        c_in = c / (spec.a * spec.alpha**2)
        return _jacobian(spec.inner, spec.alpha * z + spec.beta, c_in)
    if isinstance(spec, BlockSum):
        parts = tuple(_jacobian(s, z[lo:hi], c) for s, (lo, hi) in spec.blocks)
        return BlockCompound(parts, tuple(r for _, r in spec.blocks))
    raise TypeError(f"unknown prox spec {spec!r}")


# ---------------------------------------------------------------------------
# Conjugate
# ---------------------------------------------------------------------------


def conjugate_prox(spec, z, c):
    """prox_{c phi*}(z) through Moreau's decomposition.

    Uses prox_{c phi*}(z) = z - c * prox_{phi/c}(z / c); phi* is never formed.
    """
    z = _as_vector(spec, z)
    c = _check_c(c)
    return z - c * _prox(spec, z / c, c)


def conjugate_envelope_eval(spec, w, c) -> float:
    """Envelope (phi*)_{1/c}(w) of the conjugate, without forming phi*.

    With p = prox_{phi/c}(w/c) and q = w - c p, q is a subgradient of phi at
    p, so phi*(q) = <q, p> - phi(p) by the Fenchel-Young equality.  phi(p)
    is read off the envelope, which stays finite even when roundoff puts p
    a hair outside dom phi.
    """
    w = _as_vector(spec, w)
    c = _check_c(c)
    z = w / c
    p = _prox(spec, z, c)
    q = w - c * p
    phi_p = _envelope(spec, z, c) - 0.5 * c * float((p - z) @ (p - z))
    conj = float(q @ p) - phi_p
    return conj + float((q - w) @ (q - w)) / (2.0 * c)
