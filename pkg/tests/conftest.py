import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from proxmm.prox import (  # noqa: E402
    L1,
    AffineShifted,
    BlockSum,
    GroupL21,
    IndicatorNonpositive,
    Scaled,
    Zero,
    spec_dim,
)
from proxmm.problems_io import build_l1tv, phantom, salt_pepper_noise  # noqa: E402

VARIANTS = ("zero", "l1", "group", "indicator", "shifted", "scaled", "blocksum")


def _base(rng, m=None):
    kind = rng.choice(["zero", "l1", "group", "indicator"])
    if kind == "group":
        pairs = int(rng.integers(1, 4)) if m is None else m // 2
        if pairs >= 1 and (m is None or m % 2 == 0):
            return GroupL21(pairs), 2 * pairs
        kind = "l1"
    m = int(rng.integers(1, 6)) if m is None else m
    if kind == "zero":
        return Zero(), m
    if kind == "l1":
        return L1(float(rng.uniform(0.1, 3.0))), m
    return IndicatorNonpositive(), m


def random_spec(rng, variant):
    """A random spec of the requested variant and its dimension."""
    if variant == "zero":
        return Zero(), int(rng.integers(1, 7))
    if variant == "l1":
        return L1(float(rng.uniform(0.1, 3.0))), int(rng.integers(1, 7))
    if variant == "group":
        p = int(rng.integers(1, 4))
        return GroupL21(p), 2 * p
    if variant == "indicator":
        return IndicatorNonpositive(), int(rng.integers(1, 7))
    if variant == "shifted":
        inner, m = _base(rng)
        return AffineShifted(inner, rng.standard_normal(m)), m
    if variant == "scaled":
        inner, m = _base(rng)
        alpha = float(rng.choice([-1, 1]) * rng.uniform(0.3, 2.0))
        return Scaled(inner, float(rng.uniform(0.2, 3.0)), alpha, rng.standard_normal(m), float(rng.normal())), m
    if variant == "blocksum":
        blocks, pos = [], 0
        for _ in range(int(rng.integers(2, 4))):
            inner, m = _base(rng)
            if rng.random() < 0.5:
                inner = AffineShifted(inner, rng.standard_normal(m))
            blocks.append((inner, (pos, pos + m)))
            pos += m
        return BlockSum(blocks, dim=pos), pos
    raise ValueError(variant)


def kink_distance(spec, z, c):
    """Distance from z to the set where prox_{phi/c} is not differentiable."""
    if isinstance(spec, Zero):
        return np.inf
    if isinstance(spec, L1):
        return float(np.min(np.abs(np.abs(z) - spec.weight / c)))
    if isinstance(spec, GroupL21):
        p = spec.pairs
        r = np.hypot(z[:p], z[p:])
        return float(np.min(np.abs(r - 1.0 / c)))
    if isinstance(spec, IndicatorNonpositive):
        return float(np.min(np.abs(z)))
    if isinstance(spec, AffineShifted):
        return kink_distance(spec.inner, z - spec.shift, c)
    if isinstance(spec, Scaled):
        c_in = c / (spec.a * spec.alpha**2)
        return kink_distance(spec.inner, spec.alpha * z + spec.beta, c_in) / abs(spec.alpha)
    if isinstance(spec, BlockSum):
        return min(kink_distance(s, z[lo:hi], c) for s, (lo, hi) in spec.blocks)
    raise TypeError(spec)


def random_point(rng, spec, m, c, margin=0.0, tries=200):
    for _ in range(tries):
        z = 2.0 * rng.standard_normal(m)
        if margin <= 0 or kink_distance(spec, z, c) >= margin:
            return z
    raise RuntimeError("could not sample a point away from kinks")


def random_c(rng):
    return float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))


def tv_instance(side, density=0.2, alpha=1.5, seed=2024):
    img = salt_pepper_noise(phantom(side), density, seed)
    return build_l1tv(img, alpha), img


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["VARIANTS", "random_spec", "kink_distance", "random_point", "random_c", "tv_instance", "spec_dim"]


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
