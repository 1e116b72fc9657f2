"""Problem builders, PGM image I/O and salt-and-pepper noise."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .lagrangian import Problem, Quadratic, ZeroSmooth
from .operators import Grad2DPeriodic, Identity, VStack
from .prox import L1, AffineShifted, BlockSum, GroupL21

__all__ = [
    "Image",
    "PGMError",
    "SplitMix64",
    "build_l1tv",
    "build_lasso",
    "read_pgm",
    "write_pgm",
    "salt_pepper_noise",
    "phantom",
]


class PGMError(ValueError):
    """Malformed or unsupported PGM data."""


@dataclass(frozen=True, eq=False)
class Image:
    """Square grayscale image with pixels in [0, 1].

    ``pixels[i, j]`` is row i, column j.  ``vector`` stacks the columns,
    ``y[i + n*j] = F[i, j]``.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2 or px.shape[0] != px.shape[1]:
            raise ValueError(f"image must be square, got shape {px.shape}")
        if px.size and (px.min() < 0 or px.max() > 1):
            raise ValueError("pixel values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def side(self) -> int:
        return self.pixels.shape[0]

    @property
    def vector(self) -> np.ndarray:
        return self.pixels.ravel(order="F")

    @classmethod
    def from_vector(cls, y, clip: bool = False) -> "Image":
        y = np.asarray(y, dtype=float)
        n = int(round(np.sqrt(y.size)))
        if n * n != y.size:
            raise ValueError(f"vector of length {y.size} is not a square image")
        F = y.reshape(n, n, order="F")
        return cls(np.clip(F, 0.0, 1.0) if clip else F)


def phantom(side: int) -> Image:
    """Piecewise-constant test image: two nested squares on a gray background."""
    F = np.full((side, side), 0.25)
    a, b = side // 4, side - side // 4
    F[a:b, a:b] = 0.75
    c, d = side // 2 - side // 8, side // 2 + max(side // 8, 1)
    F[c:d, c:d] = 1.0
    return Image(F)


def build_l1tv(img: Image, alpha: float) -> Problem:
    """min_u alpha ||u - y||_1 + ||grad u||_{2,1} in the form f + phi(Eu).

    f = 0, E = [I; grad] and phi(v, z) = alpha ||v - y||_1 + ||z||_{2,1}.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    y = img.vector
    N = y.size
    E = VStack([Identity(N), Grad2DPeriodic(img.side)])
    phi = BlockSum(
        [
            (AffineShifted(L1(alpha), y), (0, N)),
            (GroupL21(N), (N, 3 * N)),
        ],
        dim=3 * N,
    )
    return Problem(ZeroSmooth(N), E, phi)


def build_lasso(A, b, alpha: float) -> Problem:
    """min_x 0.5 ||A x - b||^2 + alpha ||x||_1."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    f = Quadratic(A, b)
    return Problem(f, Identity(f.n), L1(alpha))


# ---------------------------------------------------------------------------
# PGM (binary P5, maxval 255)
# ---------------------------------------------------------------------------


def _header_tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PGMError("missing whitespace after PGM header")
    return tokens, pos + 1


def read_pgm(path) -> Image:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise PGMError(f"{os.fspath(path)}: only binary P5 PGM is supported")
    tokens, offset = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PGMError(f"{os.fspath(path)}: malformed header") from exc
    if maxval != 255:
        raise PGMError(f"{os.fspath(path)}: maxval must be 255, got {maxval}")
    if width != height:
        raise PGMError(f"{os.fspath(path)}: image is {width}x{height}, expected square")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise PGMError(f"{os.fspath(path)}: truncated raster")
    F = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return Image(F / 255.0)


def write_pgm(img: Image, path) -> None:
    """Write 8-bit P5; values are scaled by 255 and rounded half up."""
    q = np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)
    n = img.side
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
        fh.write(q.tobytes(order="C"))


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator, reproducible bit for bit on any platform."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def salt_pepper_noise(img: Image, density: float, seed: int) -> Image:
    """Replace each pixel with probability ``density`` by 0 or 1 (equally likely).

    Pixels are visited in column-major order.  Each visit draws one uniform
    to decide corruption; a corrupted pixel draws a second to pick 0 or 1.
    """
    if not 0 < density < 1:
        raise ValueError("density must lie in (0, 1)")
    rng = SplitMix64(seed)
    y = img.vector.copy()
    for k in range(y.size):
        if rng.uniform() < density:
            y[k] = 0.0 if rng.uniform() < 0.5 else 1.0
    return Image.from_vector(y)
