"""Synthetic ground-truth phase maps.

Benchmarks need repeatable targets with natural-image statistics: flat
regions, curved and straight edges, thin elongated strokes.  All values
land in [0, 1] radians.  Every generator is a pure function of the seed.
"""

from __future__ import annotations

import numpy as np

from .fields import Shape, fft2, ifft2

KINDS = ("discs", "annuli", "strokes", "mixed")


def _grid(shape: Shape) -> tuple[np.ndarray, np.ndarray]:
    y = np.arange(shape.height)[:, None].astype(np.float64)
    x = np.arange(shape.width)[None, :].astype(np.float64)
    return x, y


def _soften(img: np.ndarray, sigma_px: float = 1.0) -> np.ndarray:
    """Half-pixel-scale blur so edges are steep but not aliased."""
    h, w = img.shape
    fx = np.fft.fftfreq(w)[None, :]
    fy = np.fft.fftfreq(h)[:, None]
    lp = np.exp(-2.0 * np.pi**2 * sigma_px**2 * (fx**2 + fy**2))
    return ifft2(lp * fft2(img))


def _normalize(img: np.ndarray) -> np.ndarray:
    lo, hi = img.min(), img.max()
    if hi <= lo:
        raise ValueError("degenerate phantom, no contrast")
    return (img - lo) / (hi - lo)


def _discs(shape: Shape, rng: np.random.Generator, count: int) -> np.ndarray:
    x, y = _grid(shape)
    img = np.zeros(shape.array_shape)
    rmin = 0.04 * min(shape)
    rmax = 0.18 * min(shape)
    for _ in range(count):
        cx = rng.uniform(0, shape.width)
        cy = rng.uniform(0, shape.height)
        r = rng.uniform(rmin, rmax)
        a = rng.uniform(0.35, 1.0)
        img = np.maximum(img, a * ((x - cx) ** 2 + (y - cy) ** 2 <= r**2))
    return img


def _annuli(shape: Shape, rng: np.random.Generator, count: int) -> np.ndarray:
    x, y = _grid(shape)
    img = np.zeros(shape.array_shape)
    for _ in range(count):
        cx = rng.uniform(0, shape.width)
        cy = rng.uniform(0, shape.height)
        r = rng.uniform(0.08, 0.22) * min(shape)
        width = rng.uniform(0.15, 0.35) * r
        a = rng.uniform(0.4, 1.0)
        rad = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        img = np.maximum(img, a * (np.abs(rad - r) <= width))
    return img


def _strokes(shape: Shape, rng: np.random.Generator, count: int) -> np.ndarray:
    x, y = _grid(shape)
    img = np.zeros(shape.array_shape)
    for _ in range(count):
        p0 = rng.uniform([0, 0], [shape.width, shape.height])
        p1 = p0 + rng.uniform(-0.4, 0.4, size=2) * min(shape)
        thick = rng.uniform(1.0, 2.5)
        a = rng.uniform(0.4, 1.0)
        d = p1 - p0
        length2 = float(d @ d)
        if length2 < 1.0:
            continue
        t = ((x - p0[0]) * d[0] + (y - p0[1]) * d[1]) / length2
        t = np.clip(t, 0.0, 1.0)
        dist2 = (x - (p0[0] + t * d[0])) ** 2 + (y - (p0[1] + t * d[1])) ** 2
        img = np.maximum(img, a * (dist2 <= thick**2))
    return img


def make_phantom(shape: Shape | tuple[int, int], kind: str = "mixed", seed: int = 0) -> np.ndarray:
    """Piecewise phase target in [0, 1] rad with edge-rich content."""
    shape = Shape(*shape).validate()
    if kind not in KINDS:
        raise ValueError(f"unknown phantom kind {kind!r}, expected one of {KINDS}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if kind == "discs":
        img = _discs(shape, rng, 10)
    elif kind == "annuli":
        img = _annuli(shape, rng, 6)
    elif kind == "strokes":
        img = _strokes(shape, rng, 14)
    else:
        img = np.maximum(_discs(shape, rng, 6), _annuli(shape, rng, 3))
        img = np.maximum(img, _strokes(shape, rng, 8))
    return _normalize(_soften(img))


def smooth_phantom(shape: Shape | tuple[int, int], seed: int = 0, order: int = 4) -> np.ndarray:
    """Zero-mean band-limited field, for exact round-trip checks.

    Built from random low-order periodic modes, so the result is smooth,
    has no wrap seam, and carries no energy outside the lowest ``order``
    integer frequencies in either axis.
    """
    shape = Shape(*shape).validate()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    x, y = _grid(shape)
    img = np.zeros(shape.array_shape)
    for kx in range(-order, order + 1):
        for ky in range(0, order + 1):
            if ky == 0 and kx <= 0:
                continue
            amp = rng.normal() / (1.0 + kx * kx + ky * ky)
            phase = rng.uniform(0, 2 * np.pi)
            img += amp * np.cos(2 * np.pi * (kx * x / shape.width + ky * y / shape.height)
                                + phase)
    peak = np.abs(img).max()
    if peak == 0:
        raise ValueError("degenerate phantom, no contrast")
    return 0.5 * img / peak


def resize_field(field: np.ndarray, shape: Shape | tuple[int, int]) -> np.ndarray:
    """Bilinear resample onto a new grid (used to shrink large targets)."""
    shape = Shape(*shape).validate()
    src = np.asarray(field, dtype=np.float64)
    h, w = src.shape
    if (w, h) == (shape.width, shape.height):
        return src.copy()
    xs = np.linspace(0, w - 1, shape.width)
    ys = np.linspace(0, h - 1, shape.height)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (xs - x0)[None, :]
    wy = (ys - y0)[:, None]
    top = src[np.ix_(y0, x0)] * (1 - wx) + src[np.ix_(y0, x1)] * wx
    bot = src[np.ix_(y1, x0)] * (1 - wx) + src[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy
