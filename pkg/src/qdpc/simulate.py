"""Forward model: ideal contrast stacks and their measured degradations.

An ideal contrast image is the odd phase kernel applied to the phase
map.  Measurement degradation adds white Gaussian noise scaled to a
target SNR plus a slowly varying additive background field of chosen
strength; both draws are deterministic functions of a 64-bit seed, with
independent substreams per image so the stack layout never changes a
realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import Shape, apply_phase_transfer, as_real_field, fft2, ifft2
from .optics import TransferFunctionSet

_BACKGROUND_RETRIES = 8


def dpc_from_intensity_pair(i_pos: np.ndarray, i_neg: np.ndarray) -> np.ndarray:
    """Normalized difference ``(I+ - I-) / (I+ + I-)`` of two exposures."""
    a = as_real_field(i_pos)
    b = as_real_field(i_neg)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    denom = a + b
    bad = int(np.count_nonzero(denom <= 0))
    if bad:
        raise ValueError(f"intensity sum is non-positive at {bad} pixel(s)")
    return (a - b) / denom


@dataclass(frozen=True)
class DegradationSpec:
    """Noise level as SNR in dB (inf for none) plus background strength."""

    snr_db: float = math.inf
    strength_a: float = 0.0
    seed: int = 0
    background_sigma_fraction: float = 1.0 / 8.0

    def __post_init__(self):
        if not (self.snr_db > 0 or math.isinf(self.snr_db)):
            raise ValueError(f"snr_db must be positive or inf, got {self.snr_db}")
        if self.strength_a < 0:
            raise ValueError(f"strength_a must be non-negative, got {self.strength_a}")
        if not 0 < self.background_sigma_fraction:
            raise ValueError("background_sigma_fraction must be positive")

    def to_dict(self) -> dict:
        return {
            "snr_db": "inf" if math.isinf(self.snr_db) else self.snr_db,
            "strength_a": self.strength_a,
            "seed": self.seed,
            "background_sigma_fraction": self.background_sigma_fraction,
        }


@dataclass
class DpcStack:
    """Contrast images plus the kernels that explain them."""

    images: np.ndarray  # (N, H, W)
    tfs: TransferFunctionSet
    provenance: str = "simulated"
    degradation: DegradationSpec | None = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        if self.images.ndim != 3:
            raise ValueError("stack must be (N, H, W)")
        if self.images.shape != self.tfs.kernels.shape:
            raise ValueError(
                f"stack {self.images.shape} does not match kernels {self.tfs.kernels.shape}"
            )
        if not np.all(np.isfinite(self.images)):
            raise ValueError("stack contains non-finite values")
        if self.provenance not in ("measured", "simulated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def n_images(self) -> int:
        return self.images.shape[0]

    @property
    def shape(self) -> Shape:
        return Shape(width=self.images.shape[2], height=self.images.shape[1])


def simulate_ideal(phi: np.ndarray, tfs: TransferFunctionSet) -> DpcStack:
    """Noise-free contrast stack of a phase map."""
    phi = as_real_field(phi)
    if phi.shape != tfs.config.shape.array_shape:
        raise ValueError(f"phase {phi.shape} does not match config {tfs.config.shape}")
    images = np.stack([apply_phase_transfer(phi, k) for k in tfs.kernels])
    return DpcStack(images=images, tfs=tfs, provenance="simulated", degradation=None)


def _gaussian_lowpass_spectrum(shape: Shape, sigma_px: float) -> np.ndarray:
    """Transfer of an isotropic spatial Gaussian, periodic, unit DC gain."""
    fx = np.fft.fftfreq(shape.width)[None, :]
    fy = np.fft.fftfreq(shape.height)[:, None]
    return np.exp(-2.0 * np.pi**2 * sigma_px**2 * (fx**2 + fy**2))


def make_background(
    shape: Shape,
    seed: int | np.random.SeedSequence,
    sigma_fraction: float = 1.0 / 8.0,
) -> np.ndarray:
    """Smooth random field normalized to span exactly [0, 1].

    White Gaussian noise is lowpassed by a spatial Gaussian of standard
    deviation ``sigma_fraction * min(W, H)`` pixels (spectral, periodic)
    and then affinely mapped onto [0, 1].  Deterministic per seed.  A
    degenerate draw (flat field) falls through to the next substream a
    bounded number of times before failing.
    """
    shape = Shape(*shape).validate()
    if sigma_fraction <= 0:
        raise ValueError("sigma_fraction must be positive")
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sigma_px = sigma_fraction * min(shape.width, shape.height)
    lowpass = _gaussian_lowpass_spectrum(shape, sigma_px)
    for child in base.spawn(_BACKGROUND_RETRIES):
        rng = np.random.default_rng(child)
        white = rng.standard_normal(shape.array_shape)
        smooth = ifft2(lowpass * fft2(white))
        lo, hi = smooth.min(), smooth.max()
        if hi > lo:
            return (smooth - lo) / (hi - lo)
    raise ValueError(f"background generation degenerate for {_BACKGROUND_RETRIES} substreams")


def degrade(stack: DpcStack, spec: DegradationSpec) -> DpcStack:
    """Measured stack: per-image noise at the target SNR plus background.

    Image n receives ``xi_n ~ N(0, rms(s_n) * 10^(-snr/20))`` and
    ``strength_a * (max(s_n) - min(s_n)) * B_n`` with an independent
    background field per image.  Substreams are keyed by image index so
    realizations are stable under any processing order.
    """
    out = np.array(stack.images, dtype=np.float64, copy=True)
    for n in range(stack.n_images):
        ideal = stack.images[n]
        if not math.isinf(spec.snr_db):
            sigma = math.sqrt(float(np.mean(ideal * ideal))) * 10.0 ** (-spec.snr_db / 20.0)
            if sigma > 0:
                noise_ss = np.random.SeedSequence(entropy=spec.seed, spawn_key=(2 * n,))
                out[n] += sigma * np.random.default_rng(noise_ss).standard_normal(ideal.shape)
        if spec.strength_a > 0:
            span = float(ideal.max() - ideal.min())
            bg_ss = np.random.SeedSequence(entropy=spec.seed, spawn_key=(2 * n + 1,))
            bg = make_background(stack.shape, bg_ss, spec.background_sigma_fraction)
            out[n] += spec.strength_a * span * bg
    return DpcStack(images=out, tfs=stack.tfs, provenance=stack.provenance, degradation=spec)
