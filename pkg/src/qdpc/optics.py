"""Microscope geometry: pupils, asymmetric sources, phase transfer kernels.

Frequency coordinates live on the unshifted FFT grid (DC at index 0) in
cycles per micron.  Sources and pupils are binary indicator fields on
that grid.  A matched pair of half sources, one the point reflection of
the other, yields one odd real phase kernel; the stock geometry uses two
pairs, split left/right and top/bottom.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .fields import Shape, fft2, ifft2_complex, point_reflect

# Angle snap for the source dividing line.  cos(pi/2) is not exactly
# zero in floats; a coefficient this small is treated as exact zero so
# the axis-aligned splits exclude their dividing line precisely.
_COEF_SNAP = 1e-12

PAIR_ANGLES = {"lr": 0.0, "tb": np.pi / 2.0}


@dataclass(frozen=True)
class OpticalConfig:
    """Imaging geometry.  Lengths in microns."""

    wavelength_um: float
    na: float
    magnification: float
    camera_pixel_um: float
    shape: Shape

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(*self.shape).validate())
        if not self.wavelength_um > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength_um}")
        if not 0 < self.na < 1.5:
            raise ValueError(f"numerical aperture must lie in (0, 1.5), got {self.na}")
        if not self.magnification > 0:
            raise ValueError(f"magnification must be positive, got {self.magnification}")
        if not self.camera_pixel_um > 0:
            raise ValueError(f"camera pixel must be positive, got {self.camera_pixel_um}")
        if self.cutoff >= 0.5 / self.pixel_um:
            raise ValueError(
                f"pupil cutoff {self.cutoff:.4g} 1/um reaches Nyquist "
                f"{0.5 / self.pixel_um:.4g} 1/um; the grid would alias"
            )

    @property
    def pixel_um(self) -> float:
        """Object-space sample spacing."""
        return self.camera_pixel_um / self.magnification

    @property
    def cutoff(self) -> float:
        """Pupil radius na/lambda in cycles per micron."""
        return self.na / self.wavelength_um

    @classmethod
    def from_dict(cls, d: dict) -> "OpticalConfig":
        missing = [k for k in ("wavelength_um", "na", "magnification",
                               "camera_pixel_um", "width", "height") if k not in d]
        if missing:
            raise ValueError(f"optics config missing key(s): {', '.join(missing)}")
        return cls(
            wavelength_um=float(d["wavelength_um"]),
            na=float(d["na"]),
            magnification=float(d["magnification"]),
            camera_pixel_um=float(d["camera_pixel_um"]),
            shape=Shape(int(d["width"]), int(d["height"])),
        )

    def to_dict(self) -> dict:
        return {
            "wavelength_um": self.wavelength_um,
            "na": self.na,
            "magnification": self.magnification,
            "camera_pixel_um": self.camera_pixel_um,
            "width": self.shape.width,
            "height": self.shape.height,
        }


@dataclass(frozen=True)
class SourceSpec:
    """Half source described by its split axis and polarity.

    ``kind`` is ``half_disc`` or ``half_annulus``; ``axis_angle`` is the
    direction (radians) along which the splitting projection is taken;
    ``side`` +1 keeps the positive-projection half, -1 the mirror half.
    ``inner_fraction`` is the annulus inner radius as a fraction of the
    pupil cutoff (0 turns the annulus into a disc).
    """

    kind: str = "half_disc"
    axis_angle: float = 0.0
    side: int = 1
    inner_fraction: float = 0.0

    def __post_init__(self):
        if self.kind not in ("half_disc", "half_annulus"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.side not in (-1, 1):
            raise ValueError(f"side must be +1 or -1, got {self.side}")
        if not 0.0 <= self.inner_fraction < 1.0:
            raise ValueError(f"inner_fraction must lie in [0, 1), got {self.inner_fraction}")

    def mirrored(self) -> "SourceSpec":
        return SourceSpec(self.kind, self.axis_angle, -self.side, self.inner_fraction)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "axis_angle": self.axis_angle,
            "side": self.side,
            "inner_fraction": self.inner_fraction,
        }


def make_frequency_grid(config: OpticalConfig) -> tuple[np.ndarray, np.ndarray]:
    """fx, fy in cycles/um on the unshifted FFT grid, as full 2-D fields."""
    w, h = config.shape.width, config.shape.height
    d = config.pixel_um
    fx_row = np.fft.fftfreq(w, d=d)
    fy_col = np.fft.fftfreq(h, d=d)
    fx = np.broadcast_to(fx_row[None, :], (h, w)).copy()
    fy = np.broadcast_to(fy_col[:, None], (h, w)).copy()
    return fx, fy


def make_pupil(config: OpticalConfig) -> np.ndarray:
    """Binary circular pupil of radius na/lambda."""
    fx, fy = make_frequency_grid(config)
    return (np.hypot(fx, fy) <= config.cutoff).astype(np.float64)


def make_source(config: OpticalConfig, spec: SourceSpec) -> np.ndarray:
    """Binary half source on the frequency grid.

    Points on the dividing line (zero projection) belong to neither
    side, so the two halves of a pair are disjoint and exact point
    reflections of each other.
    """
    fx, fy = make_frequency_grid(config)
    radius = np.hypot(fx, fy)
    inside = radius <= config.cutoff
    if spec.kind == "half_annulus":
        inside &= radius >= spec.inner_fraction * config.cutoff
    c = float(np.cos(spec.axis_angle))
    s = float(np.sin(spec.axis_angle))
    if abs(c) < _COEF_SNAP:
        c = 0.0
    if abs(s) < _COEF_SNAP:
        s = 0.0
    proj = c * fx + s * fy
    keep = proj > 0 if spec.side > 0 else proj < 0
    source = (inside & keep).astype(np.float64)
    if not source.any():
        raise ValueError(f"source {spec} has no grid support for this configuration")
    return source


def make_source_pair(config: OpticalConfig, spec: SourceSpec) -> tuple[np.ndarray, np.ndarray]:
    """The (positive side, negative side) half sources of one pair."""
    return make_source(config, spec), make_source(config, spec.mirrored())


def cross_correlate_source_pupil(source: np.ndarray, pupil: np.ndarray) -> np.ndarray:
    """``cross(u) = sum_u' S(u') P(u') P(u'+u)``, evaluated with FFTs.

    The result of correlating two real fields must be real; the residue
    check guards against a broken transform upstream.
    """
    if source.shape != pupil.shape:
        raise ValueError(f"shape mismatch: source {source.shape} vs pupil {pupil.shape}")
    c = ifft2_complex(np.conj(fft2(source * pupil)) * fft2(pupil))
    re = np.abs(c.real).max()
    im = np.abs(c.imag).max()
    if im > 1e-9 * max(re, 1.0):
        raise ValueError(f"correlation imaginary residue {im:.3e} too large")
    return c.real


def compute_ptf(
    config: OpticalConfig,
    source_pos: np.ndarray,
    source_neg: np.ndarray,
    pupil: np.ndarray | None = None,
) -> np.ndarray:
    """Odd real phase kernel of one source pair.

    The weak-phase term of one half source is ``i*(cross(u) - cross(-u))``;
    the normalized pair difference divided by ``i`` is the real odd field
    returned here.  The physical spectral multiplier is ``i*K`` (see
    :func:`qdpc.fields.apply_phase_transfer`), which keeps real phase
    mapped to real contrast.
    """
    if pupil is None:
        pupil = make_pupil(config)
    if source_pos.shape != source_neg.shape or source_pos.shape != config.shape.array_shape:
        raise ValueError("source/pupil grids do not match the configuration")
    if not np.array_equal(source_neg, point_reflect(source_pos)):
        raise ValueError("source pair is not point-reflected")

    b_pos = float((source_pos * pupil * pupil).sum())
    b_neg = float((source_neg * pupil * pupil).sum())
    if b_pos + b_neg == 0.0:
        raise ValueError("degenerate source pair: no overlap with the pupil")

    def odd_part(src):
        c = cross_correlate_source_pupil(src, pupil)
        return c - point_reflect(c)

    kernel = (odd_part(source_pos) - odd_part(source_neg)) / (b_pos + b_neg)

    peak = np.abs(kernel).max()
    asym = np.abs(kernel + point_reflect(kernel)).max()
    if peak > 0 and asym > 1e-9 * peak:
        raise ValueError(f"kernel odd-symmetry residue {asym:.3e} too large")
    if kernel[0, 0] != 0.0:
        raise ValueError(f"kernel DC response {kernel[0, 0]:.3e} is not zero")
    return kernel


@dataclass
class TransferFunctionSet:
    """Phase kernels for N source pairs sharing one optical config."""

    config: OpticalConfig
    specs: list[SourceSpec]
    kernels: np.ndarray  # (N, H, W) real odd fields

    def __post_init__(self):
        if self.kernels.ndim != 3 or len(self.specs) != self.kernels.shape[0]:
            raise ValueError("one kernel per source spec required")
        if self.kernels.shape[1:] != self.config.shape.array_shape:
            raise ValueError("kernel grid does not match the configuration")

    @property
    def n_pairs(self) -> int:
        return self.kernels.shape[0]

    def peaks(self) -> list[float]:
        return [float(np.abs(k).max()) for k in self.kernels]


def build_transfer_functions(
    config: OpticalConfig,
    pairs: list[str] | None = None,
    kind: str = "half_disc",
    inner_fraction: float = 0.0,
) -> TransferFunctionSet:
    """Kernels for the named axis splits (default both ``lr`` and ``tb``)."""
    if pairs is None:
        pairs = ["lr", "tb"]
    pupil = make_pupil(config)
    specs = []
    kernels = []
    for name in pairs:
        if name not in PAIR_ANGLES:
            raise ValueError(f"unknown pair {name!r}, expected one of {sorted(PAIR_ANGLES)}")
        spec = SourceSpec(kind=kind, axis_angle=PAIR_ANGLES[name], side=1,
                          inner_fraction=inner_fraction)
        s_pos, s_neg = make_source_pair(config, spec)
        kernels.append(compute_ptf(config, s_pos, s_neg, pupil))
        specs.append(spec)
    return TransferFunctionSet(config=config, specs=specs, kernels=np.stack(kernels))


def load_optics_json(path: str | Path) -> tuple[OpticalConfig, dict]:
    """Read an optics config file; returns the config and the source block."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    config = OpticalConfig.from_dict(raw)
    source = raw.get("source", {"kind": "half_disc", "inner_fraction": 0.0})
    if source.get("kind", "half_disc") not in ("half_disc", "half_annulus"):
        raise ValueError(f"unknown source kind {source.get('kind')!r} in {path}")
    return config, source
