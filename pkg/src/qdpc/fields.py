"""Periodic 2-D field arithmetic shared by every stage of the pipeline.

Arrays are float64 (or complex128) numpy arrays indexed ``[row, col]``,
i.e. ``[y, x]``.  ``Shape(width, height)`` describes the same grid with
the axes named the way the optics code talks about them: ``width`` is
the number of columns (x samples), ``height`` the number of rows.

All operators in this module assume periodic boundaries.  The transform
pair is fixed once here: forward FFT unnormalized, inverse carrying the
1/(W*H) factor, which is exactly numpy's default.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# Imaginary residue allowed when a spectral product is expected to be a
# real field.  Anything above this signals broken conjugate symmetry
# upstream, not harmless rounding.
IMAG_RESIDUE_RTOL = 1e-8


class Shape(NamedTuple):
    width: int
    height: int

    def validate(self) -> "Shape":
        if self.width < 4 or self.height < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.width}x{self.height}")
        return self

    @classmethod
    def of(cls, arr: np.ndarray) -> "Shape":
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D field, got ndim={arr.ndim}")
        return cls(width=arr.shape[1], height=arr.shape[0])

    @property
    def array_shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height


def as_real_field(arr: np.ndarray) -> np.ndarray:
    """Coerce to a float64 2-D array, rejecting non-finite input."""
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-D field, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise ValueError("field contains non-finite values")
    return out


def fft2(field: np.ndarray) -> np.ndarray:
    """Forward transform, unnormalized."""
    field = np.asarray(field)
    if field.ndim != 2:
        raise ValueError(f"fft2 expects a 2-D field, got ndim={field.ndim}")
    return np.fft.fft2(field)


def ifft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse transform scaled by 1/(W*H), asserting the result is real.

    The imaginary part is dropped only after checking it is at most
    ``IMAG_RESIDUE_RTOL`` of the largest real magnitude.
    """
    spectrum = np.asarray(spectrum)
    if spectrum.ndim != 2:
        raise ValueError(f"ifft2 expects a 2-D spectrum, got ndim={spectrum.ndim}")
    out = np.fft.ifft2(spectrum)
    re = np.abs(out.real).max()
    im = np.abs(out.imag).max()
    if im > IMAG_RESIDUE_RTOL * re:
        raise ValueError(
            f"imaginary residue {im:.3e} exceeds {IMAG_RESIDUE_RTOL:.0e} of max real "
            f"{re:.3e}; input spectrum is not conjugate-symmetric"
        )
    return out.real


def ifft2_complex(spectrum: np.ndarray) -> np.ndarray:
    """Inverse transform without the realness assertion."""
    return np.fft.ifft2(np.asarray(spectrum))


def spectral_symbols(shape: Shape) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward-difference symbols on the unshifted FFT grid.

    Returns ``(Dx, Dy, Dsq)`` where ``Dx[l, k] = exp(2j*pi*k/W) - 1``,
    ``Dy[l, k] = exp(2j*pi*l/H) - 1`` and ``Dsq = |Dx|^2 + |Dy|^2``,
    i.e. ``4 sin^2(pi k/W) + 4 sin^2(pi l/H)`` exactly.
    """
    shape = Shape(*shape).validate()
    w, h = shape.width, shape.height
    k = np.arange(w)
    l = np.arange(h)
    dx_row = np.exp(2j * np.pi * k / w) - 1.0
    dy_col = np.exp(2j * np.pi * l / h) - 1.0
    Dx = np.broadcast_to(dx_row[None, :], (h, w)).copy()
    Dy = np.broadcast_to(dy_col[:, None], (h, w)).copy()
    Dsq = 4.0 * np.sin(np.pi * k / w)[None, :] ** 2 + 4.0 * np.sin(np.pi * l / h)[:, None] ** 2
    return Dx, Dy, np.ascontiguousarray(Dsq)


def grad(field: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Periodic forward differences ``(d/dx, d/dy)``.

    ``gx[y, x] = f[y, x+1] - f[y, x]`` with wraparound, likewise for y.
    """
    f = np.asarray(field)
    gx = np.roll(f, -1, axis=1) - f
    gy = np.roll(f, -1, axis=0) - f
    return gx, gy


def grad_adjoint(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Exact discrete adjoint of :func:`grad` (negative divergence)."""
    gx = np.asarray(gx)
    gy = np.asarray(gy)
    if gx.shape != gy.shape:
        raise ValueError(f"component shape mismatch: {gx.shape} vs {gy.shape}")
    return (np.roll(gx, 1, axis=1) - gx) + (np.roll(gy, 1, axis=0) - gy)


def point_reflect(field: np.ndarray) -> np.ndarray:
    """Index negation modulo the grid: ``out[l, k] = f[-l mod H, -k mod W]``.

    Maps an unshifted spectrum u -> -u, fixing the DC bin in place.
    """
    f = np.asarray(field)
    return np.roll(f[::-1, ::-1], shift=(1, 1), axis=(0, 1))


def apply_transfer(field: np.ndarray, kernel_spec: np.ndarray) -> np.ndarray:
    """Multiply the field spectrum by a real spectral kernel.

    The kernel must be real-valued and even-symmetric enough that the
    output is real; :func:`ifft2` enforces this.
    """
    f = np.asarray(field)
    k = np.asarray(kernel_spec)
    if np.iscomplexobj(k):
        raise ValueError("kernel spectrum must be real-valued")
    if f.shape != k.shape:
        raise ValueError(f"shape mismatch: field {f.shape} vs kernel {k.shape}")
    return ifft2(k * fft2(f))


def apply_phase_transfer(field: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Apply an odd real kernel as the multiplier ``1j * kernel``.

    Kernels built from antisymmetric illumination are odd real fields;
    the physical spectral multiplier is ``i*K``, the convention under
    which a real phase maps to a real contrast image.
    """
    f = np.asarray(field)
    k = np.asarray(kernel)
    if np.iscomplexobj(k):
        raise ValueError("kernel must be a real odd field")
    if f.shape != k.shape:
        raise ValueError(f"shape mismatch: field {f.shape} vs kernel {k.shape}")
    return ifft2(1j * k * fft2(f))


def apply_phase_transfer_adjoint(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`apply_phase_transfer`: multiplier ``-1j * kernel``."""
    f = np.asarray(image)
    k = np.asarray(kernel)
    if f.shape != k.shape:
        raise ValueError(f"shape mismatch: image {f.shape} vs kernel {k.shape}")
    return ifft2(-1j * k * fft2(f))
