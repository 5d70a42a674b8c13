"""File formats: the QPF stack container and grayscale PNG import.

QPF is a minimal binary container for float32 image stacks:

    bytes 0..3   magic ``QPF1``
    next line    one-line JSON header, LF-terminated:
                 {"width": W, "height": H, "frames": N,
                  "dtype": "f32le", "meta": {...}}
    rest         N*H*W little-endian float32, frame-major, row-major

Round trips are byte exact.  Errors are typed so callers can tell a
wrong file apart from a damaged one.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

MAGIC = b"QPF1"
_HEADER_LIMIT = 1 << 20


class QpfError(ValueError):
    pass


class QpfMagicError(QpfError):
    pass


class QpfHeaderError(QpfError):
    pass


class QpfTruncatedError(QpfError):
    pass


class QpfTrailingError(QpfError):
    pass


def write_qpf(path: str | Path, stack: np.ndarray, meta: dict | None = None) -> None:
    """Write a (N, H, W) or (H, W) array as float32 frames."""
    arr = np.asarray(stack, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise QpfError(f"expected (N, H, W) or (H, W) array, got ndim={arr.ndim}")
    frames, height, width = arr.shape
    header = {
        "width": width,
        "height": height,
        "frames": frames,
        "dtype": "f32le",
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_qpf(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read a QPF file; returns the (N, H, W) float32 stack and its meta."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise QpfMagicError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    nl = raw.find(b"\n", 4, 4 + _HEADER_LIMIT)
    if nl < 0:
        raise QpfHeaderError("header line is unterminated")
    try:
        header = json.loads(raw[4:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise QpfHeaderError(f"header is not valid JSON: {exc}") from exc
    try:
        width = int(header["width"])
        height = int(header["height"])
        frames = int(header["frames"])
        dtype = header["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise QpfHeaderError(f"header missing or malformed field: {exc}") from exc
    if dtype != "f32le":
        raise QpfHeaderError(f"unsupported dtype {dtype!r}, expected 'f32le'")
    if width <= 0 or height <= 0 or frames <= 0:
        raise QpfHeaderError(f"non-positive dimensions {frames}x{height}x{width}")
    payload = raw[nl + 1:]
    expected = 4 * frames * height * width
    if len(payload) < expected:
        raise QpfTruncatedError(
            f"payload truncated: expected {expected} bytes, got {len(payload)}"
        )
    if len(payload) > expected:
        raise QpfTrailingError(
            f"payload size disagrees with header: expected {expected} bytes, "
            f"got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(frames, height, width)
    return arr.copy(), header.get("meta", {})


def read_qpf_field(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read a single-frame QPF as a float64 field."""
    stack, meta = read_qpf(path)
    if stack.shape[0] != 1:
        raise QpfError(f"expected a single frame, file holds {stack.shape[0]}")
    return stack[0].astype(np.float64), meta


_PNG_DEPTH = {"L": 8, "I;16": 16, "I": 16}


def import_png(path: str | Path, phase_max: float = 1.0) -> np.ndarray:
    """Load a grayscale PNG as a phase map.

    8-bit and 16-bit grayscale only; sample values map linearly from
    [0, 2^bits - 1] to [0, phase_max] radians.  Color and paletted
    images are rejected rather than silently flattened.
    """
    if phase_max <= 0:
        raise ValueError(f"phase_max must be positive, got {phase_max}")
    with Image.open(path) as img:
        mode = img.mode
        if mode not in _PNG_DEPTH:
            raise ValueError(
                f"unsupported PNG mode {mode!r}: only 8/16-bit grayscale is accepted"
            )
        arr = np.asarray(img, dtype=np.float64)
    bits = _PNG_DEPTH[mode]
    full = float(2**bits - 1)
    if arr.min() < 0 or arr.max() > full:
        raise ValueError(f"sample values outside [0, {int(full)}] for mode {mode!r}")
    return arr / full * phase_max


def load_phase(path: str | Path, phase_max: float = 1.0) -> tuple[np.ndarray, dict]:
    """Load a phase map from .qpf or .png by extension."""
    suffix = Path(path).suffix.lower()
    if suffix == ".qpf":
        return read_qpf_field(path)
    if suffix == ".png":
        return import_png(path, phase_max=phase_max), {}
    raise ValueError(f"unsupported phase file type {suffix!r}, expected .qpf or .png")
