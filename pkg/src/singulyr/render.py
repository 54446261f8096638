"""Grayscale PPM rendering of the growth field log(1 + |z - v| g#(z))."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .evaluation import SingularitySetup
from .zalcman import growth_field

MAX_RESOLUTION = 4096


def field_image(setup: SingularitySetup, center: complex, half_width: float, resolution: int) -> np.ndarray:
    """uint8 array (rows top to bottom = decreasing imaginary part).

    The field is mapped linearly from [0, max] to [0, 255]; pixels where it
    cannot be evaluated (the singular point itself) are clamped to 255.
    """
    if not isinstance(resolution, int) or not 1 <= resolution <= MAX_RESOLUTION:
        raise ValueError(f"resolution must be an integer in [1, {MAX_RESOLUTION}], got {resolution!r}")
    if not half_width > 0:
        raise ValueError("half_width must be positive")
    t = np.linspace(-half_width, half_width, resolution)
    z = complex(center) + t[None, :] - 1j * t[:, None]
    with np.errstate(all="ignore"):
        field = np.log1p(growth_field(setup, z))
    singular = ~np.isfinite(field) | (z == setup.v)
    finite = field[~singular]
    top = float(finite.max()) if finite.size else 0.0
    img = np.zeros(z.shape, dtype=np.uint8)
    if top > 0:
        img[~singular] = np.clip(np.rint(255.0 * finite / top), 0, 255).astype(np.uint8)
    img[singular] = 255
    return img


def ppm_bytes(gray: np.ndarray) -> bytes:
    """Binary P6 with R = G = B."""
    h, w = gray.shape
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def render_field(setup: SingularitySetup, center: complex, half_width: float, resolution: int,
                 path: str | Path | None = None) -> bytes:
    data = ppm_bytes(field_image(setup, center, half_width, resolution))
    if path is not None:
        Path(path).write_bytes(data)
    return data


def read_ppm(data: bytes) -> np.ndarray:
    """Parse a P6 written by :func:`ppm_bytes` back to an (h, w, 3) array."""
    header, rest = data.split(b"\n", 3)[:3], data.split(b"\n", 3)[3]
    if header[0] != b"P6" or header[2] != b"255":
        raise ValueError("not an 8-bit P6 image")
    w, h = map(int, header[1].split())
    return np.frombuffer(rest, dtype=np.uint8).reshape(h, w, 3)
