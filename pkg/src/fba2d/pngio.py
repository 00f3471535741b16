"""8-bit PNG interchange for float images.

All file and wire formats in this package exchange images as 8-bit PNG;
internally everything is float64 in [0, 1].  Encoding quantizes with
round-half-away-from-zero (floor(x * 255 + 0.5) on clamped pixels), the same
rule the oracles apply before judging, so an image survives a PNG round trip
bit-exactly once quantized.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .validation import check_image

__all__ = ["encode_png", "decode_png", "write_png", "read_png", "to_uint8", "from_uint8"]


def to_uint8(image):
    image = check_image(image)
    return np.floor(image * 255.0 + 0.5).astype(np.uint8)


def from_uint8(array):
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {array.dtype}")
    if array.ndim == 2:
        array = array[:, :, None]
    return array.astype(np.float64) / 255.0


def _to_pil(image):
    pixels = to_uint8(image)
    channels = pixels.shape[2]
    if channels == 1:
        return Image.fromarray(pixels[:, :, 0], mode="L")
    if channels == 3:
        return Image.fromarray(pixels, mode="RGB")
    raise ValueError(f"PNG interchange supports 1 or 3 channels, got {channels}")


def encode_png(image):
    """Encode a float image to PNG bytes (8-bit, 1 or 3 channels)."""
    buffer = io.BytesIO()
    _to_pil(image).save(buffer, format="PNG")
    return buffer.getvalue()


def decode_png(data):
    """Decode PNG bytes to an (H, W, C) float64 image in [0, 1]."""
    with Image.open(io.BytesIO(data)) as pil:
        pil.load()
        if pil.mode not in ("L", "RGB"):
            pil = pil.convert("RGB" if pil.mode in ("RGBA", "P", "CMYK") else "L")
        array = np.asarray(pil, dtype=np.uint8)
    return from_uint8(array)


def write_png(path, image):
    _to_pil(image).save(path, format="PNG")


def read_png(path):
    with open(path, "rb") as handle:
        return decode_png(handle.read())
