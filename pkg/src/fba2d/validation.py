"""Input validation helpers shared across the package.

Images are float64 arrays of shape (H, W, C) with values in [0, 1]; spectra
are float64 arrays of the same shape holding DCT coefficients.  Everything
downstream assumes these helpers have run, so they are deliberately strict.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_image",
    "check_spectrum",
    "check_same_shape",
    "check_fraction",
    "check_label",
]


def check_image(arr, name="image", clip_tol=1e-9):
    """Validate and return an (H, W, C) float64 image with values in [0, 1].

    A 2-D array is promoted to a single trailing channel.  Values may stray
    outside [0, 1] by at most ``clip_tol`` (to absorb float round-off) and are
    snapped back; anything further out is an error.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must have shape (H, W, C), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"{name} has an empty axis: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    lo, hi = float(arr.min()), float(arr.max())
    if lo < -clip_tol or hi > 1.0 + clip_tol:
        raise ValueError(
            f"{name} values must lie in [0, 1], got range [{lo:.6g}, {hi:.6g}]"
        )
    return np.clip(arr, 0.0, 1.0)


def check_spectrum(arr, name="spectrum"):
    """Validate and return an (H, W, C) float64 coefficient array."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must have shape (H, W, C), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b, name_a="a", name_b="b"):
    if a.shape != b.shape:
        raise ValueError(
            f"shape mismatch: {name_a} has {a.shape}, {name_b} has {b.shape}"
        )


def check_fraction(value, name):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_label(label):
    label = int(label)
    if label not in (0, 1):
        raise ValueError(f"label must be 0 (real) or 1 (fake), got {label}")
    return label
