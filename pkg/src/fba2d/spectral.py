"""Orthonormal 2-D DCT transforms and anti-diagonal frequency band masks.

The attack does all of its geometry in the type-II DCT domain with the
orthonormal scaling, applied per channel.  Orthonormality matters: it makes
the transform an isometry, so L2 distances between spectra equal L2 distances
between the decoded images and the boundary-search geometry carries over
unchanged.

Frequency bands are defined on the anti-diagonal ordering i + j of coefficient
positions: the "low" band grows from the DC corner, the "high" band from the
opposite corner, each sized as a fraction of the total H*W coefficient count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .validation import check_fraction, check_spectrum

__all__ = ["dct2", "idct2", "FrequencyMask", "build_mask", "sample_masked_direction"]


def dct2(image):
    """Orthonormal 2-D type-II DCT of an (H, W, C) array, per channel.

    The inverse is idct2; the round trip is exact to float precision and the
    transform preserves L2 norms (Parseval).  No value-range requirement is
    imposed here: this is also used on difference images and weight arrays.
    """
    image = check_spectrum(image, name="image")
    return scipy.fft.dctn(image, type=2, norm="ortho", axes=(0, 1))


def idct2(spectrum):
    """Inverse of dct2.  Does not clamp: decoded values may leave [0, 1]."""
    spectrum = check_spectrum(spectrum)
    return scipy.fft.idctn(spectrum, type=2, norm="ortho", axes=(0, 1))


@dataclass(frozen=True)
class FrequencyMask:
    """Boolean selection over (H, W) coefficient positions, shared by all channels.

    ``selected`` is the union of the low and high bands; the bands themselves
    are kept for introspection (oracles use the high band on its own).
    """

    shape: tuple
    low_fraction: float
    high_fraction: float
    selected: np.ndarray = field(repr=False)
    low_band: np.ndarray = field(repr=False)
    high_band: np.ndarray = field(repr=False)

    @property
    def count(self):
        return int(self.selected.sum())


def _antidiagonal_order(height, width, ascending):
    """Coefficient positions sorted by i + j.

    Ascending (low band): ties on an anti-diagonal broken by smaller row index
    first.  Descending (high band): ties broken by larger row index first.
    """
    ii, jj = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    if ascending:
        order = np.lexsort((ii, ii + jj))
    else:
        order = np.lexsort((-ii, -(ii + jj)))
    return ii[order], jj[order]


def build_mask(shape, low_fraction, high_fraction):
    """Build the frequency mask for an image of the given (H, W, ...) shape.

    The low band takes the ceil(low_fraction * H * W) positions with the
    smallest i + j; the high band takes the ceil(high_fraction * H * W)
    positions with the largest i + j.  Fractions must lie in [0, 1] and sum to
    at most 1, which keeps the bands disjoint (in the one-off ceil edge case
    the high band is truncated rather than allowed to overlap).
    """
    if len(shape) < 2:
        raise ValueError(f"shape must provide (H, W), got {shape}")
    height, width = int(shape[0]), int(shape[1])
    if height < 1 or width < 1:
        raise ValueError(f"mask shape must be positive, got {(height, width)}")
    low_fraction = check_fraction(low_fraction, "low_fraction")
    high_fraction = check_fraction(high_fraction, "high_fraction")
    if low_fraction + high_fraction > 1.0 + 1e-12:
        raise ValueError(
            "low_fraction + high_fraction must not exceed 1, got "
            f"{low_fraction} + {high_fraction}"
        )
    total = height * width
    n_low = int(np.ceil(low_fraction * total))
    n_high = int(np.ceil(high_fraction * total))
    n_high = min(n_high, total - n_low)

    low_band = np.zeros((height, width), dtype=bool)
    high_band = np.zeros((height, width), dtype=bool)
    if n_low:
        li, lj = _antidiagonal_order(height, width, ascending=True)
        low_band[li[:n_low], lj[:n_low]] = True
    if n_high:
        hi, hj = _antidiagonal_order(height, width, ascending=False)
        high_band[hi[:n_high], hj[:n_high]] = True

    return FrequencyMask(
        shape=(height, width),
        low_fraction=low_fraction,
        high_fraction=high_fraction,
        selected=low_band | high_band,
        low_band=low_band,
        high_band=high_band,
    )


def sample_masked_direction(mask, channels, rng):
    """Unit-norm random spectrum supported on the mask positions, all channels.

    Coefficients at selected positions are i.i.d. standard normal draws from
    ``rng`` (a numpy Generator); everything off the mask is exactly zero.  The
    draw order is the row-major order of the selected positions, so a seeded
    generator reproduces the same direction.
    """
    channels = int(channels)
    if channels < 1:
        raise ValueError(f"channels must be >= 1, got {channels}")
    n_selected = mask.count
    if n_selected == 0:
        raise ValueError("mask selects no coefficients; cannot sample a direction")
    height, width = mask.shape
    direction = np.zeros((height, width, channels), dtype=np.float64)
    values = rng.standard_normal((n_selected, channels))
    direction[mask.selected, :] = values
    norm = float(np.linalg.norm(direction))
    while norm < 1e-12:
        # Astronomically unlikely for a Gaussian draw; resample for safety.
        values = rng.standard_normal((n_selected, channels))
        direction[mask.selected, :] = values
        norm = float(np.linalg.norm(direction))
    return direction / norm
