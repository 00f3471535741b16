"""Synthetic real-vs-generated image testbed.

Two desk-scale classes built directly in the DCT domain:

* real-like (label 0): smooth base content, a faint broadband noise floor,
  and injected high-frequency texture — random positive amplitudes on the
  top anti-diagonal wedge, so the spectrum has energy everywhere and,
  usefully for the linear surrogate, a positive mean in the texture wedge;
* fake-like (label 1): the same smooth base with the texture wedge strongly
  attenuated — a faint random remnant is left, sized at a fixed fraction of
  the detector threshold, mimicking the low-pass bias of generated imagery
  without making the wedge exactly zero.

The base content is a per-sample mean level plus Gaussian coefficients on
the lowest anti-diagonal band.  The texture wedge matches the default
energy-oracle band (the top 1% of coefficients by anti-diagonal), which
keeps the two classes separable by that oracle with a wide margin while the
wedge stays small enough that broadband perturbations leak very little
energy into it.  Images decode, clamp to [0, 1] and ship as 8-bit PNGs with
a JSON manifest [{path, label}].  Generation is deterministic in
(seed, class, index), so a fixed seed reproduces every byte.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .oracles import DEFAULT_ENERGY_THRESHOLD
from .pngio import read_png, write_png
from .spectral import build_mask, idct2

__all__ = [
    "generate_dataset",
    "load_manifest",
    "generate_image",
    "LOW_BAND_FRACTION",
    "TEXTURE_FRACTION",
    "NOISE_SCALE",
    "TEXTURE_AMPLITUDE",
    "FLOOR_SCALE",
    "LEAKAGE_RATIO",
]

LABEL_REAL = 0
LABEL_FAKE = 1

#: Band layout of the generator: base noise lives in the lowest 10% of
#: coefficients; texture in the top 1% wedge (the default oracle band).
LOW_BAND_FRACTION = 0.10
TEXTURE_FRACTION = 0.01

#: Standard deviation of the low-band base coefficients.
NOISE_SCALE = 0.45

#: Mean amplitude of the injected texture-wedge coefficients.
TEXTURE_AMPLITUDE = 0.266

#: Standard deviation of the broadband noise floor added to real-like
#: images (gives them energy across the whole spectrum, not just the two
#: structured bands).
FLOOR_SCALE = 0.015

#: Residual wedge energy of fake-like images, as a fraction of the default
#: detector threshold (strictly below 1: fakes stay on the fake side with
#: margin, but the wedge is attenuated rather than exactly zero).
LEAKAGE_RATIO = 0.6


def generate_image(
    label,
    rng,
    size=(32, 32, 1),
    noise_scale=NOISE_SCALE,
    texture_amplitude=TEXTURE_AMPLITUDE,
    floor_scale=FLOOR_SCALE,
    leakage_ratio=LEAKAGE_RATIO,
):
    """One synthetic image of the given class as a float array in [0, 1]."""
    height, width, channels = (int(v) for v in size)
    low = build_mask((height, width), LOW_BAND_FRACTION, 0.0).low_band.copy()
    low[0, 0] = False  # the mean level is set separately
    wedge = build_mask((height, width), 0.0, TEXTURE_FRACTION).high_band

    spectrum = np.zeros((height, width, channels))
    mean_level = rng.uniform(0.45, 0.55)
    spectrum[0, 0, :] = mean_level * np.sqrt(height * width)
    n_low = int(low.sum())
    n_wedge = int(wedge.sum())
    for channel in range(channels):
        spectrum[low, channel] += rng.normal(0.0, noise_scale, n_low)
        if label == LABEL_REAL:
            spectrum[..., channel] += rng.normal(0.0, floor_scale, (height, width))
            spectrum[wedge, channel] += texture_amplitude * rng.uniform(
                0.7, 1.3, n_wedge
            )
        else:
            base_energy = float(np.sum(spectrum[..., channel] ** 2))
            target = leakage_ratio * DEFAULT_ENERGY_THRESHOLD * base_energy
            remnant = np.abs(rng.standard_normal(n_wedge))
            remnant *= np.sqrt(target) / max(np.linalg.norm(remnant), 1e-12)
            spectrum[wedge, channel] += remnant
    return np.clip(idct2(spectrum), 0.0, 1.0)


def generate_dataset(out_dir, n_per_class, size=(32, 32, 1), seed=0):
    """Write n_per_class images of each class plus manifest.json to out_dir.

    Returns the manifest (list of {"path", "label"} with paths relative to
    out_dir), ordered real block first, then fake, both by index.  A zero
    count yields an empty manifest without error.
    """
    n_per_class = int(n_per_class)
    if n_per_class < 0:
        raise ValueError(f"n_per_class must be >= 0, got {n_per_class}")
    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    for label, name in ((LABEL_REAL, "real"), (LABEL_FAKE, "fake")):
        for index in range(n_per_class):
            rng = np.random.default_rng([int(seed), label, index])
            image = generate_image(label, rng, size=size)
            filename = f"{name}_{index:04d}.png"
            write_png(os.path.join(out_dir, filename), image)
            manifest.append({"path": filename, "label": label})
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")
    return manifest


def load_manifest(path):
    """Read a manifest and resolve its image paths against its directory."""
    with open(path, "r", encoding="utf-8") as handle:
        entries = json.load(handle)
    if not isinstance(entries, list):
        raise ValueError("manifest must be a JSON list of {path, label} entries")
    base = os.path.dirname(os.path.abspath(path))
    resolved = []
    for entry in entries:
        if not isinstance(entry, dict) or "path" not in entry or "label" not in entry:
            raise ValueError(f"malformed manifest entry: {entry!r}")
        label = int(entry["label"])
        if label not in (LABEL_REAL, LABEL_FAKE):
            raise ValueError(f"manifest label must be 0 or 1, got {label}")
        resolved.append(
            {
                "path": os.path.join(base, entry["path"]),
                "label": label,
            }
        )
    return resolved


def read_image(path):
    """Load a PNG written by the generator back to float [0, 1]."""
    return read_png(path)
