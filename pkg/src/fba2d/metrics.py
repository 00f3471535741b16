"""Distortion metrics and benchmark aggregation.

All metrics operate on float images in [0, 1].  rmse is the root mean squared
pixel difference (so rmse = l2 / sqrt(H*W*C) exactly); psnr uses MAX = 1.0
with +inf for identical inputs; ssim uses 8x8 non-overlapping windows with
population moments per channel, averaged over all windows and channels, with
the standard stabilizers C1 = 0.01^2 and C2 = 0.03^2.

A sample "succeeds at threshold t" when its final image is adversarial and
its rmse is <= t; success is therefore monotone across thresholds.  Per
threshold, the aggregate reports the success rate, the mean/median queries
spent to first reach that rmse among successful samples, and their mean
final L2.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from .validation import check_image, check_same_shape

__all__ = [
    "rmse",
    "psnr",
    "ssim",
    "SampleMetrics",
    "BenchmarkSummary",
    "ThresholdRow",
    "aggregate",
    "compute_sample_metrics",
    "DEFAULT_THRESHOLDS",
]

DEFAULT_THRESHOLDS = (0.1, 0.05, 0.01)

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
SSIM_WINDOW = 8


def rmse(a, b):
    """Root mean squared difference on the [0, 1] pixel scale."""
    a = check_image(a, "a")
    b = check_image(b, "b")
    check_same_shape(a, b, "a", "b")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(a, b):
    """Peak signal-to-noise ratio in dB with MAX = 1.0; +inf when identical."""
    a = check_image(a, "a")
    b = check_image(b, "b")
    check_same_shape(a, b, "a", "b")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim(a, b, window=SSIM_WINDOW):
    """Mean structural similarity over non-overlapping windows.

    Windows are window x window tiles per channel (partial tiles at the
    right/bottom edges are dropped); per-window statistics use population
    moments; the result is the plain mean over every window of every channel.
    Images must be at least one window tall and wide.
    """
    a = check_image(a, "a")
    b = check_image(b, "b")
    check_same_shape(a, b, "a", "b")
    height, width, channels = a.shape
    if height < window or width < window:
        raise ValueError(
            f"images must be at least {window}x{window} for ssim, got {height}x{width}"
        )
    rows = height // window
    cols = width // window
    trimmed_a = a[: rows * window, : cols * window, :]
    trimmed_b = b[: rows * window, : cols * window, :]
    # (rows, cols, C, window*window) stacks of flattened tiles.
    tiles_a = (
        trimmed_a.reshape(rows, window, cols, window, channels)
        .transpose(0, 2, 4, 1, 3)
        .reshape(rows, cols, channels, -1)
    )
    tiles_b = (
        trimmed_b.reshape(rows, window, cols, window, channels)
        .transpose(0, 2, 4, 1, 3)
        .reshape(rows, cols, channels, -1)
    )
    mu_a = tiles_a.mean(axis=-1)
    mu_b = tiles_b.mean(axis=-1)
    var_a = tiles_a.var(axis=-1)
    var_b = tiles_b.var(axis=-1)
    cov = ((tiles_a - mu_a[..., None]) * (tiles_b - mu_b[..., None])).mean(axis=-1)
    numerator = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    denominator = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(numerator / denominator))


@dataclass
class SampleMetrics:
    """Final distortion and query accounting for one attacked sample.

    success_at maps each rmse threshold to whether the (adversarial) final
    image landed at or below it; queries_to maps each threshold to the
    queries spent when the run first reached it (None when never reached).
    """

    sample_id: str
    rmse: float
    l2: float
    psnr: float
    ssim: float
    queries: int
    success_at: dict = field(default_factory=dict)
    queries_to: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "sample_id": self.sample_id,
            "rmse": self.rmse,
            "l2": self.l2,
            "psnr": None if math.isinf(self.psnr) else self.psnr,
            "ssim": self.ssim,
            "queries": self.queries,
            "success_at": {str(t): bool(v) for t, v in self.success_at.items()},
            "queries_to": {
                str(t): (None if v is None else int(v)) for t, v in self.queries_to.items()
            },
        }


def compute_sample_metrics(
    sample_id,
    x,
    final,
    queries,
    adversarial,
    thresholds=DEFAULT_THRESHOLDS,
    trace=None,
    query_offset=0,
):
    """Build SampleMetrics for one run.

    ``adversarial`` is whether the final image fools the oracle (False for
    failed runs).  queries_to comes from the trace when given, shifted by
    ``query_offset`` (queries the caller spent before the traced run, e.g.
    on initialization probes); a threshold the final image satisfies but the
    trace never recorded (possible only through clamping round-off at the
    margin) falls back to the total spend.
    """
    x = check_image(x, "x")
    final = check_image(final, "final")
    check_same_shape(final, x, "final", "x")
    distance = float(np.linalg.norm(final - x))
    error = rmse(x, final)
    success_at = {}
    queries_to = {}
    for threshold in thresholds:
        threshold = float(threshold)
        success = bool(adversarial and error <= threshold)
        success_at[threshold] = success
        reached = trace.queries_to_rmse(threshold) if trace is not None else None
        if reached is not None:
            reached = int(reached) + int(query_offset)
        elif success:
            reached = int(queries)
        queries_to[threshold] = reached
    return SampleMetrics(
        sample_id=str(sample_id),
        rmse=error,
        l2=distance,
        psnr=psnr(x, final),
        ssim=ssim(x, final),
        queries=int(queries),
        success_at=success_at,
        queries_to=queries_to,
    )


@dataclass
class ThresholdRow:
    threshold: float
    asr: float
    mean_queries: float | None
    median_queries: float | None
    mean_l2: float | None


@dataclass
class BenchmarkSummary:
    """Per-threshold aggregate over a batch of SampleMetrics."""

    n_samples: int
    rows: list

    def to_csv_text(self):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["threshold", "asr", "mean_queries", "median_queries", "mean_l2"])
        for row in self.rows:
            writer.writerow(
                [
                    f"{row.threshold:g}",
                    f"{row.asr:.6f}",
                    "" if row.mean_queries is None else f"{row.mean_queries:.6f}",
                    "" if row.median_queries is None else f"{row.median_queries:.6f}",
                    "" if row.mean_l2 is None else f"{row.mean_l2:.6f}",
                ]
            )
        return buffer.getvalue()

    def to_json_dict(self):
        return {
            "n_samples": self.n_samples,
            "thresholds": [
                {
                    "threshold": row.threshold,
                    "asr": row.asr,
                    "mean_queries": row.mean_queries,
                    "median_queries": row.median_queries,
                    "mean_l2": row.mean_l2,
                }
                for row in self.rows
            ],
        }

    def to_json_text(self):
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def row_for(self, threshold):
        for row in self.rows:
            if row.threshold == float(threshold):
                return row
        raise KeyError(f"no row for threshold {threshold}")


def aggregate(samples, thresholds=DEFAULT_THRESHOLDS):
    """Aggregate SampleMetrics into per-threshold benchmark rows.

    ASR = fraction of all samples succeeding at the threshold.  Query stats
    are over queries_to[threshold] of the successful samples; mean_l2 is the
    mean final L2 among them.  Thresholds with no successes produce zero ASR
    and empty statistics; an empty sample list is rejected.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("aggregate needs at least one sample report")
    rows = []
    for threshold in thresholds:
        threshold = float(threshold)
        successes = [s for s in samples if s.success_at.get(threshold, False)]
        asr = len(successes) / len(samples)
        counts = [s.queries_to.get(threshold) for s in successes]
        counts = [c for c in counts if c is not None]
        if counts:
            mean_queries = float(np.mean(counts))
            median_queries = float(statistics.median(counts))
        else:
            mean_queries = None
            median_queries = None
        mean_l2 = float(np.mean([s.l2 for s in successes])) if successes else None
        rows.append(
            ThresholdRow(
                threshold=threshold,
                asr=asr,
                mean_queries=mean_queries,
                median_queries=median_queries,
                mean_l2=mean_l2,
            )
        )
    return BenchmarkSummary(n_samples=len(samples), rows=rows)
