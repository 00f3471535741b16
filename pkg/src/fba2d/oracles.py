"""Hard-label detector oracles with query accounting.

An oracle answers one question about an image: 0 = real, 1 = fake.  Every
delivered verdict advances a thread-safe ledger by exactly one, so attack
traces can be audited against the oracle's own count.  Before judging, every
oracle snaps its input to the 8-bit grid (round-half-away-from-zero); that
makes a local synthetic oracle and the same oracle behind the HTTP protocol
(which ships 8-bit PNGs) agree on identical bytes.

Transport problems in the HTTP client raise OracleTransportError instead of
returning a verdict, and the ledger does not advance on failures.
"""

from __future__ import annotations

import base64
import threading
import time

import numpy as np
import requests

from .pngio import encode_png
from .spectral import build_mask, dct2
from .validation import check_image

__all__ = [
    "QueryLedger",
    "Oracle",
    "OracleTransportError",
    "HalfspaceOracle",
    "FreqEnergyOracle",
    "HttpOracle",
    "quantize_8bit",
    "make_oracle",
    "DEFAULT_ENERGY_THRESHOLD",
    "DEFAULT_HIGH_FRACTION",
]

#: Default high-band size (fraction of coefficient count) for energy
#: oracles.  A narrow top-corner wedge: wide enough to hold the texture
#: signature that separates the synthetic classes, narrow enough that a
#: broadband perturbation leaks only ~1% of its energy into it (so the
#: detector cannot be crossed by unstructured noise).
DEFAULT_HIGH_FRACTION = 0.01

#: Default decision threshold on the high-band energy fraction.  Sized
#: against the synthetic testbed: generated (low-pass) content sits orders
#: of magnitude below it, natural texture sits several times above, and an
#: 8/255 L-inf perturbation whose sign pattern concentrates on the wedge
#: (an aligned surrogate attack produces exactly that) clears it with
#: margin — while an unstructured broadband step of the same size leaks
#: only ~1% of its energy into the wedge and falls short.
DEFAULT_ENERGY_THRESHOLD = 8e-4

LABEL_REAL = 0
LABEL_FAKE = 1


def quantize_8bit(image):
    """Snap a [0, 1] image to the 8-bit grid, rounding halves away from zero."""
    return np.floor(image * 255.0 + 0.5) / 255.0


class OracleTransportError(RuntimeError):
    """The oracle could not deliver a verdict (network, protocol, or server)."""


class QueryLedger:
    """Thread-safe query counter with a resettable per-run window."""

    def __init__(self):
        self._lock = threading.Lock()
        self._total = 0
        self._run_start = 0

    def record(self):
        with self._lock:
            self._total += 1

    def start_run(self):
        with self._lock:
            self._run_start = self._total

    @property
    def total_queries(self):
        with self._lock:
            return self._total

    @property
    def per_run_queries(self):
        with self._lock:
            return self._total - self._run_start


class Oracle:
    """Base class: validates, quantizes, delegates to _decide, counts."""

    def __init__(self):
        self._ledger = QueryLedger()

    @property
    def ledger(self):
        return self._ledger

    def query(self, image):
        """Hard-label verdict for one image: 0 = real, 1 = fake."""
        image = check_image(image)
        label = int(self._decide(quantize_8bit(image)))
        if label not in (LABEL_REAL, LABEL_FAKE):
            raise ValueError(f"oracle produced an invalid label {label}")
        self._ledger.record()
        return label

    def _decide(self, image):
        raise NotImplementedError


class HalfspaceOracle(Oracle):
    """Linear detector in the DCT domain: fake iff <weight, dct2(x)> + bias >= 0.

    The tie (score exactly zero) goes to fake.  Because the transform is an
    isometry, the minimal L2 perturbation taking any image x to the decision
    boundary is |<weight, dct2(x)> + bias| / ||weight||_2 exactly, exposed via
    boundary_distance for ground-truth comparisons.  Note that query() judges
    the 8-bit quantization of its input while boundary_distance is computed
    on the raw image; feed images already on the 8-bit grid when exactness
    across both matters.
    """

    def __init__(self, weight, bias):
        super().__init__()
        weight = np.asarray(weight, dtype=np.float64)
        if weight.ndim == 2:
            weight = weight[:, :, None]
        if weight.ndim != 3:
            raise ValueError(f"weight must have shape (H, W, C), got {weight.shape}")
        norm = float(np.linalg.norm(weight))
        if norm <= 0.0 or not np.isfinite(norm):
            raise ValueError("weight vector must be nonzero and finite")
        self.weight = weight
        self.bias = float(bias)
        self._weight_norm = norm

    def score(self, image):
        image = check_image(image)
        if image.shape != self.weight.shape:
            raise ValueError(
                f"image shape {image.shape} does not match weight shape {self.weight.shape}"
            )
        return float(np.vdot(self.weight, dct2(image))) + self.bias

    def boundary_distance(self, image):
        """Exact L2 distance from the image to the decision boundary."""
        return abs(self.score(image)) / self._weight_norm

    def _decide(self, image):
        return LABEL_FAKE if self.score(image) >= 0.0 else LABEL_REAL


class FreqEnergyOracle(Oracle):
    """Energy-ratio detector: real iff the high-band energy share is large.

    The share is sum of squared DCT coefficients at high_mask positions (all
    channels) over total spectral energy.  Generated content tends to be
    low-pass, so a small share reads as fake; the all-zero image (no energy
    at all) is fake by definition.
    """

    def __init__(self, high_mask, threshold=DEFAULT_ENERGY_THRESHOLD):
        super().__init__()
        high_mask = np.asarray(high_mask, dtype=bool)
        if high_mask.ndim != 2:
            raise ValueError(f"high_mask must be a 2-D boolean array, got {high_mask.shape}")
        if not high_mask.any():
            raise ValueError("high_mask selects no coefficients")
        threshold = float(threshold)
        if not 0 < threshold < 1:
            raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
        self.high_mask = high_mask
        self.threshold = threshold

    @classmethod
    def from_fraction(
        cls, shape, high_fraction=DEFAULT_HIGH_FRACTION, threshold=DEFAULT_ENERGY_THRESHOLD
    ):
        mask = build_mask(shape, 0.0, high_fraction)
        return cls(mask.high_band, threshold)

    def high_band_fraction(self, image):
        image = check_image(image)
        if image.shape[:2] != self.high_mask.shape:
            raise ValueError(
                f"image shape {image.shape[:2]} does not match mask shape {self.high_mask.shape}"
            )
        spectrum = dct2(image)
        total = float(np.sum(spectrum * spectrum))
        if total <= 0.0:
            return 0.0
        high = float(np.sum(spectrum[self.high_mask, :] ** 2))
        return high / total

    def _decide(self, image):
        spectrum = dct2(image)
        total = float(np.sum(spectrum * spectrum))
        if total <= 0.0:
            return LABEL_FAKE
        high = float(np.sum(spectrum[self.high_mask, :] ** 2))
        return LABEL_REAL if high / total >= self.threshold else LABEL_FAKE


class HttpOracle(Oracle):
    """Client for a remote detector speaking the package's HTTP protocol.

    Protocol: POST to the endpoint with content-type application/json and
    body {"image_png_base64": "<base64 of the 8-bit PNG>"}; the response is
    {"label": 0 or 1}.  Connection errors, timeouts and 5xx responses are
    retried up to ``retries`` times with exponential backoff; other non-2xx
    statuses and malformed bodies fail immediately.  All failures raise
    OracleTransportError and leave the ledger untouched; a verdict that
    needed retries still counts as a single query.
    """

    def __init__(
        self,
        endpoint,
        timeout=10.0,
        retries=3,
        backoff=0.25,
        token=None,
        session=None,
    ):
        super().__init__()
        self.endpoint = str(endpoint)
        self.timeout = float(timeout)
        self.retries = int(retries)
        self.backoff = float(backoff)
        self.token = token
        self._session = session if session is not None else requests.Session()

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def _decide(self, image):
        payload = {"image_png_base64": base64.b64encode(encode_png(image)).decode("ascii")}
        last_error = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * (2.0 ** (attempt - 1)))
            try:
                response = self._session.post(
                    self.endpoint, json=payload, headers=self._headers(), timeout=self.timeout
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = f"connection failed: {exc}"
                continue
            if 500 <= response.status_code < 600:
                last_error = f"server error {response.status_code}"
                continue
            if not 200 <= response.status_code < 300:
                raise OracleTransportError(
                    f"oracle endpoint returned status {response.status_code}"
                )
            try:
                body = response.json()
            except ValueError as exc:
                raise OracleTransportError(f"malformed oracle response: {exc}") from exc
            label = body.get("label") if isinstance(body, dict) else None
            if not isinstance(label, int) or isinstance(label, bool) or label not in (0, 1):
                raise OracleTransportError(
                    f"malformed oracle response body: {body!r}"
                )
            return label
        raise OracleTransportError(
            f"oracle unreachable after {self.retries + 1} attempts: {last_error}"
        )


def _parse_oracle_params(text):
    params = {}
    if not text:
        return params
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ValueError(f"malformed oracle parameter {chunk!r} (expected key=value)")
        key, raw = chunk.split("=", 1)
        key = key.strip()
        raw = raw.strip()
        try:
            value = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                value = raw
        params[key] = value
    return params


def make_oracle(spec, image_shape=None):
    """Build an oracle from a CLI spec string.

    Forms:
      "freq-energy[:high_fraction=F,threshold=T]"  (needs image_shape)
      "halfspace[:seed=S,margin=M]"                (needs image_shape)
      "http://host:port/path[|timeout=T,token=K,retries=N,backoff=B]"
    """
    spec = str(spec).strip()
    if spec.startswith("http://") or spec.startswith("https://"):
        endpoint, _, param_text = spec.partition("|")
        params = _parse_oracle_params(param_text)
        return HttpOracle(endpoint, **params)

    name, _, param_text = spec.partition(":")
    params = _parse_oracle_params(param_text)
    if name == "freq-energy":
        if image_shape is None:
            raise ValueError("freq-energy oracle needs the image shape")
        return FreqEnergyOracle.from_fraction(
            image_shape,
            high_fraction=params.pop("high_fraction", DEFAULT_HIGH_FRACTION),
            threshold=params.pop("threshold", DEFAULT_ENERGY_THRESHOLD),
        )
    if name == "halfspace":
        if image_shape is None:
            raise ValueError("halfspace oracle needs the image shape")
        seed = int(params.pop("seed", 0))
        margin = float(params.pop("margin", 0.5))
        height, width = int(image_shape[0]), int(image_shape[1])
        channels = int(image_shape[2]) if len(image_shape) > 2 else 1
        rng = np.random.default_rng([seed, 0x0FBA2D])
        weight = rng.standard_normal((height, width, channels))
        weight /= np.linalg.norm(weight)
        gray = np.full((height, width, channels), 0.5)
        bias = -float(np.vdot(weight, dct2(gray))) - margin
        return HalfspaceOracle(weight, bias)
    raise ValueError(f"unknown oracle spec {spec!r}")
