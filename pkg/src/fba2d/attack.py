"""Triangle-geometry boundary search in the DCT domain, under a query budget.

Geometry of a single step: let X be the benign spectrum and X_t the current
adversarial spectrum at distance delta_t = ||X_t - X||_2.  Inside a 2-D
subspace spanned by u = (X_t - X)/delta_t and a random masked direction w,
the next candidate is placed at the third vertex of a triangle with angle
alpha at the candidate vertex and angle |beta| at X.  The law of sines fixes
its distance from X:

    delta_next = delta_t * sin(pi - (alpha + |beta|)) / sin(alpha)

which is strictly below delta_t exactly when |beta| + 2*alpha > pi.  The
angle alpha adapts to the oracle's verdicts (success widens it, failure
shrinks it, both clamped around pi/2), and beta is refined by a short binary
search per subspace, probing the mirrored angle -beta whenever +beta fails.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .spectral import FrequencyMask, build_mask, dct2, idct2, sample_masked_direction
from .validation import check_image, check_label, check_same_shape, check_spectrum

__all__ = [
    "AttackConfig",
    "AttackState",
    "AttackTrace",
    "FrequencyTriangleAttack",
    "Subspace2D",
    "TraceRecord",
    "candidate",
    "delta_next",
    "make_subspace",
    "run_attack",
    "search_subspace",
    "update_alpha",
]

#: Starting half-turn angle at the candidate vertex.
ALPHA_INIT = math.pi / 2

#: Distances below this are treated as "already at the benign image".
DEGENERATE_DELTA = 1e-9


@dataclass(frozen=True)
class AttackConfig:
    """Hyperparameters for one attack run.

    max_queries
        Hard oracle budget Q; every oracle call the attack makes counts,
        including the initial verification of the starting point.
    subspace_iterations
        Number of binary-search refinements of beta per subspace (N).
    alpha_step
        Additive increment applied to alpha after a successful query (gamma).
    alpha_shrink
        Failure decrement ratio: a failed query subtracts
        alpha_shrink * alpha_step (lambda).
    alpha_bound
        Clamp half-width tau: alpha stays within [pi/2 - tau, pi/2 + tau].
    beta_floor
        Smallest angle at the benign vertex ever probed.
    mask
        FrequencyMask restricting where random directions are sampled.
        None means the full spectrum (built per image shape at run time).
    rng_seed
        Seed for the direction sampler when run_attack is not handed an
        explicit generator.
    """

    max_queries: int = 500
    subspace_iterations: int = 2
    alpha_step: float = 0.01
    alpha_shrink: float = 0.05
    alpha_bound: float = 0.1
    beta_floor: float = math.pi / 16
    mask: FrequencyMask | None = None
    rng_seed: int | None = None

    def __post_init__(self):
        if int(self.max_queries) < 1:
            raise ValueError(f"max_queries must be >= 1, got {self.max_queries}")
        if int(self.subspace_iterations) < 1:
            raise ValueError(
                f"subspace_iterations must be >= 1, got {self.subspace_iterations}"
            )
        if not self.alpha_step > 0:
            raise ValueError(f"alpha_step must be > 0, got {self.alpha_step}")
        if not self.alpha_shrink > 0:
            raise ValueError(f"alpha_shrink must be > 0, got {self.alpha_shrink}")
        if not 0 < self.alpha_bound < math.pi / 2:
            raise ValueError(
                f"alpha_bound must lie in (0, pi/2), got {self.alpha_bound}"
            )
        if not 0 < self.beta_floor < math.pi / 2:
            raise ValueError(
                f"beta_floor must lie in (0, pi/2), got {self.beta_floor}"
            )


@dataclass
class AttackState:
    """Mutable snapshot of a run: spectra, live alpha, budget spent, step index."""

    benign_spectrum: np.ndarray
    spectrum: np.ndarray
    alpha: float
    queries_used: int
    step: int

    @property
    def delta(self):
        return float(np.linalg.norm(self.spectrum - self.benign_spectrum))


@dataclass(frozen=True)
class Subspace2D:
    """Orthonormal pair spanning the search plane for one subspace round.

    u points from the benign spectrum toward the current adversarial one;
    w is a random masked direction orthogonalized against u (it can carry
    off-mask components inherited from the projection when u overlaps the
    mask).
    """

    u: np.ndarray
    w: np.ndarray


def delta_next(delta_t, alpha, beta):
    """Distance of the next triangle vertex from the benign spectrum.

    Requires 0 < alpha < pi and alpha + |beta| <= pi (equality gives the
    degenerate flat triangle and returns exactly 0.0; beta = 0 keeps the
    distance unchanged).  Strictly smaller than delta_t exactly when
    |beta| + 2*alpha > pi.
    """
    delta_t = float(delta_t)
    alpha = float(alpha)
    beta = abs(float(beta))
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t}")
    if not 0 < alpha < math.pi:
        raise ValueError(f"alpha must lie in (0, pi), got {alpha}")
    if alpha + beta > math.pi:
        raise ValueError(
            f"degenerate triangle: alpha + |beta| = {alpha + beta} exceeds pi"
        )
    if alpha + beta == math.pi:
        return 0.0
    return delta_t * math.sin(math.pi - (alpha + beta)) / math.sin(alpha)


def update_alpha(alpha, success, cfg):
    """Adapt alpha after one oracle verdict, clamped to pi/2 +/- alpha_bound."""
    alpha = float(alpha)
    if success:
        return min(alpha + cfg.alpha_step, math.pi / 2 + cfg.alpha_bound)
    return max(alpha - cfg.alpha_shrink * cfg.alpha_step, math.pi / 2 - cfg.alpha_bound)


def make_subspace(benign_spectrum, current_spectrum, mask, rng, max_attempts=16):
    """Build the 2-D search plane at the current boundary point.

    u is the unit direction from the benign spectrum to the current one; w is
    a freshly sampled masked direction Gram-Schmidt orthogonalized against u
    and renormalized.  Samples whose residual after projection is negligible
    (< 1e-8) are rejected and redrawn, up to ``max_attempts`` times.
    """
    benign_spectrum = check_spectrum(benign_spectrum, "benign_spectrum")
    current_spectrum = check_spectrum(current_spectrum, "current_spectrum")
    check_same_shape(benign_spectrum, current_spectrum, "benign_spectrum", "current_spectrum")
    diff = current_spectrum - benign_spectrum
    dist = float(np.linalg.norm(diff))
    if dist <= 0.0:
        raise ValueError("current_spectrum coincides with benign_spectrum")
    u = diff / dist
    channels = benign_spectrum.shape[2]
    for _ in range(max_attempts):
        sample = sample_masked_direction(mask, channels, rng)
        residual = sample - float(np.vdot(sample, u)) * u
        norm = float(np.linalg.norm(residual))
        if norm >= 1e-8:
            return Subspace2D(u=u, w=residual / norm)
    raise RuntimeError(
        f"could not find a direction independent of u in {max_attempts} attempts"
    )


def candidate(benign_spectrum, current_spectrum, alpha, beta, subspace):
    """Spectrum of the triangle's third vertex for a signed angle beta.

    The sign of beta picks the side of u within the plane; +beta and -beta
    are mirror images across u and sit at the same distance from the benign
    spectrum.
    """
    delta_t = float(np.linalg.norm(current_spectrum - benign_spectrum))
    dist = delta_next(delta_t, alpha, beta)
    beta = float(beta)
    direction = math.cos(beta) * subspace.u + math.sin(beta) * subspace.w
    return benign_spectrum + dist * direction


def search_subspace(state, subspace, oracle, cfg):
    """One subspace round of the boundary search.  Returns (new_state, improved).

    ``oracle`` is a callable mapping a candidate spectrum to True when it is
    adversarial (run_attack wires it to decode -> clamp -> query).  Every call
    consumes one query from the budget and updates alpha; the round starts
    with both signs of the floor angle and abandons the subspace if both
    fail, then refines beta by binary search for cfg.subspace_iterations
    iterations, testing -beta whenever +beta fails.  The returned state keeps
    the best (smallest-distance) accepted candidate, if any; an accepted
    candidate always shrinks the distance strictly.
    """
    if state.queries_used >= cfg.max_queries:
        return state, False

    benign = state.benign_spectrum
    delta_t = state.delta
    entry_alpha = state.alpha

    live = {"alpha": entry_alpha, "queries": state.queries_used}
    best = {"delta": None, "spectrum": None}

    def probe(signed_beta):
        """Query one candidate; returns verdict or None when out of budget."""
        if live["queries"] >= cfg.max_queries:
            return None
        alpha = live["alpha"]
        magnitude = min(abs(signed_beta), math.pi - alpha)
        beta = math.copysign(magnitude, signed_beta)
        dist = delta_next(delta_t, alpha, beta)
        spec = candidate(benign, state.spectrum, alpha, beta, subspace)
        verdict = bool(oracle(spec))
        live["queries"] += 1
        live["alpha"] = update_alpha(alpha, verdict, cfg)
        if verdict and dist < delta_t and (best["delta"] is None or dist < best["delta"]):
            best["delta"] = dist
            best["spectrum"] = spec
        return verdict

    def finalize():
        improved = best["spectrum"] is not None
        new_state = AttackState(
            benign_spectrum=benign,
            spectrum=best["spectrum"] if improved else state.spectrum,
            alpha=live["alpha"],
            queries_used=live["queries"],
            step=state.step + 1 if improved else state.step,
        )
        return new_state, improved

    beta = max(math.pi - 2 * entry_alpha, cfg.beta_floor)
    verdict = probe(beta)
    if verdict is None:
        return finalize()
    if not verdict:
        verdict = probe(-beta)
        if verdict is None or not verdict:
            return finalize()

    beta_ceiling = min(math.pi / 2, math.pi - entry_alpha)
    for _ in range(cfg.subspace_iterations):
        midpoint = (beta_ceiling + beta) / 2
        verdict = probe(midpoint)
        if verdict is None:
            break
        if verdict:
            beta = midpoint
            continue
        verdict = probe(-midpoint)
        if verdict is None:
            break
        if verdict:
            beta = midpoint
        else:
            # Both signs failed at the midpoint: the ceiling drops to it and
            # beta stays at the last feasible value.
            beta_ceiling = midpoint
    return finalize()


@dataclass(frozen=True)
class TraceRecord:
    step: int
    queries: int
    delta_l2: float
    rmse: float
    alpha: float

    def to_json(self):
        return json.dumps(
            {
                "step": self.step,
                "queries": self.queries,
                "delta_l2": self.delta_l2,
                "rmse": self.rmse,
                "alpha": self.alpha,
            },
            sort_keys=True,
        )


@dataclass
class AttackTrace:
    """Per-run history: one record per accepted step, plus the budget total.

    delta_l2 is the spectrum-space L2 distance from the benign image (equal
    to the pre-clamp pixel-space distance, since the transform is an
    isometry); rmse is delta_l2 / sqrt(H*W*C) on the [0, 1] scale.
    """

    records: list = field(default_factory=list)
    total_queries: int = 0

    def to_jsonl(self):
        """One JSON object per line: the step records, then a total trailer.

        The trailer ({"total_queries": N}) preserves queries spent after the
        last accepted step, which no record would otherwise account for.
        """
        lines = [record.to_json() for record in self.records]
        lines.append(json.dumps({"total_queries": int(self.total_queries)}))
        return "".join(line + "\n" for line in lines)

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.to_jsonl())

    @staticmethod
    def parse_jsonl(text):
        records = []
        total = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "step" not in obj:
                total = int(obj["total_queries"])
                continue
            records.append(
                TraceRecord(
                    step=int(obj["step"]),
                    queries=int(obj["queries"]),
                    delta_l2=float(obj["delta_l2"]),
                    rmse=float(obj["rmse"]),
                    alpha=float(obj["alpha"]),
                )
            )
        if total is None:
            # Trailer-free text (e.g. hand-built): the last record's count is
            # the best available bound.
            total = records[-1].queries if records else 0
        return AttackTrace(records=records, total_queries=total)

    def queries_to_rmse(self, threshold):
        """Budget spent when the trace first reached the given rmse, or None."""
        for record in self.records:
            if record.rmse <= threshold:
                return record.queries
        return None


def run_attack(x, y, init, oracle, cfg, rng=None):
    """Minimize the distortion of an adversarial image under a query budget.

    x is the benign image with true label y (0 real / 1 fake); init is an
    image the oracle already labels differently (verified here with one
    budgeted query; a non-adversarial init raises).  Returns the final
    decoded image, clamped to [0, 1], together with the trace.  The state
    lives in the DCT domain and only decodes (with clamping) at query time,
    so every accepted step, and in particular the returned image, has been
    judged adversarial by the oracle in exactly the form it is emitted.
    """
    x = check_image(x, "x")
    y = check_label(y)
    init = check_image(init, "init")
    check_same_shape(x, init, "x", "init")

    if cfg.mask is None:
        mask = build_mask(x.shape, 1.0, 0.0)
    else:
        mask = cfg.mask
        if tuple(mask.shape) != x.shape[:2]:
            raise ValueError(
                f"mask shape {mask.shape} does not match image shape {x.shape[:2]}"
            )
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)

    if oracle.query(init) == y:
        raise ValueError("init is not adversarial: the oracle assigns it the true label")
    queries = 1

    benign = dct2(x)
    spectrum = dct2(init)
    scale = math.sqrt(x.size)

    state = AttackState(
        benign_spectrum=benign,
        spectrum=spectrum,
        alpha=ALPHA_INIT,
        queries_used=queries,
        step=0,
    )
    records = [
        TraceRecord(
            step=0,
            queries=state.queries_used,
            delta_l2=state.delta,
            rmse=state.delta / scale,
            alpha=state.alpha,
        )
    ]

    def decide(spec):
        image = np.clip(idct2(spec), 0.0, 1.0)
        return oracle.query(image) != y

    while state.queries_used < cfg.max_queries:
        if state.delta < DEGENERATE_DELTA:
            break
        subspace = make_subspace(benign, state.spectrum, mask, rng)
        state, improved = search_subspace(state, subspace, decide, cfg)
        if improved:
            records.append(
                TraceRecord(
                    step=state.step,
                    queries=state.queries_used,
                    delta_l2=state.delta,
                    rmse=state.delta / scale,
                    alpha=state.alpha,
                )
            )

    adversarial = np.clip(idct2(state.spectrum), 0.0, 1.0)
    trace = AttackTrace(records=records, total_queries=state.queries_used)
    return adversarial, trace


class FrequencyTriangleAttack(BaseEstimator):
    """Estimator-style front end for the boundary search.

    All constructor arguments are hyperparameters in the sklearn sense
    (stored verbatim, visible through get_params / set_params); ``run``
    executes one attack and returns (adversarial_image, trace).

    >>> attack = FrequencyTriangleAttack(low_fraction=0.2, random_state=0)
    >>> adv, trace = attack.run(image, label, init, oracle)   # doctest: +SKIP
    """

    def __init__(
        self,
        max_queries=500,
        subspace_iterations=2,
        alpha_step=0.01,
        alpha_shrink=0.05,
        alpha_bound=0.1,
        beta_floor=math.pi / 16,
        low_fraction=1.0,
        high_fraction=0.0,
        random_state=None,
    ):
        self.max_queries = max_queries
        self.subspace_iterations = subspace_iterations
        self.alpha_step = alpha_step
        self.alpha_shrink = alpha_shrink
        self.alpha_bound = alpha_bound
        self.beta_floor = beta_floor
        self.low_fraction = low_fraction
        self.high_fraction = high_fraction
        self.random_state = random_state

    def build_config(self, image_shape):
        mask = build_mask(image_shape, self.low_fraction, self.high_fraction)
        return AttackConfig(
            max_queries=self.max_queries,
            subspace_iterations=self.subspace_iterations,
            alpha_step=self.alpha_step,
            alpha_shrink=self.alpha_shrink,
            alpha_bound=self.alpha_bound,
            beta_floor=self.beta_floor,
            mask=mask,
            rng_seed=self.random_state,
        )

    def run(self, image, label, init, oracle, rng=None):
        image = check_image(image, "image")
        cfg = self.build_config(image.shape)
        return run_attack(image, label, init, oracle, cfg, rng=rng)
