"""Initialization for the boundary search: surrogate attack + example soup.

A short momentum attack on the differentiable surrogate produces a sequence
of perturbed images inside an L-inf ball around the benign input; the later
iterates are averaged into a "soup" (convexity keeps the average inside the
ball and inside [0, 1]).  select_init then asks the real oracle: the soup
first, and on rejection a caller-supplied pool of opposite-class images in
order.  Every probe is a real ledger query.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_image, check_label, check_same_shape

__all__ = [
    "SoupConfig",
    "InitializationError",
    "mig_step",
    "run_surrogate_attack",
    "make_soup",
    "build_soup_init",
    "select_init",
    "DEFAULT_POOL_SIZE",
]

#: Documented default size of the targeted fallback pool (caller supplies the
#: images and their order; the CLI takes the first N opposite-class samples
#: in manifest order).
DEFAULT_POOL_SIZE = 10


@dataclass(frozen=True)
class SoupConfig:
    """Hyperparameters of the surrogate attack and the soup average.

    step_size defaults to epsilon / 10 when left as None.  scaling_factor is
    accepted for config compatibility but has no effect on the update rule
    (the momentum recursion has no slot for it); it is kept so configs can
    carry it without erroring.
    """

    epsilon: float = 8.0 / 255.0
    step_size: float | None = None
    momentum_decay: float = 0.95
    total_iterations: int = 10
    soup_iterations: tuple = (6, 7, 8, 9, 10)
    scaling_factor: float = 20.0  # accepted, documented no-op

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if not 0 <= self.momentum_decay < 1:
            raise ValueError(f"momentum_decay must lie in [0, 1), got {self.momentum_decay}")
        if int(self.total_iterations) < 1:
            raise ValueError(f"total_iterations must be >= 1, got {self.total_iterations}")
        iters = tuple(int(t) for t in self.soup_iterations)
        if not iters:
            raise ValueError("soup_iterations must not be empty")
        if any(t < 1 or t > self.total_iterations for t in iters):
            raise ValueError(
                f"soup_iterations {iters} must lie within 1..{self.total_iterations}"
            )
        object.__setattr__(self, "soup_iterations", iters)

    @property
    def effective_step_size(self):
        return self.epsilon / 10.0 if self.step_size is None else float(self.step_size)


class InitializationError(RuntimeError):
    """Neither the soup nor any pool image fooled the oracle."""

    def __init__(self, message, queries_spent=0):
        super().__init__(message)
        self.queries_spent = queries_spent


def mig_step(model, x_adv, x, y, momentum, cfg):
    """One momentum step maximizing the surrogate's loss at the true label.

    The gradient is L1-normalized before entering the momentum accumulator
    (a gradient with L1 norm below 1e-12 contributes zero); the iterate moves
    by step_size * sign(momentum) and is clipped back onto the L-inf
    epsilon-ball around x intersected with [0, 1].  Returns (next_iterate,
    next_momentum).
    """
    x = check_image(x, "x")
    x_adv = check_image(x_adv, "x_adv")
    check_same_shape(x_adv, x, "x_adv", "x")
    y = check_label(y)
    momentum = np.asarray(momentum, dtype=np.float64)
    check_same_shape(momentum, x, "momentum", "x")
    eps = cfg.epsilon
    if float(np.max(np.abs(x_adv - x))) > eps + 1e-9:
        raise ValueError("x_adv lies outside the epsilon-ball around x")

    _, gradient = model.loss_gradient(x_adv, y)
    l1 = float(np.abs(gradient).sum())
    normalized = gradient / l1 if l1 >= 1e-12 else np.zeros_like(gradient)
    next_momentum = cfg.momentum_decay * momentum + normalized
    stepped = x_adv + cfg.effective_step_size * np.sign(next_momentum)
    lower = np.maximum(x - eps, 0.0)
    upper = np.minimum(x + eps, 1.0)
    return np.clip(stepped, lower, upper), next_momentum


def run_surrogate_attack(model, x, y, cfg=None):
    """Run the full momentum attack; returns the snapshots at soup iterations.

    Iterations are 1-indexed; the returned list holds the iterates at the
    (sorted) cfg.soup_iterations checkpoints, in order.
    """
    cfg = cfg or SoupConfig()
    x = check_image(x, "x")
    y = check_label(y)
    wanted = sorted(set(cfg.soup_iterations))
    x_adv = x.copy()
    momentum = np.zeros_like(x)
    snapshots = []
    for iteration in range(1, cfg.total_iterations + 1):
        x_adv, momentum = mig_step(model, x_adv, x, y, momentum, cfg)
        if iteration in wanted:
            snapshots.append(x_adv.copy())
    return snapshots


def make_soup(snapshots, weights=None):
    """Weighted average of perturbed images, clamped to [0, 1].

    Weights default to uniform 1/n; they must be non-negative and sum to 1
    within 1e-9.  All snapshots must share one shape.  The average is
    permutation-invariant (matching weight/snapshot reordering).
    """
    snapshots = [np.asarray(s, dtype=np.float64) for s in snapshots]
    if not snapshots:
        raise ValueError("need at least one snapshot to make a soup")
    shape = snapshots[0].shape
    for index, snap in enumerate(snapshots[1:], start=1):
        if snap.shape != shape:
            raise ValueError(
                f"snapshot {index} has shape {snap.shape}, expected {shape}"
            )
    if weights is None:
        weights = np.full(len(snapshots), 1.0 / len(snapshots))
    else:
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if weights.shape[0] != len(snapshots):
            raise ValueError(
                f"{weights.shape[0]} weights for {len(snapshots)} snapshots"
            )
        if np.any(weights < 0):
            raise ValueError("soup weights must be non-negative")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValueError(f"soup weights must sum to 1, got {weights.sum()!r}")
    soup = np.zeros(shape)
    for weight, snap in zip(weights, snapshots):
        soup += weight * snap
    return np.clip(soup, 0.0, 1.0)


def build_soup_init(model, x, y, cfg=None):
    """Surrogate attack + uniform soup in one call (no oracle queries)."""
    snapshots = run_surrogate_attack(model, x, y, cfg)
    return make_soup(snapshots)


def select_init(x, y, soup, target_pool, oracle):
    """Pick the starting point for the boundary search, probing the oracle.

    Queries the soup first (one ledger query); if the oracle disagrees with
    the true label y, returns (soup, "soup").  Otherwise walks the target
    pool in the given order, one query per image, returning the first
    adversarial one as (image, "targeted").  If everything is exhausted,
    raises InitializationError carrying the number of queries spent.
    """
    x = check_image(x, "x")
    y = check_label(y)
    soup = check_image(soup, "soup")
    check_same_shape(soup, x, "soup", "x")
    if oracle.query(soup) != y:
        return soup, "soup"
    queries = 1
    for image in target_pool:
        image = check_image(image, "pool image")
        check_same_shape(image, x, "pool image", "x")
        queries += 1
        if oracle.query(image) != y:
            return image, "targeted"
    raise InitializationError(
        f"initialization failed: soup and all {queries - 1} pool images "
        "carry the true label",
        queries_spent=queries,
    )
