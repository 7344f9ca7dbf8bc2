"""Anchor sets, simplex sampling and the Lipschitz audit of the weighted
Frechet mean map."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spaces import MetricSpace, SpaceError, SpaceId, validate_weights

DIAMETER_SLACK = 1e-12

__all__ = [
    "AnchorSet",
    "LipschitzReport",
    "audit_lipschitz",
    "pairwise_diameter",
    "sample_simplex",
    "validate_weights",
]


@dataclass
class AnchorSet:
    space: MetricSpace
    points: np.ndarray
    source_indices: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if len(self.points) < 1:
            raise SpaceError("anchor set is empty")
        if not self.source_indices:
            self.source_indices = list(range(len(self.points)))
        if len(self.source_indices) != len(self.points):
            raise SpaceError("one source index per anchor is required")
        if len(set(self.source_indices)) != len(self.source_indices):
            raise SpaceError("anchor source indices must be distinct")

    def __len__(self):
        return len(self.points)

    def validate(self):
        for i, p in enumerate(self.points):
            self.space.ensure_valid(p, index=i)


@dataclass
class LipschitzReport:
    trials: int
    violations: int
    diameter_estimate: float
    max_ratio: float

    def as_dict(self):
        return {
            "trials": self.trials,
            "violations": self.violations,
            "diameter_estimate": self.diameter_estimate,
            "max_ratio": self.max_ratio,
        }


def pairwise_diameter(anchors: AnchorSet) -> float:
    """Largest distance between two anchors (0 for a single anchor)."""
    anchors.validate()
    pts = anchors.points
    m = len(pts)
    if m == 1:
        return 0.0
    i, j = np.triu_indices(m, 1)
    sq = anchors.space.batch_sqdist(pts[i], pts[j])
    return float(np.sqrt(sq.max()))


def sample_simplex(rng, m, size=None):
    """Uniform draws on the (m-1)-simplex via normalized exponential spacings."""
    shape = (m,) if size is None else (size, m)
    e = rng.standard_exponential(shape)
    return e / e.sum(axis=-1, keepdims=True)


def audit_lipschitz(space, anchors: AnchorSet, trials=1000, seed=0, sampler=None):
    """Empirically check ``d(mu(w1), mu(w2)) <= D sqrt(m) ||w1 - w2||_2``.

    ``space`` is a backend or a space tag matching ``anchors.space``. ``D``
    is the anchor diameter plus a ``1e-12`` slack. ``sampler(rng, m)`` may
    replace the uniform simplex draw (used to stub degenerate cases).
    """
    if not isinstance(space, MetricSpace):
        if SpaceId.parse(space) is not anchors.space.space_id:
            raise SpaceError(f"anchors live in {anchors.space.space_id.value}, not {space}")
        space = anchors.space
    if not space.hadamard:
        raise SpaceError("non-Hadamard space: bound not guaranteed")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sampler = sampler or sample_simplex
    D = pairwise_diameter(anchors) + DIAMETER_SLACK
    m = len(anchors)
    rng = np.random.default_rng(seed)
    W1 = np.empty((trials, m))
    W2 = np.empty((trials, m))
    for t in range(trials):
        W1[t] = validate_weights(sampler(rng, m))
        W2[t] = validate_weights(sampler(rng, m))
    prepared = space.prepare(anchors.points)
    mu1 = space.batch_mean(W1, prepared)
    mu2 = space.batch_mean(W2, prepared)
    dist = np.sqrt(space.batch_sqdist(mu1, mu2))
    if D == DIAMETER_SLACK:
        # identical anchors: mu is constant, any distance is rounding noise
        dist = np.zeros_like(dist)
    bound = D * np.sqrt(m) * np.linalg.norm(W1 - W2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, dist / bound, 0.0)
    ratio = np.where((bound == 0) & (dist == 0), 0.0, ratio)
    violations = int(np.sum(dist > bound))
    return LipschitzReport(
        trials=trials,
        violations=violations,
        diameter_estimate=D - DIAMETER_SLACK,
        max_ratio=float(ratio.max()),
    )

