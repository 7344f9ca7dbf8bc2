"""Backend contract shared by all output geometries."""

from __future__ import annotations

import enum
import logging

import numpy as np

log = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-9


class SpaceError(ValueError):
    """Invalid point, anchor set or weight vector for a space."""


class SpaceId(str, enum.Enum):
    WASSERSTEIN1D = "wasserstein1d"
    NETWORK = "network"
    SPD_POWER = "spd-power"
    SPD_BW = "spd-bw"

    @classmethod
    def parse(cls, tag) -> "SpaceId":
        if isinstance(tag, SpaceId):
            return tag
        key = str(tag).strip().lower()
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            known = ", ".join(s.value for s in cls)
            raise SpaceError(f"unknown space {tag!r} (expected one of {known})") from None


_ALIASES = {
    "dist": "wasserstein1d",
    "distribution": "wasserstein1d",
    "wasserstein": "wasserstein1d",
    "net": "network",
    "spd": "spd-power",
    "power": "spd-power",
    "bw": "spd-bw",
}


def validate_weights(w, tol=WEIGHT_SUM_TOL) -> np.ndarray:
    """Check that ``w`` lies on the simplex and return it renormalized."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise SpaceError(f"weights must be a non-empty vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise SpaceError("weights contain non-finite values")
    if np.any(w < 0):
        i = int(np.argmin(w))
        raise SpaceError(f"negative weight w[{i}] = {w[i]!r}")
    total = w.sum()
    if abs(total - 1.0) > tol:
        raise SpaceError(f"weights sum to {total!r}, not 1")
    return w / total


class MetricSpace:
    """Base class for a metric-space backend.

    Points are plain numpy arrays of shape ``point_shape``; anchor sets are
    stacked arrays of shape ``(m, *point_shape)``. Besides the per-point
    contract (``distance``, ``frechet_mean``, ``loss_grad_w``, ``validate``)
    each backend offers batched variants that training uses on minibatches.
    """

    space_id: SpaceId
    hadamard = True

    @property
    def point_shape(self) -> tuple:
        raise NotImplementedError

    # -- validation -------------------------------------------------------
    def validate(self, point) -> list:
        """Return a list of violated invariants (empty when valid)."""
        raise NotImplementedError

    def ensure_valid(self, point, index=None):
        errors = self.validate(point)
        if errors:
            where = "" if index is None else f" at index {index}"
            raise SpaceError(f"invalid {self.space_id.value} point{where}: " + "; ".join(errors))

    def as_points(self, points) -> np.ndarray:
        """Stack and validate a collection of points."""
        arr = np.asarray(points, dtype=float)
        if arr.shape[1:] != self.point_shape:
            raise SpaceError(
                f"expected points of shape {self.point_shape}, got {arr.shape[1:]}"
            )
        for i, p in enumerate(arr):
            self.ensure_valid(p, index=i)
        return arr

    def _check_pair(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != self.point_shape or b.shape != self.point_shape:
            raise SpaceError(
                f"dimension mismatch: {a.shape} vs {b.shape} (space expects {self.point_shape})"
            )
        return a, b

    def _check_weights(self, w, anchors):
        w = validate_weights(w)
        anchors = np.asarray(anchors, dtype=float)
        if anchors.shape[0] != w.size:
            raise SpaceError(f"{w.size} weights for {anchors.shape[0]} anchors")
        return w, anchors

    # -- metric -----------------------------------------------------------
    def distance(self, a, b) -> float:
        a, b = self._check_pair(a, b)
        return float(np.sqrt(self.batch_sqdist(a[None], b[None])[0]))

    def batch_sqdist(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def frechet_mean(self, w, anchors):
        w, anchors = self._check_weights(w, anchors)
        return self.batch_mean(w[None], self.prepare(anchors))[0]

    def loss_grad_w(self, w, anchors, target) -> np.ndarray:
        """Gradient of ``d^2(mu(w), target)`` with respect to ``w``."""
        w, anchors = self._check_weights(w, anchors)
        target = np.asarray(target, dtype=float)
        if target.shape != self.point_shape:
            raise SpaceError(f"target shape {target.shape} does not match {self.point_shape}")
        _, grad = self.batch_loss_grad(w[None], self.prepare(anchors), self.prepare(target[None]))
        return grad[0]

    # -- batched machinery used by training --------------------------------
    def prepare(self, points):
        """Convert stacked points (anchors or targets) to the working
        representation the batched routines consume."""
        raise NotImplementedError

    def batch_mean(self, W, prepared) -> np.ndarray:
        raise NotImplementedError

    def batch_loss_grad(self, W, prepared, targets):
        """Return ``(losses (b,), grads (b, m))`` for a weight batch ``W``.

        ``prepared`` and ``targets`` both come from ``prepare``.
        """
        raise NotImplementedError

    def weighted_average(self, w, anchors):
        """Minimizer of ``sum_i w_i d^2(y, Y_i)`` for real weights with positive
        sum (negative entries allowed), repaired back onto the space."""
        raise NotImplementedError

    # -- serialization ----------------------------------------------------
    def header(self) -> dict:
        raise NotImplementedError

    def to_row(self, point) -> np.ndarray:
        raise NotImplementedError

    def from_row(self, row):
        raise NotImplementedError


class FlatSpace(MetricSpace):
    """Space isometric to a convex subset of Euclidean space up to a scale.

    ``d^2(a, b) = scale * ||embed(a) - embed(b)||^2``; weighted Frechet means
    are convex combinations in the embedded coordinates.
    """

    scale = 1.0

    def embed(self, points) -> np.ndarray:
        """``(k, *point_shape) -> (k, D)`` flat coordinates."""
        raise NotImplementedError

    def unembed(self, coords) -> np.ndarray:
        raise NotImplementedError

    def project(self, coords) -> np.ndarray:
        """Map arbitrary flat coordinates back to valid ones (identity by default)."""
        return coords

    def batch_sqdist(self, a, b):
        diff = self.embed(a) - self.embed(b)
        return self.scale * np.einsum("kd,kd->k", diff, diff)

    def prepare(self, points):
        return self.embed(np.asarray(points, dtype=float))

    def batch_mean(self, W, prepared):
        return self.unembed(W @ prepared)

    def batch_loss_grad(self, W, prepared, targets):
        resid = W @ prepared - targets
        losses = self.scale * np.einsum("bd,bd->b", resid, resid)
        grads = (2.0 * self.scale) * (resid @ prepared.T)
        return losses, grads

    def weighted_average(self, w, anchors):
        w = np.asarray(w, dtype=float)
        total = w.sum()
        coords = (w / total) @ self.embed(np.asarray(anchors, dtype=float))
        repaired = self.project(coords[None])
        if not np.array_equal(repaired, coords[None]):
            log.debug("%s: projected infeasible weighted average", self.space_id.value)
        return self.unembed(repaired)[0]
