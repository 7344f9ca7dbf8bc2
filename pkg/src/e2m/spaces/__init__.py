"""Metric-space backends."""

from .base import FlatSpace, MetricSpace, SpaceError, SpaceId, validate_weights
from .network import NetworkSpace, frobenius_distance, laplacian_from_edges
from .spd import BuresWassersteinSpace, BwSolveConfig, SpdPowerSpace
from .wasserstein import (
    Wasserstein1D,
    gaussian_quantiles,
    prob_grid,
    quantile_from_samples,
    quantiles_from_histogram,
)


def make_space(space, **dims) -> MetricSpace:
    """Build a backend from a space tag and its dimension fields
    (``M`` for distributions, ``V`` for networks, ``l`` for SPD)."""
    sid = SpaceId.parse(space)
    if sid is SpaceId.WASSERSTEIN1D:
        return Wasserstein1D(int(dims.get("M", 100)))
    if sid is SpaceId.NETWORK:
        return NetworkSpace(int(dims["V"]), edge_cap=dims.get("edge_cap"))
    if sid is SpaceId.SPD_POWER:
        return SpdPowerSpace(int(dims["l"]), alpha=dims.get("alpha", 0.5))
    return BuresWassersteinSpace(int(dims["l"]))


def space_from_header(header: dict) -> MetricSpace:
    return make_space(header["space"], **{k: v for k, v in header.items() if k != "space"})


__all__ = [
    "BuresWassersteinSpace",
    "BwSolveConfig",
    "FlatSpace",
    "MetricSpace",
    "NetworkSpace",
    "SpaceError",
    "SpaceId",
    "SpdPowerSpace",
    "Wasserstein1D",
    "frobenius_distance",
    "gaussian_quantiles",
    "laplacian_from_edges",
    "make_space",
    "prob_grid",
    "quantile_from_samples",
    "quantiles_from_histogram",
    "space_from_header",
    "validate_weights",
]
