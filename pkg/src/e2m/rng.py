"""Named random substreams derived from one master seed."""

import zlib

import numpy as np

STREAMS = ("dgp", "init", "dropout", "shuffle", "anchors", "split", "oracle", "folds", "test")


def substream(seed, name, *extra) -> np.random.Generator:
    """Independent generator for ``(seed, name, *extra)``; stable across runs
    and platforms because the name is hashed with CRC32."""
    key = [int(seed), zlib.crc32(name.encode())] + [int(e) for e in extra]
    return np.random.default_rng(key)


def child_seed(seed, name, *extra) -> int:
    return int(substream(seed, name, *extra).integers(0, 2**31 - 1))
