"""CSV and JSON files used by the command line.

Space-valued data live in a CSV with one observation per row plus a sidecar
JSON header next to it (``Y.csv`` pairs with ``Y.json``) naming the space and
its dimensions. Distributions may also be supplied as raw samples: a header
with ``"format": "samples"`` makes every row a sample that is converted to a
quantile vector on ingest. Networks may be supplied as directed flows: with
``"format": "directed"`` every row holds the ``V * V`` counts of a flow matrix
(row-major), symmetrized on ingest by averaging ``(i, j)`` and ``(j, i)``.

Floats are written with ``repr`` so files round-trip bit for bit.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from .spaces import MetricSpace, NetworkSpace, SpaceError, Wasserstein1D, space_from_header
from .spaces.network import symmetrize_flows


class DataError(ValueError):
    pass


def sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def _fmt(v):
    return repr(float(v))


def write_rows(path, rows, names=None):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if names is not None:
            writer.writerow(names)
        for row in rows:
            writer.writerow([_fmt(v) for v in np.ravel(row)])
    return path


def read_rows(path):
    """Numeric rows of a CSV; a non-numeric first line is treated as a header.

    Returns ``(rows, names)`` where ``rows`` is a list of float arrays (rows
    may differ in length, as raw-sample files do).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    rows, names = [], None
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = np.array([float(c) for c in rec if c.strip() != ""])
            except ValueError:
                if lineno == 1:
                    names = [c.strip() for c in rec]
                    continue
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if not np.all(np.isfinite(vals)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows, names


def read_matrix(path):
    rows, _ = read_rows(path)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: rows have differing lengths {sorted(widths)}")
    return np.vstack(rows)


def write_matrix(path, X, prefix="x"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return write_rows(path, X, [f"{prefix}{j + 1}" for j in range(X.shape[1])])


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n")
    return path


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def read_header(path):
    side = sidecar(path)
    if not side.exists():
        raise DataError(f"{path}: missing sidecar header {side.name}")
    header = read_json(side)
    if "space" not in header:
        raise DataError(f"{side}: header lacks a 'space' field")
    return header


def write_points(path, points, space: MetricSpace, extra=None):
    """Write space points as CSV rows plus the sidecar header."""
    write_rows(path, [space.to_row(p) for p in points])
    write_json(sidecar(path), {**space.header(), **(extra or {})})
    return Path(path)


def read_points(path, space: MetricSpace | None = None):
    """Read space points; returns ``(space, points)``.

    The sidecar header decides the space unless ``space`` is given, in which
    case the header (when present) must agree with it.
    """
    header = read_header(path) if space is None or sidecar(path).exists() else None
    if header is not None:
        try:
            from_file = space_from_header(header)
        except (KeyError, ValueError) as exc:
            raise DataError(f"{sidecar(path)}: bad header ({exc})") from None
        if space is not None and space.header() != from_file.header():
            raise DataError(f"{path}: header {from_file.header()} does not match {space.header()}")
        space = space or from_file
    rows, _ = read_rows(path)
    if header is not None and header.get("format") == "samples":
        if not isinstance(space, Wasserstein1D):
            raise DataError("raw-sample format is only defined for distributions")
        points = np.stack([space.from_samples(r) for r in rows])
    elif header is not None and header.get("format") == "directed":
        if not isinstance(space, NetworkSpace):
            raise DataError("directed-flow format is only defined for networks")
        V = space.V
        try:
            points = space.as_points([space.from_row(symmetrize_flows(np.reshape(r, (V, V)))) for r in rows])
        except (SpaceError, ValueError) as exc:
            raise DataError(f"{path}: {exc}") from None
    else:
        try:
            points = space.as_points([space.from_row(r) for r in rows])
        except (SpaceError, ValueError) as exc:
            raise DataError(f"{path}: {exc}") from None
    for i, p in enumerate(points):
        errs = space.validate(p)
        if errs:
            raise DataError(f"{path}: row {i + 1} is not a valid {space.space_id.value} point: {errs[0]}")
    return space, points


def write_samples(path, raw, M=100):
    """Raw-sample distribution file; each row holds one unit's sample."""
    write_rows(path, raw)
    write_json(sidecar(path), {"space": "wasserstein1d", "M": M, "format": "samples"})
    return Path(path)


def environment():
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def write_manifest(outdir, command, config, seeds, outputs):
    """``manifest.json`` recording the resolved configuration and seeds."""
    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "outputs": sorted(str(o) for o in outputs),
        "artifact_version": __version__,
        "environment": environment(),
    }
    return write_json(Path(outdir) / "manifest.json", manifest)


def remove_quietly(paths):
    for p in paths:
        try:
            os.remove(p)
        except OSError:
            pass
