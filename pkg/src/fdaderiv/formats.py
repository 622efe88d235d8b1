"""Plain-text file formats: wide dataset CSV, estimate CSV, tables and JSON.

Floats are written with ``repr`` so every file round-trips exactly and two
runs that compute the same numbers produce byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .design import DesignGrid
from .estimator import DerivativeEstimate, FunctionalDataset
from .exceptions import DataFormatError

__all__ = [
    "fmt",
    "dataset_to_csv",
    "dataset_from_csv",
    "read_dataset",
    "write_dataset",
    "estimate_to_csv",
    "sweep_to_csv",
    "rate_rows_to_csv",
    "dump_json",
    "write_text",
]

COORD_SEP = ":"


def fmt(v) -> str:
    """Shortest round-tripping text for a float (``nan``/``inf`` spelled out)."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _write(rows, header=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_text(path, text: str) -> None:
    # newline="" keeps "\n" on every platform
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- datasets

def dataset_to_csv(data: FunctionalDataset) -> str:
    """Wide format: header of flattened grid coordinates, then one row per curve.

    Multi-dimensional coordinates are joined with ``:`` (``"0.25:0.75"``);
    points are listed row-major over axes.
    """
    pts = data.grid.points()
    header = [COORD_SEP.join(fmt(c) for c in pt) for pt in pts]
    return _write(([fmt(v) for v in row] for row in data.values), header)


def _axes_from_points(pts: np.ndarray) -> tuple[np.ndarray, ...]:
    axes = tuple(np.unique(pts[:, k]) for k in range(pts.shape[1]))
    size = int(np.prod([a.size for a in axes]))
    if size != pts.shape[0]:
        raise DataFormatError(
            f"header coordinates do not form a Cartesian grid ({pts.shape[0]} points, "
            f"axes of sizes {[a.size for a in axes]})", row=1)
    mesh = np.meshgrid(*axes, indexing="ij")
    expected = np.stack([g.ravel() for g in mesh], axis=1)
    bad = np.flatnonzero(np.any(expected != pts, axis=1))
    if bad.size:
        raise DataFormatError("header coordinates are not in row-major grid order",
                              row=1, column=int(bad[0]) + 1)
    return axes


def dataset_from_csv(text: str) -> FunctionalDataset:
    """Parse the wide CSV format; errors carry the 1-based row and column."""
    rows = list(csv.reader(io.StringIO(text)))
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise DataFormatError("empty file", row=1)
    header = rows[0]
    coords = []
    for c, cell in enumerate(header, start=1):
        try:
            coords.append([float(v) for v in cell.split(COORD_SEP)])
        except ValueError:
            raise DataFormatError(f"bad coordinate {cell!r}", row=1, column=c) from None
    d = len(coords[0])
    for c, pt in enumerate(coords, start=1):
        if len(pt) != d:
            raise DataFormatError(f"coordinate has {len(pt)} components, expected {d}",
                                  row=1, column=c)
        if not all(math.isfinite(v) for v in pt):
            raise DataFormatError("non-finite coordinate", row=1, column=c)
    pts = np.asarray(coords, dtype=float)
    axes = _axes_from_points(pts)
    if len(rows) < 2:
        raise DataFormatError("no curves after the header", row=2)
    values = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataFormatError(f"{len(row)} fields, header has {len(header)}",
                                  row=r, column=min(len(row), len(header)) + 1)
        for c, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(f"not a number: {cell!r}", row=r, column=c) from None
            if not math.isfinite(v):
                raise DataFormatError(f"non-finite value {cell!r}", row=r, column=c)
            values[r - 2, c - 1] = v
    lo = min(0.0, float(pts.min()))
    hi = max(1.0, float(pts.max()))
    return FunctionalDataset(DesignGrid(axes, domain=(lo, hi)), values)


def read_dataset(path) -> FunctionalDataset:
    return dataset_from_csv(Path(path).read_text(encoding="utf-8"))


def write_dataset(path, data: FunctionalDataset) -> None:
    write_text(path, dataset_to_csv(data))


# ----------------------------------------------------------------- outputs

def estimate_to_csv(est: DerivativeEstimate) -> str:
    """Columns ``x`` (or ``x1..xd``), ``estimate``, ``degenerate`` (0/1)."""
    d = est.points.shape[1]
    names = ["x"] if d == 1 else [f"x{k + 1}" for k in range(d)]
    rows = ([fmt(c) for c in pt] + [fmt(v), str(int(f))]
            for pt, v, f in zip(est.points, est.values, est.flags))
    return _write(rows, names + ["estimate", "degenerate"])


def sweep_to_csv(results) -> str:
    """Tidy table ``p, n, h, component, value`` for one or more sweeps."""
    if hasattr(results, "rows"):
        results = [results]
    rows = ((str(p), str(n), fmt(h), comp, fmt(v))
            for res in results for p, n, h, comp, v in res.rows())
    return _write(rows, ["p", "n", "h", "component", "value"])


def rate_rows_to_csv(rows) -> str:
    """Columns ``kind, n, h, mean_sup, scaled``."""
    body = ((r.kind, str(r.n), fmt(r.h), fmt(r.mean_sup), fmt(r.scaled)) for r in rows)
    return _write(body, ["kind", "n", "h", "mean_sup", "scaled"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else fmt(v)
    return obj


def dump_json(obj) -> str:
    """Deterministic JSON (sorted keys, non-finite floats as strings)."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
