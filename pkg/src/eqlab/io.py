"""CSV/JSON serialization with atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import DiscreteMeasure, GridError, GridSpec


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def measure_csv(m: DiscreteMeasure) -> str:
    d = m.grid.dim
    header = [f"i{a}" for a in range(d)] + [f"x{a}" for a in range(d)] + ["w"]
    idx = np.argwhere(m.weights > 0)
    rows = []
    for ix in idx:
        c = m.grid.center_of(ix)
        rows.append(list(ix) + list(c) + [m.weights[tuple(ix)]])
    return _rows_to_csv(header, rows)


def write_measure_csv(path, m: DiscreteMeasure) -> Path:
    return atomic_write_text(path, measure_csv(m))


def read_measure_csv(path, grid: GridSpec, check_mass: bool = True) -> DiscreteMeasure:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = grid.dim
        expected = [f"i{a}" for a in range(d)] + [f"x{a}" for a in range(d)] + ["w"]
        if header != expected:
            raise GridError(f"measure CSV header {header} does not match dim {d}")
        w = np.zeros(grid.shape)
        for row in reader:
            if not row:
                continue
            ix = tuple(int(v) for v in row[:d])
            x = np.array([float(v) for v in row[d:2 * d]])
            if not np.allclose(x, grid.center_of(ix), rtol=0, atol=1e-9 * max(1.0, grid.spacing)):
                raise GridError("measure CSV coordinates do not match the grid")
            w[ix] = float(row[2 * d])
    return DiscreteMeasure(grid, w, check_mass=check_mass)


def write_potential_csv(path, grid: GridSpec, values: np.ndarray) -> Path:
    d = grid.dim
    header = [f"i{a}" for a in range(d)] + [f"x{a}" for a in range(d)] + ["V"]
    c = grid.centers().reshape(-1, d)
    idx = np.stack(np.unravel_index(np.arange(grid.size), grid.shape), axis=-1)
    v = np.asarray(values).reshape(-1)
    rows = [list(i) + list(x) + [val] for i, x, val in zip(idx, c, v)]
    return atomic_write_text(path, _rows_to_csv(header, rows))


def read_potential_csv(path, grid: GridSpec) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = grid.dim
    out = np.full(grid.shape, np.nan)
    for row in data:
        out[tuple(int(v) for v in row[:d])] = row[-1]
    if np.isnan(out).any():
        raise GridError("potential CSV does not cover the grid")
    return out


def write_trace_csv(path, trace) -> Path:
    return atomic_write_text(path, _rows_to_csv(["iteration", "objective", "gap", "step"], trace.rows()))


def write_table_csv(path, header, rows) -> Path:
    return atomic_write_text(path, _rows_to_csv(header, rows))


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
        return v if math.isfinite(v) else str(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps(obj))
