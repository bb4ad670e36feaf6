"""File formats: CSV tables and JSON documents with 17-digit floats."""

import csv
import json
import math

import numpy as np

from .dynamics import Dataset

__all__ = ["fmt", "dumps_json", "write_csv", "read_csv", "write_dataset", "read_dataset"]


def fmt(v):
    """Format a scalar with 17 significant digits (exact float round trip)."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def _to_json(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_to_json(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_to_json(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _to_json(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            # JSON has no inf/nan; these only appear in diagnostics
            return "null"
        return format(v, ".17g")
    return json.dumps(obj)


def dumps_json(obj, indent=1):
    """Deterministic JSON text with floats written to 17 significant digits."""
    return _to_json(obj, indent, 0) + "\n"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_csv(path):
    """Return ``(header, float array)`` for a numeric CSV table."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


def dataset_header(n_x, n_u):
    return (["t", "traj_id"] + [f"x_{i}" for i in range(n_x)]
            + [f"dx_{i}" for i in range(n_x)] + [f"u_{i}" for i in range(n_u)])


def write_dataset(ds, csv_path, meta_path=None):
    """Write the samples CSV and its JSON sidecar (``<stem>.meta.json``)."""
    csv_path = str(csv_path)
    if meta_path is None:
        meta_path = csv_path[:-4] + ".meta.json" if csv_path.endswith(".csv") else csv_path + ".meta.json"
    rows = (
        [t, int(i), *x, *dx, *u]
        for t, i, x, dx, u in zip(ds.times, ds.traj_id, ds.X, ds.Xdot, ds.U)
    )
    write_csv(csv_path, dataset_header(ds.n_x, ds.n_u), rows)
    meta = {
        "plant": ds.plant_name,
        "seed": ds.seed,
        "dt": ds.dt,
        "bounds": {"state": ds.state_bounds.tolist(), "input": ds.input_bounds.tolist()},
        "source": ds.source,
    }
    with open(meta_path, "w") as fh:
        fh.write(dumps_json(meta))
    return csv_path, meta_path


def read_dataset(csv_path, meta_path=None):
    csv_path = str(csv_path)
    if meta_path is None:
        meta_path = csv_path[:-4] + ".meta.json" if csv_path.endswith(".csv") else csv_path + ".meta.json"
    header, data = read_csv(csv_path)
    n_x = sum(h.startswith("x_") for h in header)
    n_u = sum(h.startswith("u_") for h in header)
    if header != dataset_header(n_x, n_u):
        raise ValueError(f"{csv_path}: unexpected dataset header {header}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    source = dict(meta.get("source") or {})
    source.setdefault("plant", meta.get("plant"))
    ds = Dataset.from_arrays(
        data[:, 2:2 + n_x], data[:, 2 + n_x:2 + 2 * n_x], data[:, 2 + 2 * n_x:],
        times=data[:, 0], traj_id=data[:, 1].astype(int),
        seed=meta.get("seed", 0), dt=meta.get("dt", 0.0), source=source,
    )
    return ds
