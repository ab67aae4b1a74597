"""File formats: dataset CSV, model JSON, report JSON, generic CSV tables.

Numeric CSV output uses repr of the Python float, the shortest string
that parses back to the identical value, so files round-trip bit-exactly.
Model JSON is canonical (sorted keys, fixed indentation), so
save -> load -> save is byte-identical.
"""

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .core import PAIR_ORDER_VERSION, Dataset, InteractionScheme, ModelParams
from .errors import DataError
from .predictors import BaselineHazard

MODEL_FORMAT_VERSION = "1.0"


def fmt_num(v):
    """Shortest exact decimal form of a number for CSV output."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if np.isnan(f):
        return "nan"
    return repr(f)


def write_csv(path, header, rows):
    """Rows of numbers/strings with full numeric precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt_num(v) for v in row])


def read_csv(path):
    """(header, string rows); empty cells are an error at parse time."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    return rows[0], rows[1:]


def _parse_column(rows, col, name, path):
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        cell = row[col].strip() if col < len(row) else ""
        if cell == "":
            raise DataError(
                f"{path}: missing value in column {name!r}, row {i + 2}")
        try:
            out[i] = float(cell)
        except ValueError as exc:
            raise DataError(
                f"{path}: non-numeric value {cell!r} in column {name!r}, "
                f"row {i + 2}") from exc
    return out


def load_dataset_csv(path, task, target="y", time_col="time",
                     event_col="event", features=None):
    """Dataset from a headered CSV; features default to every non-target
    column in file order. Missing values are rejected, not imputed."""
    header, rows = read_csv(path)
    col_of = {name: i for i, name in enumerate(header)}
    target_cols = {time_col, event_col} if task == "survival" else {target}
    for name in target_cols:
        if name not in col_of:
            raise DataError(f"{path}: missing required column {name!r}")
    if features is None:
        features = [h for h in header if h not in target_cols]
    else:
        missing = [f for f in features if f not in col_of]
        if missing:
            raise DataError(f"{path}: missing feature columns {missing}")
    X = np.column_stack([_parse_column(rows, col_of[f], f, path)
                         for f in features]) if features else np.empty((len(rows), 0))
    try:
        if task == "survival":
            return Dataset(X, features, task,
                           time=_parse_column(rows, col_of[time_col], time_col, path),
                           event=_parse_column(rows, col_of[event_col], event_col, path))
        return Dataset(X, features, task,
                       y=_parse_column(rows, col_of[target], target, path))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def load_features_csv(path, feature_names):
    """Feature matrix only, columns located by name (extra columns are
    ignored, order in the file does not matter)."""
    header, rows = read_csv(path)
    col_of = {name: i for i, name in enumerate(header)}
    missing = [f for f in feature_names if f not in col_of]
    if missing:
        raise DataError(f"{path}: missing feature columns {missing}")
    return np.column_stack([_parse_column(rows, col_of[f], f, path)
                            for f in feature_names])


def write_dataset_csv(dataset, path, target="y", time_col="time",
                      event_col="event"):
    if dataset.task == "survival":
        header = list(dataset.feature_names) + [time_col, event_col]
        extras = np.column_stack([dataset.time, dataset.event])
    else:
        header = list(dataset.feature_names) + [target]
        extras = dataset.y[:, None]
    rows = [list(x) + list(extra) for x, extra in zip(dataset.X, extras)]
    write_csv(path, header, rows)


def canonical_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def config_hash(obj):
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc


@dataclass
class SavedModel:
    """Everything needed to reproduce predictions from disk."""

    params: ModelParams
    scheme: InteractionScheme
    feature_names: tuple
    task: str
    mode: str
    standardization: dict = None   # {"mean": [...], "scale": [...]}
    baseline: BaselineHazard = None
    time_grid: list = None
    provenance: dict = None


def _arr(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def save_model(model, path):
    p = model.params
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "pair_order_version": PAIR_ORDER_VERSION,
        "task": model.task,
        "mode": model.mode,
        "feature_names": list(model.feature_names),
        "mask": [int(v) for v in model.scheme.mask],
        "params": {
            "beta0": float(p.beta0),
            "beta": _arr(p.beta),
            "theta_flat": _arr(p.theta_flat),
            "Z": None if p.Z is None else [list(map(float, row)) for row in p.Z],
            "alpha0": None if p.alpha0 is None else float(p.alpha0),
            "lvm_kind": p.lvm_kind,
        },
        "standardization": model.standardization,
        "baseline_hazard": None if model.baseline is None else {
            "times": _arr(model.baseline.times),
            "cum_hazard": _arr(model.baseline.cum_hazard),
        },
        "time_grid": model.time_grid,
        "provenance": model.provenance or {},
    }
    with open(path, "w") as fh:
        fh.write(canonical_json(doc))


def load_model(path):
    doc = load_json(path)
    version = str(doc.get("format_version", ""))
    if version.split(".")[0] != MODEL_FORMAT_VERSION.split(".")[0]:
        raise DataError(
            f"{path}: model format {version!r} is incompatible with "
            f"{MODEL_FORMAT_VERSION!r}; refusing to reinterpret")
    if doc.get("pair_order_version") != PAIR_ORDER_VERSION:
        raise DataError(
            f"{path}: pair ordering {doc.get('pair_order_version')!r} does "
            f"not match {PAIR_ORDER_VERSION!r}")
    names = tuple(doc["feature_names"])
    scheme = InteractionScheme(len(names), np.asarray(doc["mask"], dtype=bool))
    pd = doc["params"]
    params = ModelParams(
        pd["beta0"], np.asarray(pd["beta"], dtype=float),
        np.asarray(pd["theta_flat"], dtype=float),
        None if pd["Z"] is None else np.asarray(pd["Z"], dtype=float),
        pd["alpha0"], pd["lvm_kind"])
    baseline = None
    if doc.get("baseline_hazard") is not None:
        bh = doc["baseline_hazard"]
        baseline = BaselineHazard(np.asarray(bh["times"]),
                                  np.asarray(bh["cum_hazard"]))
    return SavedModel(params, scheme, names, doc["task"], doc.get("mode", ""),
                      doc.get("standardization"), baseline,
                      doc.get("time_grid"), doc.get("provenance", {}))
