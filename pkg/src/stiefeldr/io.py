"""CSV ingestion and result emission for the command-line tools.

Every number written by this module goes through :func:`fmt` (15
significant digits), and nothing time-dependent is written to result
files, so identical inputs give byte-identical outputs.
"""

import csv
import json
import math
import os
from typing import List, NamedTuple, Optional

import numpy as np

from .exceptions import DataValidationError, ParseError

DIGITS = 15


def fmt(x):
    """``x`` with 15 significant digits."""
    return format(float(x), f".{DIGITS}g")


def _rounded(x):
    return float(fmt(x))


def _parse_float(text, path, line, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, f"non-numeric value {text!r}", line, column) from None
    if not math.isfinite(value):
        raise ParseError(path, f"non-finite value {text!r}", line, column)
    return value


def read_table(path):
    """Read a headed numeric CSV into ``(names, array)``.

    Raises :class:`ParseError` naming the line and column of the first bad
    cell; NaN and infinite cells are rejected.
    """
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise ParseError(path, "file is empty")
    names = [c.strip() for c in rows[0]]
    if len(set(names)) != len(names):
        raise ParseError(path, "duplicate column names in header", 1)
    data = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != len(names):
            raise ParseError(path, f"expected {len(names)} fields, found {len(row)}", line)
        for j, cell in enumerate(row):
            data[i, j] = _parse_float(cell.strip(), path, line, names[j])
    if data.shape[0] == 0:
        raise ParseError(path, "no data rows")
    return names, data


class Dataset(NamedTuple):
    X: np.ndarray
    y: np.ndarray
    censor: Optional[np.ndarray]
    feature_names: List[str]
    outcome_name: str


def ingest_csv(path, outcome, censor=None, features=None):
    """Split a headed CSV into covariates and outcome columns.

    Parameters
    ----------
    path : str or path-like
    outcome : str
        Column holding the outcome (the observed time for survival data).
    censor : str, optional
        Column holding failure indicators; its presence makes a survival dataset.
    features : list of str, optional
        Covariate columns; all remaining columns by default.
    """
    names, data = read_table(path)
    needed = [outcome] + ([censor] if censor is not None else [])
    missing = [c for c in needed + list(features or []) if c not in names]
    if missing:
        raise DataValidationError(f"{os.fspath(path)}: missing column(s) {', '.join(missing)}")
    if features is None:
        features = [c for c in names if c not in needed]
    if not features:
        raise DataValidationError(f"{os.fspath(path)}: no covariate columns")
    col = {c: j for j, c in enumerate(names)}
    X = data[:, [col[c] for c in features]]
    y = data[:, col[outcome]]
    delta = data[:, col[censor]] if censor is not None else None
    return Dataset(X, y, delta, list(features), outcome)


def read_matrix(path):
    """Read a matrix CSV, tolerating a header row and a label column.

    Returns ``(array, row_labels)``; ``row_labels`` is None when the first
    column is numeric.
    """
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise ParseError(path, "file is empty")

    def numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    start = 0 if all(numeric(c) for c in rows[0]) else 1
    body = rows[start:]
    if not body:
        raise ParseError(path, "no data rows")
    labelled = not numeric(body[0][0])
    labels = [r[0].strip() for r in body] if labelled else None
    width = len(body[0])
    out = np.empty((len(body), width - labelled))
    for i, row in enumerate(body):
        if len(row) != width:
            raise ParseError(path, f"expected {width} fields, found {len(row)}", start + i + 1)
        for j, cell in enumerate(row[labelled:]):
            out[i, j] = _parse_float(cell.strip(), path, start + i + 1, j + 1 + labelled)
    return out, labels


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])


def _basis_rows(B, labels):
    return [[labels[i]] + list(B[i]) for i in range(B.shape[0])]


def emit_results(out_dir, result, feature_names=None, projection=None, outcome=None,
                 metadata=None, formats=("json", "csv", "text")):
    """Write a fit to ``out_dir``.

    Files: ``B.csv`` (row-labeled basis), ``trace.csv`` (iteration, fval),
    ``result.json`` (everything but timing), ``B.txt`` (aligned text) and,
    when ``projection`` is given, ``projection.csv`` with the projected
    covariates followed by the outcome columns.

    Parameters
    ----------
    result : FitResult
    feature_names : list of str, optional
        Row labels for ``B``; ``x1, x2, ...`` by default.
    projection : ndarray of shape (n, ndr), optional
    outcome : dict of name -> ndarray, optional
        Columns appended to the projection file.
    metadata : dict, optional
        Extra JSON-serializable entries for ``result.json``.

    Returns
    -------
    list of str
        Paths written, in a fixed order.
    """
    os.makedirs(out_dir, exist_ok=True)
    B = np.asarray(result.B)
    p, d = B.shape
    labels = list(feature_names) if feature_names is not None else [f"x{i + 1}" for i in range(p)]
    dirs = [f"dir{k + 1}" for k in range(d)]
    written = []

    if "csv" in formats:
        path = os.path.join(out_dir, "B.csv")
        write_csv(path, ["feature"] + dirs, _basis_rows(B, labels))
        written.append(path)
        path = os.path.join(out_dir, "trace.csv")
        write_csv(path, ["iteration", "fval"], [[str(k), v] for k, v in enumerate(result.fval_trace)])
        written.append(path)
        if projection is not None:
            outcome = outcome or {}
            path = os.path.join(out_dir, "projection.csv")
            cols = [np.asarray(projection)] + [np.asarray(v, dtype=float)[:, None] for v in outcome.values()]
            write_csv(path, dirs + list(outcome), np.hstack(cols).tolist())
            written.append(path)

    if "json" in formats:
        doc = {
            "B": [[_rounded(v) for v in row] for row in B],
            "features": labels,
            "fval": _rounded(result.fval),
            "iterations": int(result.iterations),
            "converged": bool(result.converged),
            "reason": result.reason,
            "n_fevals": int(result.n_fevals),
            "fval_trace": [_rounded(v) for v in result.fval_trace],
        }
        doc.update(_jsonable(metadata or {}))
        path = os.path.join(out_dir, "result.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        written.append(path)

    if "text" in formats:
        width = max(len(s) for s in labels)
        lines = [" " * width + "".join(f"{h:>24}" for h in dirs)]
        lines += [f"{labels[i]:<{width}}" + "".join(f"{fmt(v):>24}" for v in B[i]) for i in range(p)]
        lines.append(f"fval {fmt(result.fval)}  iterations {result.iterations}  reason {result.reason}")
        path = os.path.join(out_dir, "B.txt")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        written.append(path)
    return written


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _rounded(obj)
    return obj
