"""On-disk formats: versioned CSV tables and JSON documents.

Every CSV starts with a single row ``#schema,<name>,<version>``. Readers
reject unknown names or versions. Floats are written with ``repr`` so
that files round-trip exactly and repeated runs are byte-identical.

Matrices in JSON are flattened row-major; complex matrices interleave
real and imaginary parts (``re00, im00, re01, im01, ...``).
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .design import Design
from .errors import ArgumentError, ShapeError, ValidationError
from .hermitian import Field
from .measurement import CountsTable

CSV_VERSIONS = {"runs": 1, "aggregate": 1, "histogram": 1, "counts": 1, "timing": 1}
DESIGN_SCHEMA = "qstkit.design/1"
ESTIMATE_SCHEMA = "qstkit.estimate/1"


class SchemaError(ValidationError):
    pass


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, schema: str, header, rows) -> Path:
    if schema not in CSV_VERSIONS:
        raise SchemaError(f"unknown table schema {schema!r}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["#schema", schema, CSV_VERSIONS[schema]])
        w.writerow(header)
        for row in rows:
            values = [row[h] for h in header] if isinstance(row, dict) else row
            w.writerow([_cell(v) for v in values])
    return path


def read_csv(path, schema: str | None = None):
    """Return ``(schema, header, rows)`` with rows as dicts of strings."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        first = next(r, None)
        if not first or first[0] != "#schema" or len(first) != 3:
            raise SchemaError(f"{path}: missing schema row")
        name, version = first[1], first[2]
        if name not in CSV_VERSIONS or str(CSV_VERSIONS[name]) != version:
            raise SchemaError(f"{path}: unsupported schema {name!r} version {version!r}")
        if schema is not None and name != schema:
            raise SchemaError(f"{path}: expected a {schema!r} table, found {name!r}")
        header = next(r)
        rows = [dict(zip(header, row)) for row in r]
    return name, header, rows


def flatten_matrix(M, field) -> list[float]:
    M = np.asarray(M)
    if Field.coerce(field) is Field.REAL:
        return [float(x) for x in np.real(M).ravel()]
    return [float(x) for x in np.stack([M.real, M.imag], axis=-1).ravel()]


def unflatten_matrix(values, q: int, field) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if Field.coerce(field) is Field.REAL:
        if v.size != q * q:
            raise ShapeError(f"expected {q * q} entries, got {v.size}")
        return v.reshape(q, q)
    if v.size != 2 * q * q:
        raise ShapeError(f"expected {2 * q * q} interleaved entries, got {v.size}")
    v = v.reshape(q, q, 2)
    return v[..., 0] + 1j * v[..., 1]


def design_to_json(d: Design) -> dict:
    return {
        "schema": DESIGN_SCHEMA,
        "q": d.q,
        "field": d.field.value,
        "n": d.n,
        "observables": [{"matrix": flatten_matrix(M, d.field)} for M in d.matrices()],
    }


def design_from_json(doc: dict) -> Design:
    if doc.get("schema") != DESIGN_SCHEMA:
        raise SchemaError(f"unsupported design schema {doc.get('schema')!r}")
    try:
        q, field = int(doc["q"]), Field.coerce(doc["field"])
        mats = [unflatten_matrix(o["matrix"], q, field) for o in doc["observables"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed design document: {exc}") from None
    return Design.from_matrices(mats, field)


def save_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path}: invalid JSON ({exc})") from None


def counts_rows(d: Design, counts: CountsTable):
    rows = []
    for i, o in enumerate(d.observables):
        for k, lam in enumerate(o.eigenvalues):
            value = counts.counts[i][k] if counts.counts is not None else counts.frequencies[i][k]
            rows.append([i, k, float(lam), value])
    return rows


def write_counts(path, d: Design, counts: CountsTable) -> Path:
    col = "count" if counts.counts is not None else "frequency"
    return write_csv(path, "counts", ["observable", "outcome", "eigenvalue", col], counts_rows(d, counts))


def read_counts(path, d: Design | None = None) -> CountsTable:
    _, header, rows = read_csv(path, "counts")
    exact = "frequency" in header
    col = "frequency" if exact else "count"
    if col not in header:
        raise SchemaError(f"{path}: counts table needs a 'count' or 'frequency' column")
    by_obs: dict[int, dict[int, float]] = {}
    for row in rows:
        by_obs.setdefault(int(row["observable"]), {})[int(row["outcome"])] = float(row[col])
    n = max(by_obs) + 1 if by_obs else 0
    if sorted(by_obs) != list(range(n)):
        raise ShapeError(f"{path}: observable indices are not contiguous")
    table = [[by_obs[i][k] for k in sorted(by_obs[i])] for i in range(n)]
    if d is not None:
        if n != d.n or any(len(t) != s for t, s in zip(table, d.sizes)):
            raise ShapeError(f"{path}: counts do not match the design layout")
    if exact:
        return CountsTable.from_probabilities(table)
    if any(not float(x).is_integer() for t in table for x in t):
        raise ShapeError(f"{path}: counts must be integers")
    return CountsTable.from_counts([[int(x) for x in t] for t in table])


def estimate_to_json(estimator: str, rho, field, **diagnostics) -> dict:
    rho = np.asarray(rho)
    doc = {
        "schema": ESTIMATE_SCHEMA,
        "estimator": estimator,
        "q": int(rho.shape[0]),
        "field": Field.coerce(field).value,
        "rho_hat": flatten_matrix(rho, field),
        "trace": float(np.real(np.trace(rho))),
        "min_eigenvalue": float(np.linalg.eigvalsh(rho)[0]),
    }
    for key, val in diagnostics.items():
        if isinstance(val, (np.floating, float)):
            val = float(val)
            if not math.isfinite(val):
                val = None
        elif isinstance(val, np.integer):
            val = int(val)
        elif isinstance(val, np.ndarray):
            val = flatten_matrix(val, field)
        doc[key] = val
    return doc
