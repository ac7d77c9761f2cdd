"""File formats: headerless numeric CSV matrices and JSON coefficient files.

Every write goes through a temporary file in the target directory followed by
``os.replace``, so readers never see a half-written file.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .model import Dataset, DimensionError, ModelDims, ThetaParams, pair_index

__all__ = [
    "ParseError",
    "atomic_write",
    "format_float",
    "write_matrix",
    "read_matrix",
    "write_dataset",
    "read_dataset",
    "theta_to_json",
    "theta_from_json",
    "validate_theta_json",
    "write_theta",
    "read_theta",
    "write_graph",
    "read_graph",
    "write_table",
]


class ParseError(ValueError):
    """Malformed input file; the message names the file and location."""


def atomic_write(path, text: str) -> None:
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


def format_float(x) -> str:
    """Shortest decimal string that round-trips to the same double."""
    x = float(x)
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def write_table(path, rows, header=None, delimiter: str = ",") -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write(path, buf.getvalue())


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    atomic_write(path, "".join(",".join(format_float(v) for v in row) + "\n" for row in M))


def read_matrix(path, n_cols: int | None = None) -> np.ndarray:
    path = Path(path)
    rows = []
    width = n_cols
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                rows.append([])
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            if len(fields) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} columns, found {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                col = next(i for i, f in enumerate(fields, 1) if not _is_float(f))
                raise ParseError(
                    f"{path}:{lineno}: column {col}: cannot parse {fields[col - 1]!r} as a number"
                ) from None
    if width is None:
        raise ParseError(f"{path}: file is empty")
    if any(len(r) != width for r in rows):
        # blank lines only allowed for zero-width matrices
        raise ParseError(f"{path}: blank line inside matrix")
    return np.array(rows, dtype=float).reshape(len(rows), width)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_dataset(directory, data: Dataset, prefix: str = "") -> None:
    directory = Path(directory)
    if data.p:
        write_matrix(directory / f"{prefix}X.csv", data.X)
    else:
        # zero covariates: one empty line per row keeps the row count
        atomic_write(directory / f"{prefix}X.csv", "\n" * data.n)
    write_matrix(directory / f"{prefix}Y.csv", data.Y)


def read_dataset(directory, prefix: str = "") -> Dataset:
    directory = Path(directory)
    xpath, ypath = directory / f"{prefix}X.csv", directory / f"{prefix}Y.csv"
    for path in (xpath, ypath):
        if not path.exists():
            raise ParseError(f"{path}: file not found")
    Y = read_matrix(ypath)
    bad = np.argwhere((Y != 0) & (Y != 1))
    if bad.size:
        r, c = bad[0]
        raise ParseError(f"{ypath}:{r + 1}: column {c + 1}: response must be 0 or 1, got {Y[r, c]!r}")
    X = _read_covariates(xpath, Y.shape[0])
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"{xpath} has {X.shape[0]} rows but {ypath} has {Y.shape[0]}")
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        r, c = bad[0]
        raise ParseError(f"{xpath}:{r + 1}: column {c + 1}: non-finite covariate")
    return Dataset(X, Y)


def _read_covariates(path, n_rows: int) -> np.ndarray:
    text = Path(path).read_text()
    if text.strip() == "":
        return np.zeros((text.count("\n") or n_rows, 0))
    return read_matrix(path)


def theta_to_json(theta: ThetaParams) -> dict:
    rows, cols = np.triu_indices(theta.q)
    entries = [
        {"j": int(j), "k": int(k), "l": int(l), "value": float(theta.coef[r, l])}
        for r, (j, k) in enumerate(zip(rows, cols))
        for l in range(theta.p + 1)
    ]
    return {"q": theta.q, "p": theta.p, "coefficients": entries}


def validate_theta_json(obj, source: str = "theta") -> None:
    """Check a coefficient document: ``j <= k`` only, every coordinate exactly once."""
    try:
        q, p = int(obj["q"]), int(obj["p"])
        entries = obj["coefficients"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: missing or invalid 'q', 'p' or 'coefficients' ({exc})") from None
    seen = set()
    for i, e in enumerate(entries):
        try:
            j, k, l, v = int(e["j"]), int(e["k"]), int(e["l"]), float(e["value"])
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"{source}: coefficient entry {i} is malformed") from None
        if j > k:
            raise ParseError(f"{source}: entry {i} has j={j} > k={k}; only j <= k is stored")
        if not (0 <= j < q and 0 <= k < q and 0 <= l <= p):
            raise ParseError(f"{source}: entry {i} index ({j}, {k}, {l}) out of range")
        if not np.isfinite(v):
            raise ParseError(f"{source}: entry {i} value is not finite")
        if (j, k, l) in seen:
            raise ParseError(f"{source}: duplicate entry for ({j}, {k}, {l})")
        seen.add((j, k, l))
    expected = (p + 1) * q * (q + 1) // 2
    if len(seen) != expected:
        raise ParseError(f"{source}: {len(seen)} coefficients listed, expected {expected}")


def theta_from_json(obj, source: str = "theta") -> ThetaParams:
    validate_theta_json(obj, source)
    q, p = int(obj["q"]), int(obj["p"])
    coef = np.zeros((q * (q + 1) // 2, p + 1))
    for e in obj["coefficients"]:
        coef[pair_index(int(e["j"]), int(e["k"]), q), int(e["l"])] = float(e["value"])
    return ThetaParams(ModelDims(q, p), coef)


def write_theta(path, theta: ThetaParams) -> None:
    atomic_write(path, json.dumps(theta_to_json(theta), indent=1) + "\n")


def read_theta(path) -> ThetaParams:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: column {exc.colno}: {exc.msg}") from None
    return theta_from_json(obj, str(path))


def write_graph(path, graph) -> None:
    write_table(path, sorted(graph.edges), header=["j", "k"], delimiter="\t")


def read_graph(path, q: int):
    from .simulate import GraphSpec

    edges = []
    with open(path) as fh:
        next(fh, None)
        for lineno, line in enumerate(fh, start=2):
            if line.strip():
                try:
                    a, b = (int(v) for v in line.split("\t"))
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: expected two integer node indices") from None
                edges.append((a, b))
    return GraphSpec(q, frozenset(edges))
