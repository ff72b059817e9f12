"""File formats: Matrix Market matrices, plain-text vectors, CSV traces, JSON documents."""
import io as _io
import json
import math
from pathlib import Path

import numpy as np
import scipy.io

from .linalg import as_matrix


class DataError(ValueError):
    """Malformed or unsupported input data."""


def _banner(path):
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        first = fh.readline().strip()
    parts = first.split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket" or parts[1].lower() != "matrix":
        raise DataError(f"{path}: not a Matrix Market matrix file (banner {first!r})")
    fmt, field, symmetry = (p.lower() for p in parts[2:])
    if fmt not in ("coordinate", "array"):
        raise DataError(f"{path}: unknown Matrix Market format {fmt!r}")
    if field not in ("real", "integer", "double"):
        raise DataError(f"{path}: unsupported field {field!r} (only real matrices)")
    if symmetry != "general":
        raise DataError(f"{path}: {symmetry} storage is not supported; expand to general storage first")
    return fmt


def read_matrix_market(path):
    """Read a real, general Matrix Market file (coordinate or array) as a dense array.

    Duplicate coordinate entries are summed.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    _banner(path)
    try:
        mat = scipy.io.mmread(str(path))
    except (ValueError, IndexError, OSError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    if hasattr(mat, "toarray"):
        mat = mat.toarray()
    try:
        return as_matrix(mat)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_matrix_market(path, a, comment=""):
    """Write a dense array in Matrix Market array format with round-trip precision."""
    a = np.asarray(a, dtype=np.float64)
    m, n = a.shape
    buf = _io.StringIO()
    buf.write("%%MatrixMarket matrix array real general\n")
    for line in comment.splitlines():
        buf.write(f"% {line}\n")
    buf.write(f"{m} {n}\n")
    for v in a.reshape(-1, order="F"):
        buf.write(fmt_float(v) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="ascii")


def read_vector(path):
    """Plain text, one value per line (blank lines and ``#`` comments ignored)."""
    vals = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: not a number: {line!r}") from exc
    v = np.array(vals)
    if not np.all(np.isfinite(v)):
        raise DataError(f"{path}: contains NaN or Inf")
    return v


def write_vector(path, v):
    Path(path).write_text("".join(fmt_float(x) + "\n" for x in np.asarray(v, dtype=np.float64)), encoding="ascii")


def read_indices(path):
    """Constraint rows from a selection JSON document or a plain list of integers."""
    text = Path(path).read_text(encoding="ascii").strip()
    if text.startswith("{") or text.startswith("["):
        doc = json.loads(text)
        idx = doc["indices"] if isinstance(doc, dict) else doc
    else:
        idx = [int(tok) for tok in text.replace(",", " ").split()]
    return np.array([int(i) for i in idx], dtype=np.int64)


def fmt_float(x):
    """Shortest decimal string that round-trips to the same double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_trace_csv(path, traces):
    """``trial,k,rse,residual_norm`` rows for a list of ``(trial, RunTrace)``."""
    lines = ["trial,k,rse,residual_norm"]
    for trial, tr in traces:
        for k, rse, res in zip(tr.ks, tr.rse, tr.residual_norm):
            lines.append(f"{trial},{int(k)},{fmt_float(rse)},{fmt_float(res)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_aggregate_csv(path, agg):
    lines = ["k,min,q25,median,q75,max"]
    for row in zip(agg.ks, agg.min, agg.q25, agg.median, agg.q75, agg.max):
        lines.append(",".join([str(int(row[0]))] + [fmt_float(v) for v in row[1:]]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="ascii")
