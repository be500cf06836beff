"""Plain-text state files and 17-digit serialization of run records.

State files hold one complex entry per line as ``re im``, after a header
line ``dims: d1 d2 ...``. A vector has prod(dims) lines, a density matrix
prod(dims)**2 lines in row-major order.
"""

from __future__ import annotations

import csv
import json
import math
import re

import numpy as np

FLOAT_FMT = ".17g"


def fmt(x):
    return format(float(x), FLOAT_FMT)


def save_state(path, state, dims):
    a = np.asarray(state, dtype=complex)
    n = int(np.prod(dims))
    if a.shape not in ((n,), (n, n)):
        raise ValueError(f"state shape {a.shape} does not match dims {dims}")
    with open(path, "w") as fh:
        fh.write("dims: " + " ".join(str(int(d)) for d in dims) + "\n")
        for z in a.reshape(-1):
            fh.write(f"{fmt(z.real)} {fmt(z.imag)}\n")


def load_state(path):
    """Returns (array, dims); the array is a vector or a square matrix."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].startswith("dims:"):
        raise ValueError(f"{path}: missing 'dims:' header")
    dims = [int(t) for t in lines[0][5:].split()]
    vals = np.array([complex(float(a), float(b)) for a, b in (ln.split() for ln in lines[1:])])
    n = int(np.prod(dims))
    if vals.size == n:
        return vals, dims
    if vals.size == n * n:
        return vals.reshape(n, n), dims
    raise ValueError(f"{path}: {vals.size} entries fit neither a vector nor a matrix of dim {n}")


# ---------------------------------------------------------------------------
# JSON / CSV with fixed float precision

_TOKEN = "@@f17@@"


def _plain(x):
    """Numpy scalars and arrays to builtins; floats tagged for 17-digit output."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return _TOKEN + fmt(v)
    if isinstance(x, complex):
        return {"re": _plain(x.real), "im": _plain(x.imag)}
    if x is None or isinstance(x, str):
        return x
    if hasattr(x, "to_dict"):
        return _plain(x.to_dict())
    return str(x)


def dumps(obj, indent=2):
    text = json.dumps(_plain(obj), indent=indent, sort_keys=False)
    return re.sub(rf'"{re.escape(_TOKEN)}([^"]*)"', r"\1", text)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def write_csv(path, rows):
    """One row per dict; columns are the union of keys in first-seen order."""
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: (fmt(v) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})
