"""Atomic file output, history CSVs and key = value summaries."""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .engine import SimHistory, momentum_split_series

__all__ = ["atomic_write", "fmt", "history_csv", "summary_text", "csv_text", "config_hash"]


def atomic_write(path: str | Path, text: str) -> Path:
    """Write to a temporary sibling, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def config_hash(obj) -> str:
    """sha256 of a canonical JSON rendering."""
    blob = json.dumps(obj, sort_keys=True, default=_jsonable, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    if isinstance(o, (tuple, set)):
        return list(o)
    return repr(o)


def summary_text(items: Mapping[str, object]) -> str:
    return "".join(f"{k} = {fmt(v)}\n" for k, v in items.items())


def csv_text(header: Iterable[str], rows: Iterable[Iterable[object]]) -> str:
    out = [",".join(header)]
    out.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(out) + "\n"


def history_csv(hist: SimHistory) -> str:
    """One row per iteration: ``n, x_1..x_d, tau_i_j..., e_norm, step`` (+ heavy-ball columns)."""
    N, d = hist.x.shape
    D = len(hist.blocks)
    ne = len(hist.e)
    heavy = hist.g is not None
    header = ["n"] + [f"x_{k}" for k in range(1, d + 1)]
    header += [f"tau_{i}_{j}" for i in range(1, D + 1) for j in range(1, D + 1)]
    header += ["e_norm", "step"]
    cols = [np.arange(1, N + 1, dtype=float)[:, None], hist.x]
    pad = N - ne

    def padded(a):
        a = np.asarray(a, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if pad > 0:
            a = np.vstack([a[:N], np.full((pad, a.shape[1]), np.nan)])
        return a[:N]

    cols.append(padded(hist.tau.reshape(ne, D * D)))
    cols.append(padded(np.linalg.norm(hist.e, axis=1)))
    cols.append(padded(hist.steps))
    if heavy:
        header += [f"m_{k}" for k in range(1, d + 1)] + ["delta_norm", "c_n"]
        ser = momentum_split_series(hist.g, hist.beta)
        cols += [padded(hist.m), padded(ser.delta_norm), padded(ser.c)]
    table = np.hstack(cols)
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    n_int = 1 + d + D * D  # n, x, tau columns: tau rendered as integers
    for row in table:
        parts = [str(int(row[0]))]
        parts += [format(v, ".17g") for v in row[1 : 1 + d]]
        parts += ["" if np.isnan(v) else str(int(v)) for v in row[1 + d : n_int]]
        parts += ["" if np.isnan(v) else format(v, ".17g") for v in row[n_int:]]
        buf.write(",".join(parts) + "\n")
    return buf.getvalue()
