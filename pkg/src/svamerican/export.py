"""Plot-ready CSV/JSON artifacts with config echo and content hash.

Every JSON document carries a ``content_hash``: the SHA-256 of its canonical
serialisation with the hash itself and the volatile fields (wall-clock
timings, creation time, output directory) removed.  CSV files are written deterministically,
so two runs on the same inputs give byte-identical CSVs and equal hashes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

# "directory" is where an artifact was written, not what it contains
VOLATILE_KEYS = frozenset({"generated_at", "wallclock", "wallclock_seconds", "directory"})
FLOAT_FMT = "%.17g"


def _clean(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if hasattr(obj, "value") and hasattr(obj, "name") and not isinstance(obj, (int, float, str)):
        return obj.value  # enums
    return obj


def strip_volatile(doc):
    if isinstance(doc, dict):
        return {k: strip_volatile(v) for k, v in doc.items()
                if k not in VOLATILE_KEYS and k != "content_hash"}
    if isinstance(doc, list):
        return [strip_volatile(v) for v in doc]
    return doc


def canonical_json(doc) -> str:
    return json.dumps(_clean(doc), sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(doc) -> str:
    return hashlib.sha256(canonical_json(strip_volatile(_clean(doc))).encode()).hexdigest()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, doc: dict, config: dict | None = None) -> dict:
    """Write ``doc`` with a config echo, a creation time and a content hash; return what was written."""
    out = dict(_clean(doc))
    if config is not None:
        out["config"] = _clean(config)
    out["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    out["content_hash"] = content_hash(out)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, sort_keys=True, indent=2, allow_nan=False) + "\n")
    return out


def _write_rows(path, header: list[str], columns: list[np.ndarray]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    block = np.column_stack(columns) if columns[0].size else np.empty((0, len(header)))
    np.savetxt(buf, block, fmt=FLOAT_FMT, delimiter=",")
    data = buf.getvalue()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(data)
    return hashlib.sha256(data.encode()).hexdigest()


def write_surface_csv(result, path, slices: str = "final") -> str:
    """Long-format surface CSV "s,y,theta,u,payoff,residual"; returns the file's SHA-256.

    ``slices`` is "final" (the theta = T slice) or "all".
    """
    if slices not in ("final", "all"):
        raise ValueError("slices must be 'final' or 'all'")
    grid = result.grid
    chosen = result.surfaces if slices == "all" else [result.final]
    S, Y = np.meshgrid(grid.s_nodes, grid.y_nodes, indexing="ij")
    pay = np.broadcast_to(grid.payoff()[:, None], grid.shape)
    cols = [[] for _ in range(6)]
    for surf in chosen:
        res = surf.residual if surf.residual is not None else np.zeros(grid.shape)
        for c, arr in zip(cols, (S, Y, np.full(grid.shape, surf.theta), surf.values, pay, res)):
            c.append(arr.ravel())
    return _write_rows(path, ["s", "y", "theta", "u", "payoff", "residual"],
                       [np.concatenate(c) for c in cols])


def surface_metadata(result) -> dict:
    return {"grid": result.grid.describe(), "epsilon": result.config.epsilon,
            "epsilon_schedule": result.config.epsilon_schedule, "method": result.method,
            "model_label": result.model.label}


def write_boundary_csv(fb, path) -> str:
    """Long-format boundary CSV "y,theta,h,g"; empty columns are written as -inf and 0."""
    Yg, Th = np.meshgrid(fb.y_nodes, fb.theta_nodes, indexing="ij")
    return _write_rows(path, ["y", "theta", "h", "g"],
                       [Yg.ravel(), Th.ravel(), fb.h.ravel(), fb.g.ravel()])


def write_table_csv(path, rows: list[dict]) -> str:
    """Small heterogeneous table (convergence studies); floats use round-trip precision."""
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                         for k, v in row.items()})
    data = buf.getvalue()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(data)
    return hashlib.sha256(data.encode()).hexdigest()


def write_exercise_histogram(path, stop_steps: np.ndarray, times: np.ndarray) -> str:
    """Per-step counts of stopping times "t,count"."""
    counts = np.bincount(np.asarray(stop_steps, dtype=int), minlength=len(times))
    return _write_rows(path, ["t", "count"], [np.asarray(times, float), counts.astype(float)])
