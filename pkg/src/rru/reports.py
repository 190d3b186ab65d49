"""Bit-exact file formats for trajectories, studies and power tables.

Floats are written with ``repr`` (the shortest string that round-trips to the
same double). Undefined values become empty CSV fields and JSON ``null``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .stats_kernel import GofResult

TRAJECTORY_COLUMNS = ("i", "delta", "y", "u", "z_before")
STUDY_COLUMNS = (
    "replicate", "n", "n_B", "n_W", "ybar_B", "ybar_W", "var_B", "var_W",
    "z", "zeta0", "zeta", "lambda", "eta_sq_hat", "psi_hat", "reject",
)
POWER_COLUMNS = ("effect", "n", "R", "alpha", "empirical_power", "mean_NW_share", "mean_eta_sq")

# study CSV column -> CheckpointStats attribute
_STAT_FIELDS = {
    "n_B": "n_B", "n_W": "n_W", "ybar_B": "ybar_B", "ybar_W": "ybar_W",
    "var_B": "var_B", "var_W": "var_W", "z": "z_n", "zeta0": "zeta0", "zeta": "zeta",
    "lambda": "lambda_n", "eta_sq_hat": "eta_sq_hat", "psi_hat": "psi_hat",
}
_INT_FIELDS = {"n_B", "n_W"}


def jsonable(obj):
    """Plain JSON tree: NaN/inf -> None, numpy scalars unwrapped, tuples -> lists."""
    if isinstance(obj, GofResult):
        return jsonable(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def fmt(value) -> str:
    """One CSV field."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return repr(v) if math.isfinite(v) else ""


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def trajectory_csv(path) -> str:
    rows = zip(range(1, len(path) + 1), path.delta.astype(int).tolist(), path.y, path.u, path.z_before)
    return _csv_text(TRAJECTORY_COLUMNS, rows)


def trajectory_summary(path) -> dict:
    return {
        "config": path.cfg.to_dict(),
        "seed": path.seed,
        "horizon": len(path),
        "checkpoints": [s.as_dict() for s in path.snapshots],
    }


def study_rows(report):
    """One row per replicate per checkpoint, replicate-major."""
    cps = report.plan.cfg.checkpoints
    cols = []
    for s in report.stats:
        cols.append({c: np.asarray(getattr(s, a), dtype=float) for c, a in _STAT_FIELDS.items()})
    for r in range(report.plan.replicates):
        for k, n in enumerate(cps):
            row = [r, int(n)]
            for c in STUDY_COLUMNS[2:-1]:
                v = float(cols[k][c][r])
                row.append(int(v) if c in _INT_FIELDS and math.isfinite(v) else v)
            row.append(bool(report.reject[r, k]))
            yield row


def study_csv(report) -> str:
    return _csv_text(STUDY_COLUMNS, study_rows(report))


def study_aggregate(report, checks=None) -> dict:
    plan = report.plan
    t = plan.truth
    out = {
        "config": plan.cfg.to_dict(),
        "replicates": plan.replicates,
        "base_seed": plan.base_seed,
        "alpha": plan.alpha,
        "truth": {
            "mu_B": t.mu_B, "mu_W": t.mu_W, "sigma_B": t.sigma_B, "sigma_W": t.sigma_W,
            "m_B": t.m_B, "m_W": t.m_W,
        },
        "checkpoints": report.aggregates,
    }
    # diagnostics at top level so e.g. ``zeta0_ks.p_value`` is a direct path
    out.update(report.diagnostics)
    if checks is not None:
        out["checks"] = checks
    return out


def power_csv(rows) -> str:
    return _csv_text(POWER_COLUMNS, ([row[c] for c in POWER_COLUMNS] for row in rows))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_text(path: Path, text: str) -> str:
    """Write ``text`` as UTF-8 with LF endings; return its SHA-256."""
    data = text.encode("utf-8")
    Path(path).write_bytes(data)
    return sha256_bytes(data)
