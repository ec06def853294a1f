"""JSON problem files and CSV regret curves.

A problem file holds one instance and its representations::

    {"schema_version": 1, "contexts": X, "arms": A,
     "rho": [...], "rewards": [[...], ...],
     "representations": [{"name": ..., "dim": d, "features": X x A x d}],
     "metadata": {...}}

Floats are written with ``repr`` precision, so tables round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .model import BanditInstance, Representation, RepresentationSet

SCHEMA_VERSION = 1
TOP_FIELDS = {"schema_version", "contexts", "arms", "rho", "rewards", "representations",
              "metadata"}
REP_FIELDS = {"name", "dim", "features"}
CURVE_HEADER = ["seed", "t", "cumulative_regret", "regret_over_logT", "elimination_time"]


class FormatError(Exception):
    """Malformed or unreadable problem file."""


def _num_array(value, ndim: int, what: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{what}: not a numeric array ({exc})") from None
    if arr.ndim != ndim:
        raise FormatError(f"{what}: expected {ndim} dimensions, got shape {arr.shape}")
    return arr


def problem_from_dict(data: dict, strict: bool = True):
    """Returns ``(instance, reps, metadata)``. Invariant violations such as a
    non-normalized ``rho`` are left for ``validate_instance`` to report."""
    if not isinstance(data, dict):
        raise FormatError("top level must be a JSON object")
    if strict:
        unknown = set(data) - TOP_FIELDS
        if unknown:
            raise FormatError(f"unknown fields: {sorted(unknown)}")
    for key in ("schema_version", "contexts", "arms", "rho", "rewards"):
        if key not in data:
            raise FormatError(f"missing field {key!r}")
    if data["schema_version"] != SCHEMA_VERSION:
        raise FormatError(f"unsupported schema_version {data['schema_version']!r}")
    X, A = data["contexts"], data["arms"]
    if not (isinstance(X, int) and isinstance(A, int)) or X < 1 or A < 1:
        raise FormatError("contexts and arms must be positive integers")
    rho = _num_array(data["rho"], 1, "rho")
    rewards = _num_array(data["rewards"], 2, "rewards")
    if rho.shape != (X,) or rewards.shape != (X, A):
        raise FormatError(f"rho/rewards shapes {rho.shape}/{rewards.shape} do not match "
                          f"contexts={X}, arms={A}")
    reps = []
    for i, r in enumerate(data.get("representations", [])):
        if not isinstance(r, dict):
            raise FormatError(f"representation {i} must be an object")
        if strict and set(r) - REP_FIELDS:
            raise FormatError(f"representation {i}: unknown fields {sorted(set(r) - REP_FIELDS)}")
        if "features" not in r or "dim" not in r:
            raise FormatError(f"representation {i}: missing 'dim' or 'features'")
        feats = _num_array(r["features"], 3, f"representation {i} features")
        if feats.shape != (X, A, r["dim"]):
            raise FormatError(f"representation {i}: features shape {feats.shape}, "
                              f"expected {(X, A, r['dim'])}")
        if not np.all(np.isfinite(feats)):
            raise FormatError(f"representation {i}: non-finite features")
        reps.append(Representation(feats, str(r.get("name", f"phi{i + 1}"))))
    names = [r.name for r in reps]
    if len(set(names)) != len(names):
        raise FormatError(f"duplicate representation names: {names}")
    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict):
        raise FormatError("metadata must be an object")
    return BanditInstance(rho, rewards), RepresentationSet(tuple(reps)), metadata


def problem_to_dict(instance: BanditInstance, reps=(), metadata=None) -> dict:
    for arr in (instance.rho, instance.rewards):
        if not np.all(np.isfinite(arr)):
            raise FormatError("cannot serialize non-finite values")
    return {
        "schema_version": SCHEMA_VERSION,
        "contexts": instance.num_contexts,
        "arms": instance.num_arms,
        "rho": instance.rho.tolist(),
        "rewards": instance.rewards.tolist(),
        "representations": [{"name": r.name, "dim": r.dim, "features": r.features.tolist()}
                            for r in reps],
        "metadata": metadata or {},
    }


def load_problem(path, strict: bool = True):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_dict(data, strict)


def dumps_problem(instance, reps=(), metadata=None) -> str:
    return json.dumps(problem_to_dict(instance, reps, metadata), indent=1, allow_nan=False) + "\n"


def save_problem(path, instance, reps=(), metadata=None) -> None:
    Path(path).write_text(dumps_problem(instance, reps, metadata), encoding="utf-8")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_curves(path_or_file, curves) -> None:
    """One row per (seed, checkpoint); UTF-8 with LF line endings."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", encoding="utf-8", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for c in curves:
            elim = c.elimination_time
            for t, reg, over in zip(c.checkpoints, c.cumulative_regret, c.regret_over_logT):
                done = elim if elim is not None and elim <= t else None
                w.writerow([c.seed, int(t), _fmt(float(reg)), _fmt(float(over)), _fmt(done)])
    finally:
        if own:
            fh.close()
