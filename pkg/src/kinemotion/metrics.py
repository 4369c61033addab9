"""Evaluation metrics, the zero-velocity baseline and result tables.

All metrics return one value per frame, so indexing the result at a horizon
frame gives the error at that horizon.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from . import rotation
from .errors import ShapeMismatch
from .skeleton import PoseSequence, SkeletonSpec, joint_positions

HORIZONS_MS = (80, 160, 320, 400, 1000)
CSV_FIELDS = ("method", "metric", "action", "horizon_ms", "value")


def _rotations(x):
    return x.rotations if isinstance(x, PoseSequence) else np.asarray(x, dtype=np.float64)


def _check(a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"prediction {a.shape} vs target {b.shape}")


def mae(pred, target, include_root=False, form="vector", reduction="mean"):
    """Per-frame Euler angle error.

    Parameters
    ----------
    pred, target : PoseSequence or array ``(frames, bones, 3, 3)``
    include_root : bool
        Count the root bone too (the fish and mouse convention).
    form : {"vector", "summed"}
        ``"vector"`` takes the norm of each bone's wrapped Euler delta;
        ``"summed"`` takes the absolute value of the summed deltas.
    reduction : {"mean", "norm"}
        Average the per-bone errors, or take the square root of the summed
        squared deltas over all bones (the usual benchmark protocol).
    """
    a, b = _rotations(pred), _rotations(target)
    _check(a, b)
    delta = rotation.wrap_angle(rotation.euler_from_matrix(a) - rotation.euler_from_matrix(b))
    if not include_root:
        delta = delta[..., 1:, :]
    if reduction == "norm":
        if form != "vector":
            raise ValueError("reduction='norm' requires form='vector'")
        return np.sqrt((delta * delta).sum(axis=(-2, -1)))
    if reduction != "mean":
        raise ValueError(f"unknown reduction {reduction!r}")
    if form == "vector":
        per_bone = np.linalg.norm(delta, axis=-1)
    elif form == "summed":
        per_bone = np.abs(delta.sum(axis=-1))
    else:
        raise ValueError(f"unknown form {form!r}")
    return per_bone.mean(axis=-1)


def standard_euler_error(pred, target, min_std=1e-4):
    """Euler error as computed by the widely used H3.6m evaluation scripts.

    Angles come from the transposed rotation, nothing is wrapped, the root
    rotation is dropped and only channels whose target standard deviation
    over the window exceeds ``min_std`` are counted.
    """
    a, b = _rotations(pred), _rotations(target)
    _check(a, b)
    ea = rotation.euler_from_matrix(np.swapaxes(a, -1, -2))[:, 1:].reshape(len(a), -1)
    eb = rotation.euler_from_matrix(np.swapaxes(b, -1, -2))[:, 1:].reshape(len(b), -1)
    use = np.std(eb, axis=0) > min_std
    d = ea[:, use] - eb[:, use]
    return np.sqrt((d * d).sum(axis=1))


def mpe(pred, target, skeleton: SkeletonSpec):
    """Per-frame mean joint distance with root translations aligned."""
    a, b = _rotations(pred), _rotations(target)
    _check(a, b)
    diff = joint_positions(skeleton, a) - joint_positions(skeleton, b)
    return np.linalg.norm(diff, axis=-1).mean(axis=-1)


def zero_velocity(observed: PoseSequence, T):
    """Repeat the last observed frame ``T`` times."""
    if T < 1:
        raise ValueError("T must be >= 1")
    idx = np.full(T, len(observed) - 1)
    return PoseSequence(observed.translations[idx], observed.rotations[idx], dict(observed.meta))


def horizon_frames(fps, horizons_ms=HORIZONS_MS):
    """0-based frame index of each horizon: frame ``k`` lies ``(k + 1) / fps`` seconds ahead."""
    return [int(round(ms * fps / 1000.0)) - 1 for ms in horizons_ms]


def at_horizons(per_frame, fps, horizons_ms=HORIZONS_MS):
    """``{ms: value}`` for the horizons that fall inside ``per_frame``."""
    per_frame = np.asarray(per_frame)
    return {ms: float(per_frame[k]) for ms, k in zip(horizons_ms, horizon_frames(fps, horizons_ms)) if 0 <= k < len(per_frame)}


def write_metrics_csv(rows, path_or_buffer):
    own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
    fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
    try:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CSV_FIELDS})
    finally:
        if own:
            fh.close()


def format_table(rows):
    """Plain-text table: one line per (method, metric, action), one column per horizon."""
    horizons = sorted({int(r["horizon_ms"]) for r in rows})
    keys, cells = [], {}
    for r in rows:
        key = (r["method"], r["metric"], r["action"])
        if key not in cells:
            keys.append(key)
            cells[key] = {}
        cells[key][int(r["horizon_ms"])] = r["value"]
    header = ["method", "metric", "action"] + [f"{h}ms" for h in horizons]
    body = [list(k) + [f"{cells[k][h]:.3f}" if h in cells[k] else "-" for h in horizons] for k in keys]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    buf = io.StringIO()
    for line in [header] + body:
        buf.write("  ".join(str(x).rjust(w) if i >= 3 else str(x).ljust(w) for i, (x, w) in enumerate(zip(line, widths))))
        buf.write("\n")
    return buf.getvalue()
