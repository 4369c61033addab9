"""Motion datasets: exponential-map CSV I/O, windowing and synthetic data.

A CSV row holds the root translation followed by one axis-angle triple per
bone, in skeleton order. Sequences are kept densely as rotation matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rotation
from .errors import DimensionMismatch, EmptyDataset, ParseError, TopologyMismatch
from .skeleton import PoseSequence, SkeletonSpec, chain

YAW = (True, False, False)


@dataclass
class MotionDataset:
    sequences: list
    skeleton: SkeletonSpec
    frame_rate: float = 50.0
    representation: str = "expmap"
    names: list = field(default_factory=list)

    def __post_init__(self):
        for seq in self.sequences:
            if seq.n_bones != len(self.skeleton):
                raise TopologyMismatch(f"sequence with {seq.n_bones} bones for a {len(self.skeleton)}-bone skeleton")

    def __len__(self):
        return len(self.sequences)

    @property
    def n_frames(self):
        return sum(len(s) for s in self.sequences)


# --------------------------------------------------------------------------
# exponential-map rows


def sequence_from_expmap(rows, meta=None):
    """``(frames, 3 + 3 * bones)`` rows to a dense :class:`PoseSequence`."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if (rows.shape[1] - 3) % 3 or rows.shape[1] < 6:
        raise DimensionMismatch(f"row width {rows.shape[1]} is not 3 + 3 * bones")
    frames = rows.shape[0]
    aa = rows[:, 3:].reshape(frames, -1, 3)
    return PoseSequence(rows[:, :3].copy(), rotation.matrix_from_axis_angle(aa), dict(meta or {}))


def expmap_from_sequence(seq: PoseSequence):
    aa = rotation.axis_angle_from_matrix(seq.rotations)
    return np.concatenate([seq.translations, aa.reshape(len(seq), -1)], axis=1)


def parse_rows(text, width=None, source="<input>"):
    """Parse comma-separated reals with line and column diagnostics.

    Blank lines are skipped. When every row has the same wrong width the
    data does not fit ``width`` and :class:`DimensionMismatch` is raised; a
    row that differs from the others is reported as a :class:`ParseError`.
    """
    rows, numbers = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        values = []
        for col, tok in enumerate(fields, start=1):
            try:
                values.append(float(tok))
            except ValueError:
                raise ParseError(f"{source}: cannot parse {tok.strip()!r} as a number", lineno, col) from None
        rows.append(values)
        numbers.append(lineno)
    if not rows:
        raise EmptyDataset(f"{source}: no data rows")
    widths = np.array([len(r) for r in rows])
    expected = width if width is not None else int(np.bincount(widths).argmax())
    if width is not None and np.all(widths == widths[0]) and widths[0] != width:
        raise DimensionMismatch(f"{source}: rows have {widths[0]} values, expected {width}")
    bad = np.flatnonzero(widths != expected)
    if bad.size:
        i = int(bad[0])
        raise ParseError(f"{source}: expected {expected} values, found {widths[i]}", numbers[i])
    return np.array(rows, dtype=np.float64)


def read_expmap_csv(path, skeleton: SkeletonSpec | None = None):
    width = None if skeleton is None else 3 + 3 * len(skeleton)
    rows = parse_rows(Path(path).read_text(), width, source=str(path))
    return sequence_from_expmap(rows, {"source": str(path)})


def load_expmap_csv(path, skeleton: SkeletonSpec, frame_rate=50.0, step=1):
    """Load one sequence; ``step`` keeps every ``step``-th frame."""
    seq = read_expmap_csv(path, skeleton)[::step]
    return MotionDataset([seq], skeleton, frame_rate / step, "expmap", [Path(path).stem])


def load_expmap_dir(directory, skeleton: SkeletonSpec, frame_rate=50.0, step=1, pattern="*.csv"):
    paths = sorted(Path(directory).rglob(pattern))
    if not paths:
        raise EmptyDataset(f"no files matching {pattern!r} under {directory}")
    seqs = [read_expmap_csv(p, skeleton)[::step] for p in paths]
    return MotionDataset(seqs, skeleton, frame_rate / step, "expmap", [str(p.relative_to(directory)) for p in paths])


def save_expmap_csv(path, seq: PoseSequence):
    np.savetxt(path, expmap_from_sequence(seq), delimiter=",", fmt="%.17g")


# --------------------------------------------------------------------------
# windows


def window_count(length, t, T, stride=1):
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return max(0, (length - t - T) // stride + 1)


def window_starts(dataset: MotionDataset, t=50, T=10, stride=1):
    """``(sequence index, start frame)`` for every valid window."""
    return [(i, s * stride) for i, seq in enumerate(dataset.sequences) for s in range(window_count(len(seq), t, T, stride))]


def make_windows(dataset: MotionDataset, t=50, T=10, stride=1):
    """Consecutive ``(input, target)`` pairs of ``t`` and ``T`` frames."""
    out = []
    for i, start in window_starts(dataset, t, T, stride):
        seq = dataset.sequences[i]
        out.append((seq[start : start + t], seq[start + t : start + t + T]))
    return out


# --------------------------------------------------------------------------
# synthetic data


def pendulum_skeleton(bones):
    return chain("pendulum", bones, YAW, root_dof=YAW)


def pendulum_angles(bones, frames, freq=0.5, amplitude=0.5, seed=0, rate=25.0):
    """``A sin(2 pi f j / rate + phi_k)`` with per-bone phases drawn from ``seed``."""
    phase = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, size=bones)
    j = np.arange(frames)[:, None]
    return amplitude * np.sin(2.0 * np.pi * freq * j / rate + phase[None, :])


def synth_pendulum(bones=4, frames=500, freq=0.5, amplitude=0.5, seed=0, rate=25.0):
    """A chain whose bones each swing about their local z axis."""
    angles = pendulum_angles(bones, frames, freq, amplitude, seed, rate)
    seq = PoseSequence(np.zeros((frames, 3)), rotation.rot_z(angles), {"synthetic": "pendulum", "seed": seed})
    return MotionDataset([seq], pendulum_skeleton(bones), rate, "expmap", ["pendulum"])


# --------------------------------------------------------------------------
# standard H3.6m test windows


H36M_TEST_SEED = 1234567890
H36M_SUBACTIONS = (1, 2)


def h36m_test_windows(root, action, subject=5, source=50, target=100, count=8):
    """Evaluation windows of the common H3.6m protocol.

    Each ``S{subject}/{action}_{k}.txt`` file is read at 50 Hz and halved to
    25 Hz; start offsets are drawn from a legacy ``RandomState`` with the
    protocol seed, alternating between the two sub-actions. Returns a list of
    ``(observed, future)`` sequences.
    """
    root = Path(root)
    seqs = [read_expmap_csv(root / f"S{subject}" / f"{action}_{k}.txt")[::2] for k in H36M_SUBACTIONS]
    rng = np.random.RandomState(H36M_TEST_SEED)
    starts = [rng.randint(16, len(seqs[i % 2]) - source - target) for i in range(count)]
    out = []
    for i, idx in enumerate(starts):
        seq = seqs[i % 2]
        mid = idx + source
        out.append((seq[mid - source : mid], seq[mid : mid + target]))
    return out
