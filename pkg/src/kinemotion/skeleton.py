"""Kinematic trees: topology, DoF masks and forward kinematics.

A skeleton is a list of bones in topological order. Bone ``k`` has a parent
index (``-1`` for the single root), a reference offset ``T_k`` expressed in
its parent's frame, and a per-axis rotational DoF mask ordered like the Euler
angles ``(yaw, pitch, roll)``, i.e. about the local ``(z, y, x)`` axes.

Each bone contributes one joint, located at its tip::

    Y_k = (R_root ... R_parent(k) R_k) T_k + Y_parent(k)

with ``Y_parent(root)`` being the root translation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rotation
from .autodiff import Tensor, as_tensor, stack
from .errors import EmptyDataset, TopologyMismatch, UnknownPreset

ROOT_TRANSLATION_DOF = 3


@dataclass(frozen=True)
class Bone:
    parent: int
    offset: tuple[float, float, float]
    dof: tuple[bool, bool, bool] = (True, True, True)


@dataclass(frozen=True)
class SkeletonSpec:
    name: str
    bones: tuple[Bone, ...]

    def __post_init__(self):
        bones = tuple(
            Bone(int(b.parent), tuple(float(v) for v in b.offset), tuple(bool(v) for v in b.dof))
            for b in self.bones
        )
        object.__setattr__(self, "bones", bones)
        if not bones:
            raise ValueError("a skeleton needs at least one bone")
        roots = [i for i, b in enumerate(bones) if b.parent == -1]
        if roots != [0]:
            raise ValueError("bone 0 must be the only root")
        for i, b in enumerate(bones):
            if len(b.offset) != 3 or len(b.dof) != 3:
                raise ValueError(f"bone {i}: offset and dof need three entries")
            if i > 0:
                if not 0 <= b.parent < i:
                    raise ValueError(f"bone {i}: parent {b.parent} is not an earlier bone")
                if np.linalg.norm(b.offset) <= 0:
                    raise ValueError(f"bone {i}: non-root bones need a non-zero offset")

    def __len__(self):
        return len(self.bones)

    @property
    def parents(self):
        return np.array([b.parent for b in self.bones], dtype=int)

    @property
    def offsets(self):
        return np.array([b.offset for b in self.bones], dtype=np.float64)

    @property
    def dof_mask(self):
        return np.array([b.dof for b in self.bones], dtype=bool)

    @property
    def total_dof(self):
        """Enabled rotation axes plus the root's translational DoF."""
        return int(self.dof_mask.sum()) + ROOT_TRANSLATION_DOF

    def with_mask(self, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (len(self), 3):
            raise TopologyMismatch(f"mask shape {mask.shape} != ({len(self)}, 3)")
        bones = tuple(Bone(b.parent, b.offset, tuple(m)) for b, m in zip(self.bones, mask))
        return SkeletonSpec(self.name, bones)

    def with_offsets(self, offsets):
        offsets = np.asarray(offsets, dtype=np.float64)
        bones = tuple(Bone(b.parent, tuple(o), b.dof) for b, o in zip(self.bones, offsets))
        return SkeletonSpec(self.name, bones)

    def leaves(self):
        children = set(b.parent for b in self.bones)
        return [i for i in range(len(self)) if i not in children]

    def to_dict(self):
        return {
            "name": self.name,
            "bones": [{"parent": b.parent, "offset": list(b.offset), "dof": list(b.dof)} for b in self.bones],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], tuple(Bone(b["parent"], tuple(b["offset"]), tuple(b["dof"])) for b in d["bones"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


@dataclass
class PoseFrame:
    root_translation: np.ndarray
    rotations: np.ndarray  # (bones, 3, 3)


@dataclass
class PoseSequence:
    """Frames stored densely as rotation matrices plus root translations."""

    translations: np.ndarray  # (frames, 3)
    rotations: np.ndarray  # (frames, bones, 3, 3)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.translations = np.asarray(self.translations, dtype=np.float64)
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        if self.rotations.ndim != 4 or self.rotations.shape[-2:] != (3, 3):
            raise ValueError(f"rotations must be (frames, bones, 3, 3), got {self.rotations.shape}")
        if self.translations.shape != (self.rotations.shape[0], 3):
            raise ValueError("translations must be (frames, 3)")

    def __len__(self):
        return self.rotations.shape[0]

    @property
    def n_bones(self):
        return self.rotations.shape[1]

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            return PoseFrame(self.translations[index], self.rotations[index])
        return PoseSequence(self.translations[index], self.rotations[index], dict(self.meta))

    def frame(self, j):
        return PoseFrame(self.translations[j], self.rotations[j])


# --------------------------------------------------------------------------
# Forward kinematics


def joint_positions(spec: SkeletonSpec, rotations, translation=None):
    """Joint positions ``(..., bones, 3)`` from local rotations ``(..., bones, 3, 3)``."""
    rotations = np.asarray(rotations, dtype=np.float64)
    if rotations.shape[-3] != len(spec):
        raise TopologyMismatch(f"{rotations.shape[-3]} rotations for a {len(spec)}-bone skeleton")
    lead = rotations.shape[:-3]
    if translation is None:
        translation = np.zeros(lead + (3,))
    translation = np.broadcast_to(np.asarray(translation, dtype=np.float64), lead + (3,))
    offsets = spec.offsets
    glob = np.empty_like(rotations)
    pos = np.empty(lead + (len(spec), 3))
    for k, parent in enumerate(spec.parents):
        if parent < 0:
            glob[..., k, :, :] = rotations[..., k, :, :]
            base = translation
        else:
            glob[..., k, :, :] = glob[..., parent, :, :] @ rotations[..., k, :, :]
            base = pos[..., parent, :]
        pos[..., k, :] = glob[..., k, :, :] @ offsets[k] + base
    return pos


def forward_kinematics(spec: SkeletonSpec, pose):
    """Joint positions of a :class:`PoseFrame` or every frame of a :class:`PoseSequence`."""
    if isinstance(pose, PoseSequence):
        return joint_positions(spec, pose.rotations, pose.translations)
    return joint_positions(spec, pose.rotations, pose.root_translation)


def joint_positions_graph(spec: SkeletonSpec, rotations, translation=None):
    """Differentiable :func:`joint_positions`; ``rotations`` is a list of per-bone tensors."""
    if len(rotations) != len(spec):
        raise TopologyMismatch(f"{len(rotations)} rotations for a {len(spec)}-bone skeleton")
    offsets = spec.offsets
    glob, pos = [], []
    for k, parent in enumerate(spec.parents):
        r = as_tensor(rotations[k])
        if parent < 0:
            g = r
            base = 0.0 if translation is None else translation
        else:
            g = glob[parent] @ r
            base = pos[parent]
        glob.append(g)
        pos.append((g * offsets[k]).sum(axis=-1) + base)
    return stack(pos, axis=-2)


# --------------------------------------------------------------------------
# DoF extraction and projection


def extract_dof_mask(sequences, tol=1e-6):
    """Disable an axis when its Euler component stays within ``tol`` of zero everywhere."""
    sequences = list(sequences)
    if not sequences or all(len(s) == 0 for s in sequences):
        raise EmptyDataset("no frames to extract DoF from")
    n_bones = sequences[0].n_bones
    if any(s.n_bones != n_bones for s in sequences):
        raise TopologyMismatch("sequences disagree on bone count")
    peak = np.zeros((n_bones, 3))
    for seq in sequences:
        if len(seq):
            euler = rotation.euler_from_matrix(seq.rotations)
            peak = np.maximum(peak, np.abs(euler).max(axis=0))
    return peak > tol


def project_rotations(rotations, mask):
    """Zero the masked Euler components of ``(..., bones, 3, 3)`` rotations."""
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        return np.array(rotations, dtype=np.float64)
    euler = rotation.euler_from_matrix(rotations)
    return rotation.matrix_from_euler(np.where(mask, euler, 0.0))


def project_to_dof(pose, mask):
    if isinstance(pose, PoseSequence):
        return PoseSequence(pose.translations.copy(), project_rotations(pose.rotations, mask), dict(pose.meta))
    return PoseFrame(np.array(pose.root_translation), project_rotations(pose.rotations, mask))


# --------------------------------------------------------------------------
# Presets

_ALL = (True, True, True)
_NONE = (False, False, False)
_YAW = (True, False, False)
_ROLL = (False, False, True)
_YAW_PITCH = (True, True, False)
_PITCH_ROLL = (False, True, True)
_YAW_ROLL = (True, False, True)


def chain(name, n_bones, dof, root_dof=_ALL, direction=(1.0, 0.0, 0.0)):
    """A single straight chain of unit-length bones."""
    bones = [Bone(-1, direction, root_dof)]
    bones += [Bone(i - 1, direction, dof) for i in range(1, n_bones)]
    return SkeletonSpec(name, tuple(bones))


def _human36():
    # Bone order and parents follow the 32-entry exponential-map layout of the
    # public H3.6m release; end sites and fingers carry no DoF.
    down, up = (0.0, -1.0, 0.0), (0.0, 1.0, 0.0)
    fwd = (0.0, 0.0, 1.0)
    left, right = (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)
    table = [
        (-1, (0.0, 0.0, 0.0), _ALL),  # 0 hips
        (0, right, _ALL), (1, down, _ROLL), (2, down, _PITCH_ROLL), (3, fwd, _NONE), (4, fwd, _NONE),
        (0, left, _ALL), (6, down, _ROLL), (7, down, _PITCH_ROLL), (8, fwd, _NONE), (9, fwd, _NONE),
        (0, up, _ALL), (11, up, _ALL), (12, up, _ALL), (13, up, _ALL), (14, up, _NONE),
        (12, left, _NONE), (16, left, _ALL), (17, left, _YAW), (18, left, _YAW_ROLL),
        (19, left, _NONE), (20, left, _NONE), (19, fwd, _NONE), (22, fwd, _NONE),
        (12, right, _NONE), (24, right, _ALL), (25, right, _YAW), (26, right, _YAW_ROLL),
        (27, right, _NONE), (28, right, _NONE), (27, fwd, _NONE), (30, fwd, _NONE),
    ]
    return SkeletonSpec("human36", tuple(Bone(p, o, d) for p, o, d in table))


_PRESETS = {
    "human36": _human36,
    # 20 bones / 21 joints, planar bending
    "fish": lambda: chain("fish", 20, _YAW),
    # spine joints A..E: 4 bones, 2 DoF each past the root
    "mouse": lambda: chain("mouse", 4, _YAW_PITCH),
}


def preset(name) -> SkeletonSpec:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}") from None


def preset_names():
    return sorted(_PRESETS)
