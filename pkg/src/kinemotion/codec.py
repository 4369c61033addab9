"""Packing poses into the flat vectors the network reads and writes.

Bones whose DoF mask is entirely disabled are dropped; every other bone
contributes one block of its representation's width. The ``coords``
representation instead carries every joint position relative to the root
translation. Global translation is never part of the vector.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import rotation
from .skeleton import SkeletonSpec, joint_positions, joint_positions_graph, project_rotations

WIDTH = {"axis_angle": 3, "quaternion": 4, "stiefel": 6, "coords": 3}
ROTATIONAL = ("axis_angle", "quaternion", "stiefel")
REPRESENTATIONS = tuple(WIDTH)

_TO_PARAMS = {
    "axis_angle": rotation.axis_angle_from_matrix,
    "quaternion": rotation.quat_from_matrix,
    "stiefel": rotation.stiefel_from_matrix,
}
_FROM_PARAMS = {
    "axis_angle": rotation.matrix_from_axis_angle,
    "quaternion": rotation.matrix_from_quat,
    "stiefel": rotation.matrix_from_stiefel,
}


def check_representation(name):
    if name not in WIDTH:
        raise ValueError(f"unknown representation {name!r}; choose from {REPRESENTATIONS}")
    return name


def encode_rotations(rotations, representation):
    """Per-bone parameters ``(..., width)`` of rotation matrices."""
    return _TO_PARAMS[check_representation(representation)](rotations)


def decode_rotations(params, representation):
    return _FROM_PARAMS[check_representation(representation)](params)


# --------------------------------------------------------------------------
# differentiable parameter -> matrix maps


def matrix_from_axis_angle_graph(w):
    """Rodrigues' formula on a ``(..., 3)`` tensor, smooth through zero."""
    s = (w * w).sum(axis=-1)
    a = ad.expand_dims(ad.expand_dims(ad.sinc_sq(s), -1), -1)
    b = ad.expand_dims(ad.expand_dims(ad.cosc_sq(s), -1), -1)
    x, y, z = w[..., 0], w[..., 1], w[..., 2]
    zero = x * 0.0
    k = ad.stack(
        [ad.stack([zero, -z, y], axis=-1), ad.stack([z, zero, -x], axis=-1), ad.stack([-y, x, zero], axis=-1)],
        axis=-2,
    )
    # K^2 = w w^T - |w|^2 I
    outer = ad.expand_dims(w, -1) * ad.expand_dims(w, -2)
    k2 = outer - ad.expand_dims(ad.expand_dims(s, -1), -1) * np.eye(3)
    return a * k + b * k2 + np.eye(3)


def matrix_from_quat_graph(q):
    q = q / ad.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rows = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
    return ad.stack([ad.stack(r, axis=-1) for r in rows], axis=-2)


def matrix_from_stiefel_graph(s):
    """Gram-Schmidt + cross product on a ``(..., 6)`` tensor."""
    a1, a2 = s[..., 0:3], s[..., 3:6]
    e1 = a1 / ad.norm(a1, axis=-1, keepdims=True)
    b2 = a2 - (e1 * a2).sum(axis=-1, keepdims=True) * e1
    e2 = b2 / ad.norm(b2, axis=-1, keepdims=True)
    e3 = ad.cross(e1, e2)
    return ad.stack([e1, e2, e3], axis=-1)


_GRAPH = {
    "axis_angle": matrix_from_axis_angle_graph,
    "quaternion": matrix_from_quat_graph,
    "stiefel": matrix_from_stiefel_graph,
}


def decode_rotations_graph(params, representation):
    return _GRAPH[check_representation(representation)](ad.as_tensor(params))


# --------------------------------------------------------------------------


class PoseCodec:
    """Maps between dense rotations and the network's packed vectors."""

    def __init__(self, skeleton: SkeletonSpec, representation: str, mask=None):
        self.skeleton = skeleton
        self.representation = check_representation(representation)
        self.mask = skeleton.dof_mask if mask is None else np.asarray(mask, dtype=bool)
        if representation == "coords":
            self.active = np.arange(len(skeleton))
        else:
            self.active = np.flatnonzero(self.mask.any(axis=1))
        self.width = WIDTH[representation]

    @property
    def dim(self):
        return len(self.active) * self.width

    @property
    def rotational(self):
        return self.representation in ROTATIONAL

    def block_of(self):
        """Index into ``self.active`` for each entry of the packed vector."""
        return np.repeat(np.arange(len(self.active)), self.width)

    def encode(self, rotations):
        """``(..., bones, 3, 3)`` rotations to ``(..., dim)`` vectors."""
        rotations = np.asarray(rotations, dtype=np.float64)
        lead = rotations.shape[:-3]
        if self.representation == "coords":
            blocks = joint_positions(self.skeleton, rotations)
        else:
            blocks = encode_rotations(rotations[..., self.active, :, :], self.representation)
        return blocks.reshape(lead + (self.dim,))

    def decode(self, vectors, project=True):
        """Packed vectors back to dense ``(..., bones, 3, 3)`` rotations.

        Bones outside the packed set are the identity; with ``project`` the
        result is snapped onto the DoF mask.
        """
        if not self.rotational:
            raise ValueError("joint coordinates do not determine bone rotations")
        vectors = np.asarray(vectors, dtype=np.float64)
        lead = vectors.shape[:-1]
        blocks = vectors.reshape(lead + (len(self.active), self.width))
        out = np.broadcast_to(np.eye(3), lead + (len(self.skeleton), 3, 3)).copy()
        out[..., self.active, :, :] = decode_rotations(blocks, self.representation)
        return project_rotations(out, self.mask) if project else out

    def blocks_graph(self, vectors):
        lead = vectors.shape[:-1]
        return ad.reshape(vectors, lead + (len(self.active), self.width))

    def active_rotations_graph(self, vectors):
        """``(..., n_active, 3, 3)`` rotation tensor from packed vectors."""
        return decode_rotations_graph(self.blocks_graph(vectors), self.representation)

    def positions_graph(self, vectors):
        """Joint positions ``(..., bones, 3)`` as a differentiable function of the vector."""
        if self.representation == "coords":
            return ad.reshape(vectors, vectors.shape[:-1] + (len(self.skeleton), 3))
        active_rot = self.active_rotations_graph(vectors)
        lead = vectors.shape[:-1]
        eye = np.broadcast_to(np.eye(3), lead + (3, 3))
        slot = {int(b): i for i, b in enumerate(self.active)}
        per_bone = [active_rot[..., slot[k], :, :] if k in slot else eye for k in range(len(self.skeleton))]
        return joint_positions_graph(self.skeleton, per_bone)

    def positions(self, rotations):
        """Root-relative joint positions of dense rotations (no global translation)."""
        return joint_positions(self.skeleton, rotations)
