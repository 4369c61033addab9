"""Training losses with gradients taken through the autodiff graph.

Each public loss accepts plain arrays and returns a :class:`LossValue` whose
``grad`` is the derivative of ``scalar`` with respect to ``pred``. The
``*_terms`` helpers are the graph-level building blocks shared with training.

Reduction is the arithmetic mean over everything but the bone axis, and then
over bones, except for the forward-kinematics loss, which sums squared joint
errors within a pose before averaging over poses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .codec import decode_rotations_graph
from .errors import ShapeMismatch, TopologyMismatch
from .skeleton import SkeletonSpec, joint_positions, joint_positions_graph


@dataclass
class LossValue:
    scalar: float
    per_bone: np.ndarray
    grad: np.ndarray | None = None


def geodesic_terms(pred_rot, target_rot):
    """Squared geodesic distance per rotation; ``pred_rot`` may be a tensor."""
    target_rot = np.asarray(target_rot, dtype=np.float64)
    # trace(R R^T_hat) = sum_ij R_ij R_hat_ij
    cos = ((pred_rot * target_rot).sum(axis=-1).sum(axis=-1) - 1.0) * 0.5
    return ad.arccos_sq(cos)


def fk_terms(pred_pos, target_pos):
    """Squared joint position error per joint."""
    diff = pred_pos - np.asarray(target_pos, dtype=np.float64)
    return (diff * diff).sum(axis=-1)


def _per_bone(terms):
    """Average ``(..., bones)`` terms over the leading axes."""
    return terms.reshape(-1, terms.shape[-1]).mean(axis=0)


def _rotations_of(pred, representation):
    if representation == "matrix":
        return pred
    return decode_rotations_graph(pred, representation)


def _check(pred_shape, target_shape, what):
    if tuple(pred_shape) != tuple(target_shape):
        raise ShapeMismatch(f"{what}: prediction {tuple(pred_shape)} vs target {tuple(target_shape)}")


def geodesic_loss(pred, target, representation="matrix"):
    """Mean squared geodesic distance between predicted and target rotations.

    ``pred`` holds per-bone parameters ``(..., bones, width)`` in the given
    representation, or matrices ``(..., bones, 3, 3)`` for ``"matrix"``.
    """
    target = np.asarray(target, dtype=np.float64)
    x = ad.Tensor(pred, requires_grad=True)
    rot = _rotations_of(x, representation)
    _check(rot.shape, target.shape, "geodesic_loss")
    terms = geodesic_terms(rot, target)
    loss = terms.mean()
    loss.backward()
    return LossValue(float(loss.data), _per_bone(terms.data), x.grad)


def fk_loss(spec: SkeletonSpec, pred, target, representation="matrix"):
    """Sum over joints of squared FK position errors, averaged over poses.

    ``pred`` carries one parameter block (or matrix) per bone of ``spec``;
    ``target`` is dense rotation matrices. Both poses share the root
    translation, so it does not enter.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.shape[-3] != len(spec):
        raise TopologyMismatch(f"{target.shape[-3]} target rotations for a {len(spec)}-bone skeleton")
    x = ad.Tensor(pred, requires_grad=True)
    rot = _rotations_of(x, representation)
    _check(rot.shape, target.shape, "fk_loss")
    per_bone_rot = [rot[..., k, :, :] for k in range(len(spec))]
    pos = joint_positions_graph(spec, per_bone_rot)
    terms = fk_terms(pos, joint_positions(spec, target))
    loss = terms.sum(axis=-1).mean()
    loss.backward()
    return LossValue(float(loss.data), _per_bone(terms.data), x.grad)


def _elementwise_loss(pred, target, fn, what):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check(pred.shape, target.shape, what)
    x = ad.Tensor(pred, requires_grad=True)
    terms = fn(x - target)
    loss = terms.mean()
    loss.backward()
    t = terms.data if terms.ndim >= 2 else terms.data.reshape(1, -1)
    per_bone = t.reshape(-1, t.shape[-2], t.shape[-1]).mean(axis=(0, 2))
    return LossValue(float(loss.data), per_bone, x.grad)


def l2_loss(pred, target):
    """Mean squared difference of ``(..., bones, width)`` parameter arrays."""
    return _elementwise_loss(pred, target, lambda d: d * d, "l2_loss")


def smooth_l1_loss(pred, target):
    """Element-mean Huber loss with threshold 1."""
    return _elementwise_loss(pred, target, ad.huber, "smooth_l1_loss")
