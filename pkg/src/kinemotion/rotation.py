"""Rotation parameterizations and rigid transforms.

The 3x3 rotation matrix is the canonical form; axis-angle (exponential map),
unit quaternions, the two-column Stiefel form and intrinsic Z-Y-X Euler angles
all convert to and from it. Every function broadcasts over leading axes, so a
``(..., 3, 3)`` stack of matrices is handled the same way as a single one.

Conventions
-----------
* Axis-angle vectors are canonicalized to an angle in ``[0, pi]``.
* Quaternions are ``(w, x, y, z)`` with the scalar first, canonicalized to
  ``w >= 0``.
* Stiefel vectors are the first two matrix columns stacked, ``(R1, R2)``.
* Euler angles are ``(yaw, pitch, roll)`` for ``R = Rz(yaw) Ry(pitch) Rx(roll)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStiefel

SMALL_ANGLE = 1e-7
NEAR_PI = 1e-3
_SERIES_CUTOFF = 1e-3  # squared angle below which Taylor series are used
_GIMBAL_EPS = 1e-10


def _f64(x):
    return np.asarray(x, dtype=np.float64)


def skew(w):
    """Cross-product matrix ``[w]_x`` with ``[w]_x v = w x v``."""
    w = _f64(w)
    z = np.zeros(w.shape[:-1])
    x, y, zz = w[..., 0], w[..., 1], w[..., 2]
    return np.stack(
        [
            np.stack([z, -zz, y], axis=-1),
            np.stack([zz, z, -x], axis=-1),
            np.stack([-y, x, z], axis=-1),
        ],
        axis=-2,
    )


def vee(m):
    """Inverse of :func:`skew` applied to the antisymmetric part of ``m``."""
    m = _f64(m)
    return 0.5 * np.stack(
        [m[..., 2, 1] - m[..., 1, 2], m[..., 0, 2] - m[..., 2, 0], m[..., 1, 0] - m[..., 0, 1]],
        axis=-1,
    )


def rot_x(angle):
    return matrix_from_axis_angle(np.stack(np.broadcast_arrays(angle, 0.0, 0.0), axis=-1))


def rot_y(angle):
    return matrix_from_axis_angle(np.stack(np.broadcast_arrays(0.0, angle, 0.0), axis=-1))


def rot_z(angle):
    return matrix_from_axis_angle(np.stack(np.broadcast_arrays(0.0, 0.0, angle), axis=-1))


def is_rotation(m, atol=1e-9):
    """True when every matrix in ``m`` is orthonormal with determinant +1."""
    m = _f64(m)
    eye = np.eye(3)
    ortho = np.abs(np.swapaxes(m, -1, -2) @ m - eye).max(axis=(-1, -2)) <= atol
    proper = np.abs(np.linalg.det(m) - 1.0) <= atol
    return bool(np.all(ortho & proper))


def nearest_rotation(m):
    """Project arbitrary 3x3 matrices onto SO(3) in the Frobenius sense."""
    u, _, vt = np.linalg.svd(_f64(m))
    d = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, 2] *= d[..., None]
    return u @ vt


def random_rotations(n, rng=None):
    """``n`` rotations drawn uniformly (Haar measure) from SO(3)."""
    rng = np.random.default_rng(rng)
    q = rng.standard_normal((n, 4))
    return matrix_from_quat(q)


# --------------------------------------------------------------------------
# Axis-angle / exponential map


def _sinc_cosc(theta_sq):
    """Return ``sin(t)/t`` and ``(1 - cos t)/t**2`` for ``t**2 = theta_sq``."""
    s = _f64(theta_sq)
    small = s < _SERIES_CUTOFF
    t = np.sqrt(np.where(small, 1.0, s))
    a = np.where(small, 1.0 - s / 6.0 + s * s / 120.0 - s**3 / 5040.0, np.sin(t) / t)
    b = np.where(small, 0.5 - s / 24.0 + s * s / 720.0 - s**3 / 40320.0, (1.0 - np.cos(t)) / np.where(small, 1.0, s))
    return a, b


def matrix_from_axis_angle(w):
    """Exponential map ``so(3) -> SO(3)`` (Rodrigues' formula)."""
    w = _f64(w)
    theta_sq = np.sum(w * w, axis=-1)
    a, b = _sinc_cosc(theta_sq)
    k = skew(w)
    return np.eye(3) + a[..., None, None] * k + b[..., None, None] * (k @ k)


def axis_angle_from_matrix(r):
    """Logarithm map ``SO(3) -> so(3)``, returning ``theta * axis``.

    The angle is taken from ``atan2(sin, cos)`` of the skew and trace parts,
    which equals the arccos form but stays accurate near 0. Angles below
    ``SMALL_ANGLE`` map to the zero vector; within ``NEAR_PI`` of pi the axis
    is read from the symmetric part, where the skew part vanishes.
    """
    r = _f64(r)
    v = 2.0 * vee(r)  # = 2 sin(theta) * axis
    sin_t = 0.5 * np.linalg.norm(v, axis=-1)
    cos_t = np.clip((np.trace(r, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arctan2(sin_t, cos_t)

    safe_sin = np.where(sin_t > 0, sin_t, 1.0)
    general = (theta / (2.0 * safe_sin))[..., None] * v

    # (R + R^T)/2 - cos(t) I = (1 - cos t) u u^T
    sym = 0.5 * (r + np.swapaxes(r, -1, -2)) - cos_t[..., None, None] * np.eye(3)
    diag = np.diagonal(sym, axis1=-2, axis2=-1)
    k = np.argmax(diag, axis=-1)
    col = np.take_along_axis(sym, k[..., None, None], axis=-1)[..., 0]
    axis = col / np.maximum(np.linalg.norm(col, axis=-1, keepdims=True), 1e-300)
    flip = np.sum(axis * v, axis=-1) < 0
    axis = np.where(flip[..., None], -axis, axis)
    near_pi = theta[..., None] * axis

    out = np.where((np.pi - theta > NEAR_PI)[..., None], general, near_pi)
    return np.where((theta < SMALL_ANGLE)[..., None], 0.0, out)


# --------------------------------------------------------------------------
# Quaternions


def canonical_quat(q):
    """Normalize and flip to a non-negative scalar part."""
    q = _f64(q)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return np.where((q[..., :1] < 0), -q, q)


def quat_from_axis_angle(w):
    w = _f64(w)
    theta_sq = np.sum(w * w, axis=-1)
    theta = np.sqrt(theta_sq)
    small = theta_sq < _SERIES_CUTOFF
    # sin(theta/2) / theta
    half_sinc = np.where(
        small,
        0.5 - theta_sq / 48.0 + theta_sq**2 / 3840.0,
        np.sin(theta / 2.0) / np.where(small, 1.0, theta),
    )
    q = np.concatenate([np.cos(theta / 2.0)[..., None], half_sinc[..., None] * w], axis=-1)
    return canonical_quat(q)


def axis_angle_from_quat(q):
    q = canonical_quat(q)
    vec = q[..., 1:]
    n = np.linalg.norm(vec, axis=-1)
    theta = 2.0 * np.arctan2(n, q[..., 0])
    safe_n = np.where(n > 0, n, 1.0)
    # theta / n -> 2 / w as n -> 0
    scale = np.where(n > 1e-12, theta / safe_n, 2.0 / np.maximum(q[..., 0], 1e-300))
    return scale[..., None] * vec


def matrix_from_quat(q):
    """Rotation matrix of a (not necessarily unit) quaternion."""
    q = _f64(q)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rows = [
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def quat_from_matrix(r):
    """Shepperd's method: pick the best-conditioned of four square roots."""
    r = _f64(r)
    tr = np.trace(r, axis1=-2, axis2=-1)
    d0, d1, d2 = r[..., 0, 0], r[..., 1, 1], r[..., 2, 2]
    cand = np.stack([tr, d0, d1, d2], axis=-1)
    k = np.argmax(cand, axis=-1)

    s0 = np.sqrt(np.maximum(1.0 + tr, 1e-300)) * 2.0
    q0 = np.stack(
        [0.25 * s0, (r[..., 2, 1] - r[..., 1, 2]) / s0, (r[..., 0, 2] - r[..., 2, 0]) / s0, (r[..., 1, 0] - r[..., 0, 1]) / s0],
        axis=-1,
    )
    s1 = np.sqrt(np.maximum(1.0 + d0 - d1 - d2, 1e-300)) * 2.0
    q1 = np.stack(
        [(r[..., 2, 1] - r[..., 1, 2]) / s1, 0.25 * s1, (r[..., 0, 1] + r[..., 1, 0]) / s1, (r[..., 0, 2] + r[..., 2, 0]) / s1],
        axis=-1,
    )
    s2 = np.sqrt(np.maximum(1.0 - d0 + d1 - d2, 1e-300)) * 2.0
    q2 = np.stack(
        [(r[..., 0, 2] - r[..., 2, 0]) / s2, (r[..., 0, 1] + r[..., 1, 0]) / s2, 0.25 * s2, (r[..., 1, 2] + r[..., 2, 1]) / s2],
        axis=-1,
    )
    s3 = np.sqrt(np.maximum(1.0 - d0 - d1 + d2, 1e-300)) * 2.0
    q3 = np.stack(
        [(r[..., 1, 0] - r[..., 0, 1]) / s3, (r[..., 0, 2] + r[..., 2, 0]) / s3, (r[..., 1, 2] + r[..., 2, 1]) / s3, 0.25 * s3],
        axis=-1,
    )
    q = np.choose(k[..., None], [q0, q1, q2, q3])
    return canonical_quat(q)


# --------------------------------------------------------------------------
# Stiefel manifold V2(R^3)


def stiefel_from_matrix(r):
    r = _f64(r)
    return np.concatenate([r[..., :, 0], r[..., :, 1]], axis=-1)


def matrix_from_stiefel(s):
    """Gram-Schmidt the two columns, then complete with their cross product.

    Raises
    ------
    DegenerateStiefel
        If the first column is (near) zero or the two columns are parallel.
    """
    s = _f64(s)
    a1, a2 = s[..., :3], s[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 <= 1e-8):
        raise DegenerateStiefel("first column has norm <= 1e-8")
    e1 = a1 / n1
    n2 = np.linalg.norm(a2, axis=-1, keepdims=True)
    cos12 = np.abs(np.sum(e1 * a2, axis=-1, keepdims=True)) / np.where(n2 > 0, n2, 1.0)
    if np.any((n2 <= 1e-8) | (cos12 > 1.0 - 1e-8)):
        raise DegenerateStiefel("columns are parallel")
    b2 = a2 - np.sum(e1 * a2, axis=-1, keepdims=True) * e1
    e2 = b2 / np.linalg.norm(b2, axis=-1, keepdims=True)
    e3 = np.cross(e1, e2)
    return np.stack([e1, e2, e3], axis=-1)


# --------------------------------------------------------------------------
# Euler angles, intrinsic Z-Y-X


def _wrap_half_open(a):
    """Map angles from [-pi, pi] to (-pi, pi]."""
    return np.where(a <= -np.pi, a + 2.0 * np.pi, a)


def wrap_angle(a):
    """Wrap arbitrary angles into (-pi, pi]."""
    a = _f64(a)
    return _wrap_half_open(np.mod(a + np.pi, 2.0 * np.pi) - np.pi)


def matrix_from_euler(e):
    e = _f64(e)
    cy, sy = np.cos(e[..., 0]), np.sin(e[..., 0])
    cp, sp = np.cos(e[..., 1]), np.sin(e[..., 1])
    cr, sr = np.cos(e[..., 2]), np.sin(e[..., 2])
    rows = [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def euler_from_matrix(r):
    """Decompose into ``(yaw, pitch, roll)``; at gimbal lock yaw is set to 0."""
    r = _f64(r)
    cp = np.hypot(r[..., 0, 0], r[..., 1, 0])
    pitch = np.arctan2(-r[..., 2, 0], cp)
    locked = cp < _GIMBAL_EPS
    yaw = np.where(locked, 0.0, np.arctan2(r[..., 1, 0], r[..., 0, 0]))
    roll = np.where(
        locked,
        np.arctan2(-r[..., 1, 2], r[..., 1, 1]),
        np.arctan2(r[..., 2, 1], r[..., 2, 2]),
    )
    return np.stack([_wrap_half_open(yaw), pitch, _wrap_half_open(roll)], axis=-1)


# --------------------------------------------------------------------------
# Distances and rigid transforms


def geodesic_distance(r1, r2):
    """Smallest rotation angle between ``r1`` and ``r2``, in ``[0, pi]``.

    Evaluated as ``atan2`` of the sine and (clamped) cosine parts of
    ``r1 @ r2.T``; this is the arccos-of-trace formula without its loss of
    precision for nearly equal rotations.
    """
    m = _f64(r1) @ np.swapaxes(_f64(r2), -1, -2)
    cos_t = np.clip((np.trace(m, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    sin_t = np.linalg.norm(vee(m), axis=-1)
    return np.arctan2(sin_t, cos_t)


@dataclass(frozen=True)
class RigidTransform:
    """Element of SE(3): ``x -> rot @ x + t``."""

    rot: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rot", _f64(self.rot).reshape(3, 3))
        object.__setattr__(self, "t", _f64(self.t).reshape(3))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m):
        m = _f64(m)
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self):
        g = np.eye(4)
        g[:3, :3] = self.rot
        g[:3, 3] = self.t
        return g

    def __matmul__(self, other):
        return compose(self, other)


def apply_transform(g: RigidTransform, x):
    """Apply ``g`` to points of shape ``(..., 3)``."""
    return _f64(x) @ g.rot.T + g.t


def compose(g1: RigidTransform, g2: RigidTransform) -> RigidTransform:
    """``g1 @ g2``: apply ``g2`` first, then ``g1``."""
    return RigidTransform(g1.rot @ g2.rot, g1.rot @ g2.t + g1.t)
