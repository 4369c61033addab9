import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation as SciRot

from _shared import R1_ROUNDED
from kinemotion import rotation as rt
from kinemotion.errors import DegenerateStiefel

RNG = np.random.default_rng(7)
ROTS = rt.random_rotations(1000, RNG)

vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)
quat4 = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).map(np.array).filter(
    lambda q: np.linalg.norm(q) > 1e-3
)


def assert_rotation(m):
    m = np.asarray(m)
    eye = np.broadcast_to(np.eye(3), m.shape)
    assert np.allclose(np.swapaxes(m, -1, -2) @ m, eye, atol=1e-9)
    assert np.allclose(np.linalg.det(m), 1.0, atol=1e-9)


# axis-angle


def test_axis_angle_identity():
    assert np.array_equal(rt.axis_angle_from_matrix(np.eye(3)), np.zeros(3))


def test_axis_angle_rot_x_quarter():
    r = np.array([[1.0, 0, 0], [0, 0, -1], [0, 1, 0]])
    assert np.allclose(rt.axis_angle_from_matrix(r), [np.pi / 2, 0, 0], atol=1e-12)


def test_axis_angle_of_rounded_matrix():
    assert np.trace(R1_ROUNDED) == pytest.approx(2.46)
    theta = np.linalg.norm(rt.axis_angle_from_matrix(rt.nearest_rotation(R1_ROUNDED)))
    assert theta == pytest.approx(np.arccos(0.73), abs=0.02)


def test_exp_map_zero_and_pi():
    assert np.allclose(rt.matrix_from_axis_angle(np.zeros(3)), np.eye(3))
    assert np.allclose(rt.matrix_from_axis_angle([np.pi, 0, 0]), np.diag([1.0, -1.0, -1.0]), atol=1e-12)


def test_exp_map_matches_scipy():
    w = RNG.normal(size=(200, 3)) * 2
    assert np.allclose(rt.matrix_from_axis_angle(w), SciRot.from_rotvec(w).as_matrix(), atol=1e-12)


def test_axis_angle_round_trip_restricted_range():
    w = rt.axis_angle_from_matrix(ROTS)
    theta = np.linalg.norm(w, axis=-1)
    keep = (theta > 1e-3) & (theta < np.pi - 1e-3)
    assert np.abs(rt.matrix_from_axis_angle(w[keep]) - ROTS[keep]).max() < 1e-8
    assert np.all(theta <= np.pi + 1e-12)


def test_axis_angle_near_pi_and_tiny():
    for theta in (np.pi, np.pi - 1e-6, np.pi - 5e-4, 1e-9, 1e-5):
        axis = np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5])
        r = rt.matrix_from_axis_angle(theta * axis)
        back = rt.matrix_from_axis_angle(rt.axis_angle_from_matrix(r))
        assert np.abs(back - r).max() < 1e-8


@settings(max_examples=200, deadline=None)
@given(vec3)
def test_exp_map_is_rotation(w):
    assert_rotation(rt.matrix_from_axis_angle(w))


# quaternions


def test_quat_examples():
    assert np.allclose(rt.quat_from_axis_angle(np.zeros(3)), [1, 0, 0, 0])
    q = rt.quat_from_axis_angle([0, 0, np.pi / 2])
    assert np.allclose(q, [np.sqrt(0.5), 0, 0, np.sqrt(0.5)], atol=1e-12)
    assert np.allclose(rt.axis_angle_from_quat(q), [0, 0, np.pi / 2], atol=1e-12)
    assert np.allclose(rt.axis_angle_from_quat([1.0, 0, 0, 0]), 0)
    assert np.allclose(rt.axis_angle_from_quat([-1.0, 0, 0, 0]), 0)


def test_quat_round_trip_and_scipy():
    q = rt.quat_from_matrix(ROTS)
    assert np.abs(rt.matrix_from_quat(q) - ROTS).max() < 1e-8
    sq = SciRot.from_matrix(ROTS).as_quat()  # (x, y, z, w)
    sq = np.concatenate([sq[:, 3:], sq[:, :3]], axis=1)
    sq *= np.where(sq[:, :1] < 0, -1.0, 1.0)
    assert np.allclose(q, sq, atol=1e-10)
    assert np.all(q[:, 0] >= 0)


@settings(max_examples=200, deadline=None)
@given(quat4)
def test_double_cover(q):
    q = q / np.linalg.norm(q)
    a = rt.matrix_from_axis_angle(rt.axis_angle_from_quat(q))
    b = rt.matrix_from_axis_angle(rt.axis_angle_from_quat(-q))
    assert np.abs(a - b).max() < 1e-9
    assert np.abs(rt.matrix_from_quat(q) - rt.matrix_from_quat(-q)).max() < 1e-9


# Stiefel


def test_stiefel_examples():
    assert np.array_equal(rt.stiefel_from_matrix(np.eye(3)), [1, 0, 0, 0, 1, 0])
    assert np.allclose(rt.stiefel_from_matrix(rt.rot_z(np.pi / 2)), [0, 1, 0, -1, 0, 0], atol=1e-15)
    assert np.allclose(rt.matrix_from_stiefel([1, 0, 0, 0, 1, 0]), np.eye(3))
    assert np.allclose(rt.matrix_from_stiefel([2, 0, 0, 0, 3, 0]), np.eye(3))
    assert np.allclose(rt.matrix_from_stiefel([1, 0, 0, 1, 1, 0]), np.eye(3))


def test_stiefel_round_trip():
    assert np.abs(rt.matrix_from_stiefel(rt.stiefel_from_matrix(ROTS)) - ROTS).max() < 1e-9


def test_stiefel_degenerate():
    with pytest.raises(DegenerateStiefel):
        rt.matrix_from_stiefel([0, 0, 0, 0, 1, 0])
    with pytest.raises(DegenerateStiefel):
        rt.matrix_from_stiefel([1, 0, 0, 2, 0, 0])


@settings(max_examples=200, deadline=None)
@given(vec3, vec3)
def test_stiefel_orthonormalizes(a, b):
    na = np.linalg.norm(a)
    if na <= 1e-6 or np.linalg.norm(b) <= 1e-6 or abs(a @ b) / (na * np.linalg.norm(b)) > 1 - 1e-6:
        return
    m = rt.matrix_from_stiefel(np.concatenate([a, b]))
    assert_rotation(m)
    assert np.allclose(m[:, 0], a / na)


# Euler angles


def test_euler_examples():
    assert np.allclose(rt.euler_from_matrix(np.eye(3)), 0)
    assert np.allclose(rt.euler_from_matrix(rt.rot_z(0.3)), [0.3, 0, 0])


def test_euler_gimbal_lock():
    for pitch in (np.pi / 2, -np.pi / 2):
        r = rt.matrix_from_euler([0.4, pitch, -0.7])
        e = rt.euler_from_matrix(r)
        assert e[0] == 0.0
        assert np.abs(rt.matrix_from_euler(e) - r).max() < 1e-8


def test_euler_matches_scipy_and_round_trips():
    e = rt.euler_from_matrix(ROTS)
    ok = np.abs(e[:, 1]) < np.pi / 2 - 1e-3
    assert np.abs(rt.matrix_from_euler(e[ok]) - ROTS[ok]).max() < 1e-8
    assert np.allclose(e[ok], SciRot.from_matrix(ROTS[ok]).as_euler("ZYX"), atol=1e-9)
    assert np.all((e[:, 0] > -np.pi) & (e[:, 0] <= np.pi)) and np.all(np.abs(e[:, 1]) <= np.pi / 2)


def test_wrap_angle_half_open():
    assert rt.wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert rt.wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    assert rt.wrap_angle(0.1 - 2 * np.pi) == pytest.approx(0.1)


# rigid transforms


def test_rigid_transform_examples():
    ident = rt.RigidTransform.identity()
    assert np.allclose(rt.apply_transform(ident, [1, 2, 3]), [1, 2, 3])
    g = rt.RigidTransform(np.eye(3), np.array([1.0, 0, 0]))
    assert np.allclose(rt.apply_transform(g, np.zeros(3)), [1, 0, 0])


def test_compose_matches_homogeneous_product():
    rots = rt.random_rotations(2000, RNG)
    ts = RNG.normal(size=(2000, 3))
    xs = RNG.normal(size=(1000, 3))
    for i in range(1000):
        g1 = rt.RigidTransform(rots[i], ts[i])
        g2 = rt.RigidTransform(rots[1000 + i], ts[1000 + i])
        lhs = rt.apply_transform(rt.compose(g1, g2), xs[i])
        rhs = rt.apply_transform(g1, rt.apply_transform(g2, xs[i]))
        assert np.abs(lhs - rhs).max() < 1e-10
        assert np.allclose((g1 @ g2).as_matrix(), g1.as_matrix() @ g2.as_matrix(), atol=1e-12)


# geodesic distance


def test_geodesic_examples():
    assert rt.geodesic_distance(ROTS[0], ROTS[0]) == pytest.approx(0, abs=1e-7)
    assert rt.geodesic_distance(np.eye(3), rt.rot_x(np.pi / 2)) == pytest.approx(np.pi / 2, abs=1e-12)


def test_geodesic_properties():
    a, b = ROTS[:500], ROTS[500:]
    q = rt.random_rotations(500, RNG)
    d = rt.geodesic_distance(a, b)
    assert np.allclose(d, rt.geodesic_distance(b, a), atol=1e-12)
    assert np.all((d >= 0) & (d <= np.pi))
    assert np.allclose(rt.geodesic_distance(q @ a, q @ b), d, atol=1e-9)
    oracle = (SciRot.from_matrix(a).inv() * SciRot.from_matrix(b)).magnitude()
    assert np.allclose(d, oracle, atol=1e-9)
