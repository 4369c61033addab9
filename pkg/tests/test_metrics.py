import io

import numpy as np
import pytest

from _shared import two_bone_x
from kinemotion import metrics
from kinemotion import rotation as rt
from kinemotion.errors import ShapeMismatch
from kinemotion.skeleton import PoseSequence, preset

RNG = np.random.default_rng(31)


def seq(rot, trans=None):
    rot = np.asarray(rot)
    return PoseSequence(np.zeros((len(rot), 3)) if trans is None else trans, rot)


def rand_seq(frames, bones):
    return seq(rt.random_rotations(frames * bones, RNG).reshape(frames, bones, 3, 3))


def test_mae_identical_is_zero():
    a = rand_seq(5, 4)
    assert np.array_equal(metrics.mae(a, a), np.zeros(5))


def test_mae_vector_norm_example():
    target = np.broadcast_to(np.eye(3), (1, 2, 3, 3))
    pred = np.stack([np.eye(3), rt.matrix_from_euler([0.3, 0.4, 0.0])])[None]
    assert metrics.mae(pred, target)[0] == pytest.approx(0.5, abs=1e-12)
    assert metrics.mae(pred, target, form="summed")[0] == pytest.approx(0.7, abs=1e-12)
    assert metrics.mae(pred, target, reduction="norm")[0] == pytest.approx(0.5, abs=1e-12)


def test_summed_form_cancels_opposite_errors():
    target = np.broadcast_to(np.eye(3), (1, 2, 3, 3))
    pred = np.stack([np.eye(3), rt.matrix_from_euler([0.3, -0.3, 0.0])])[None]
    assert metrics.mae(pred, target, form="summed")[0] == pytest.approx(0.0, abs=1e-12)
    assert metrics.mae(pred, target)[0] > 0.4


def test_mae_wraps_angles():
    a = rt.matrix_from_euler(np.array([[[0, 0, 0], [np.pi - 0.01, 0, 0]]]))
    b = rt.matrix_from_euler(np.array([[[0, 0, 0], [-np.pi + 0.01, 0, 0]]]))
    assert metrics.mae(a, b)[0] == pytest.approx(0.02, abs=1e-9)


def test_mae_root_exclusion_exact():
    a, b = rand_seq(6, 4), rand_seq(6, 4)
    base = metrics.mae(a, b)
    for target in (a, b):
        target.rotations[:, 0] = rt.random_rotations(6, RNG)
        assert np.array_equal(metrics.mae(a, b), base)
    assert not np.array_equal(metrics.mae(a, b, include_root=True), base)


def test_mae_symmetric_nonnegative():
    a, b = rand_seq(8, 5), rand_seq(8, 5)
    assert np.allclose(metrics.mae(a, b), metrics.mae(b, a), atol=1e-12)
    assert np.all(metrics.mae(a, b) >= 0)


def test_mae_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        metrics.mae(rand_seq(3, 2), rand_seq(4, 2))


def test_mpe_examples():
    spec = two_bone_x()
    target = np.broadcast_to(np.eye(3), (1, 2, 3, 3))
    pred = np.stack([np.eye(3), rt.rot_z(np.pi / 2)])[None]
    assert metrics.mpe(pred, target, spec)[0] == pytest.approx(np.sqrt(2) / 2, abs=1e-12)
    assert metrics.mpe(pred, target, spec)[0] == pytest.approx(0.70711, abs=1e-5)
    a = seq(pred, RNG.normal(size=(1, 3)))
    b = seq(pred, RNG.normal(size=(1, 3)))
    assert metrics.mpe(a, b, spec)[0] == 0.0


def test_mpe_properties():
    spec = preset("mouse")
    a, b = rand_seq(5, 4), rand_seq(5, 4)
    assert np.allclose(metrics.mpe(a, b, spec), metrics.mpe(b, a, spec))
    assert np.all(metrics.mpe(a, b, spec) >= 0) and np.all(metrics.mpe(a, a, spec) == 0)
    moved = seq(a.rotations, a.translations + 3.0)
    assert np.array_equal(metrics.mpe(moved, b, spec), metrics.mpe(a, b, spec))


def test_zero_velocity():
    a = rand_seq(7, 3)
    z = metrics.zero_velocity(a, 4)
    assert len(z) == 4 and all(np.array_equal(z.rotations[i], a.rotations[-1]) for i in range(4))
    const = seq(np.broadcast_to(a.rotations[:1], (9, 3, 3, 3)).copy())
    assert np.array_equal(metrics.mae(metrics.zero_velocity(const[:5], 4), const[5:]), np.zeros(4))
    with pytest.raises(ValueError):
        metrics.zero_velocity(a, 0)


def test_horizon_frames():
    assert metrics.horizon_frames(25) == [1, 3, 7, 9, 24]
    assert metrics.horizon_frames(50) == [3, 7, 15, 19, 49]
    assert metrics.at_horizons(np.arange(10.0), 25) == {80: 1.0, 160: 3.0, 320: 7.0, 400: 9.0}


def test_standard_error_transposed_convention():
    a, b = rand_seq(10, 4), rand_seq(10, 4)
    err = metrics.standard_euler_error(a, b)
    ea = rt.euler_from_matrix(np.swapaxes(a.rotations, -1, -2))[:, 1:].reshape(10, -1)
    eb = rt.euler_from_matrix(np.swapaxes(b.rotations, -1, -2))[:, 1:].reshape(10, -1)
    assert np.allclose(err, np.sqrt(((ea - eb) ** 2).sum(axis=1)))
    assert np.all(metrics.standard_euler_error(a, a) == 0)


def test_tables():
    rows = [
        {"method": "zero_velocity", "metric": "mae", "action": "walking", "horizon_ms": 80, "value": 0.39},
        {"method": "zero_velocity", "metric": "mae", "action": "walking", "horizon_ms": 160, "value": 0.68},
    ]
    buf = io.StringIO()
    metrics.write_metrics_csv(rows, buf)
    assert buf.getvalue().splitlines()[0] == "method,metric,action,horizon_ms,value"
    table = metrics.format_table(rows)
    assert "80ms" in table and "0.390" in table and "0.680" in table
