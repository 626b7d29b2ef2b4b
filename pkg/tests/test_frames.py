import math
import random

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from adcosim.frames import (
    EulerAngles,
    Quaternion,
    Vec3,
    euler_apollo_to_cm,
    euler_cm_to_apollo,
    euler_to_quaternion,
    flu_to_rfu,
    quaternion_to_euler,
    rfu_to_flu,
    wrap_angle,
)

FLU_TO_RFU_MAT = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
EULER_REMAP_MAT = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
EULER_OFFSET = np.array([0.0, 0.0, -math.pi / 2.0])


def matmul_oracle(mat, v):
    return tuple(mat @ np.asarray(v, dtype=float))


def scipy_quat(e: EulerAngles) -> tuple[float, float, float, float]:
    # scipy returns (x, y, z, w); reorder and canonicalize to w >= 0.
    x, y, z, w = Rotation.from_euler("ZYX", [e.yaw, e.pitch, e.roll]).as_quat()
    if w < 0:
        w, x, y, z = -w, -x, -y, -z
    return (w, x, y, z)


def test_flu_to_rfu_axis_columns():
    assert flu_to_rfu(Vec3(1, 0, 0)) == Vec3(0, 1, 0)
    assert flu_to_rfu(Vec3(0, 1, 0)) == Vec3(-1, 0, 0)


def test_flu_to_rfu_matches_matrix_oracle():
    got = flu_to_rfu(Vec3(3, 4, 5))
    assert got.as_tuple() == matmul_oracle(FLU_TO_RFU_MAT, (3, 4, 5))
    assert got == Vec3(-4, 3, 5)


def test_rfu_to_flu_examples():
    assert rfu_to_flu(Vec3(0, 1, 0)) == Vec3(1, 0, 0)
    assert rfu_to_flu(Vec3(0, 0, 1)) == Vec3(0, 0, 1)
    got = rfu_to_flu(Vec3(-4, 3, 5))
    assert got.as_tuple() == matmul_oracle(FLU_TO_RFU_MAT.T, (-4, 3, 5))
    assert got == Vec3(3, 4, 5)


def test_flu_rfu_round_trip_exact():
    rng = random.Random(7)
    for _ in range(1000):
        v = Vec3(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100))
        assert rfu_to_flu(flu_to_rfu(v)) == v


def test_flu_to_rfu_preserves_norm():
    rng = random.Random(8)
    for _ in range(1000):
        v = Vec3(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50))
        assert abs(flu_to_rfu(v).norm() - v.norm()) < 1e-12


def euler_remap_oracle(e: EulerAngles) -> tuple[float, float, float]:
    out = EULER_REMAP_MAT @ np.array(e.as_tuple()) + EULER_OFFSET
    return tuple(wrap_angle(c) for c in out)


def test_euler_cm_to_apollo_examples():
    assert euler_cm_to_apollo(EulerAngles(0, 0, 0)) == EulerAngles(0, 0, -math.pi / 2)

    got = euler_cm_to_apollo(EulerAngles(0, 0, math.pi / 2))
    assert got.as_tuple() == pytest.approx(euler_remap_oracle(EulerAngles(0, 0, math.pi / 2)), abs=1e-15)
    assert got.as_tuple() == pytest.approx((math.pi / 2, 0.0, -math.pi / 2), abs=1e-15)

    got = euler_cm_to_apollo(EulerAngles(0.1, 0.2, 0.3))
    assert got.as_tuple() == pytest.approx(euler_remap_oracle(EulerAngles(0.1, 0.2, 0.3)), abs=1e-15)
    assert got.as_tuple() == pytest.approx((0.3, -0.1, -0.2 - math.pi / 2), abs=1e-15)


def test_euler_apollo_to_cm_examples():
    assert euler_apollo_to_cm(EulerAngles(0, 0, -math.pi / 2)) == EulerAngles(0, 0, 0)
    got = euler_apollo_to_cm(EulerAngles(math.pi / 2, 0, -math.pi / 2))
    assert got.as_tuple() == pytest.approx((0.0, 0.0, math.pi / 2), abs=1e-15)
    got = euler_apollo_to_cm(EulerAngles(0.3, -0.1, -0.2 - math.pi / 2))
    assert got.as_tuple() == pytest.approx((0.1, 0.2, 0.3), abs=1e-15)


def test_euler_remap_round_trip():
    rng = random.Random(11)
    for _ in range(1000):
        e = EulerAngles(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3))
        back = euler_apollo_to_cm(euler_cm_to_apollo(e))
        for a, b in zip(back.as_tuple(), e.wrapped().as_tuple()):
            assert abs(wrap_angle(a - b)) < 1e-12


def test_euler_to_quaternion_identity():
    assert euler_to_quaternion(EulerAngles(0, 0, 0)) == Quaternion(1, 0, 0, 0)


def test_euler_to_quaternion_examples_vs_scipy():
    e = EulerAngles(0, 0, -math.pi / 2)
    q = euler_to_quaternion(e)
    assert q.as_tuple() == pytest.approx(scipy_quat(e), abs=1e-12)
    assert q.as_tuple() == pytest.approx((0.7071068, 0, 0, -0.7071068), abs=1e-7)

    e = EulerAngles(math.pi, 0, 0)
    q = euler_to_quaternion(e)
    assert q.as_tuple() == pytest.approx(scipy_quat(e), abs=1e-12)
    assert q.as_tuple() == pytest.approx((0, 1, 0, 0), abs=1e-12)
    assert q.w >= 0


def test_quaternion_norm_and_canonical_sign():
    rng = random.Random(13)
    for _ in range(1000):
        e = EulerAngles(rng.uniform(-math.pi, math.pi), rng.uniform(-1.5, 1.5), rng.uniform(-math.pi, math.pi))
        q = euler_to_quaternion(e)
        assert abs(q.norm() - 1.0) < 1e-9
        assert q.w >= 0.0


def test_quaternion_to_euler_examples():
    angles, locked = quaternion_to_euler(Quaternion(1, 0, 0, 0))
    assert not locked
    assert angles == EulerAngles(0, 0, 0)

    s = math.sqrt(0.5)
    angles, locked = quaternion_to_euler(Quaternion(s, 0, 0, -s))
    assert not locked
    assert angles.as_tuple() == pytest.approx((0, 0, -math.pi / 2), abs=1e-12)


def test_quaternion_to_euler_gimbal_lock():
    # Pure pitch of +pi/2 built from half-angle construction.
    s = math.sin(math.pi / 4)
    c = math.cos(math.pi / 4)
    angles, locked = quaternion_to_euler(Quaternion(c, 0, s, 0))
    assert locked
    assert angles.yaw == 0.0
    assert angles.pitch == pytest.approx(math.pi / 2, abs=1e-9)
    assert angles.roll == pytest.approx(0.0, abs=1e-9)


def test_euler_quaternion_round_trip_off_gimbal_lock():
    rng = random.Random(17)
    for _ in range(1000):
        e = EulerAngles(
            rng.uniform(-math.pi, math.pi),
            rng.uniform(-(math.pi / 2 - 0.01), math.pi / 2 - 0.01),
            rng.uniform(-math.pi, math.pi),
        )
        back, locked = quaternion_to_euler(euler_to_quaternion(e))
        assert not locked
        for a, b in zip(back.as_tuple(), e.as_tuple()):
            assert abs(wrap_angle(a - b)) < 1e-9


def test_rotation_matrix_equivalence():
    # Quaternion-derived rotation matrix equals the Euler-derived one,
    # both built by scipy as the independent reference.
    rng = random.Random(19)
    for _ in range(200):
        e = EulerAngles(rng.uniform(-math.pi, math.pi), rng.uniform(-1.5, 1.5), rng.uniform(-math.pi, math.pi))
        q = euler_to_quaternion(e)
        r_from_quat = Rotation.from_quat([q.x, q.y, q.z, q.w]).as_matrix()
        r_from_euler = Rotation.from_euler("ZYX", [e.yaw, e.pitch, e.roll]).as_matrix()
        assert np.allclose(r_from_quat, r_from_euler, atol=1e-9)


def test_wrap_angle_half_open_interval():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.0) == 0.0
