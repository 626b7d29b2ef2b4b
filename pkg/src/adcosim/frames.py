"""Body-frame and attitude conversions between the two vehicle conventions.

The dynamics side expresses body vectors in FLU (x forward, y left, z up);
the ADS side uses RFU (x right, y front, z up). Euler angles follow the
intrinsic Z-Y-X (yaw, pitch, roll) vehicle convention. Quaternions are
(w, x, y, z) with canonical sign w >= 0. Angles are radians; every transform
normalizes angle outputs to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

_TWO_PI = 2.0 * math.pi

# |pitch| closer than this to pi/2 is treated as gimbal lock.
GIMBAL_LOCK_PITCH_TOL = 1e-6


class FrameTag(Enum):
    DYNAMICS_FLU = "dynamics_flu"
    ADS_RFU = "ads_rfu"


def wrap_angle(a: float) -> float:
    """Normalize an angle to the half-open interval (-pi, pi].

    Values already in range pass through bit-exactly; the modulo round trip
    would otherwise cost an ulp.
    """
    if -math.pi < a <= math.pi:
        return a
    a = a % _TWO_PI
    if a > math.pi:
        a -= _TWO_PI
    return a


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self.as_tuple())


@dataclass(frozen=True)
class EulerAngles:
    """Roll, pitch, yaw in radians."""

    roll: float
    pitch: float
    yaw: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.roll, self.pitch, self.yaw)

    def wrapped(self) -> "EulerAngles":
        return EulerAngles(wrap_angle(self.roll), wrap_angle(self.pitch), wrap_angle(self.yaw))

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self.as_tuple())


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)

    def canonical(self) -> "Quaternion":
        """Flip sign so that w >= 0 (q and -q encode the same rotation)."""
        if self.w < 0.0:
            return Quaternion(-self.w, -self.x, -self.y, -self.z)
        return self


@dataclass(frozen=True)
class Pose:
    position: Vec3
    orientation: Quaternion
    frame: FrameTag


def flu_to_rfu(v: Vec3) -> Vec3:
    """Map a body vector from FLU to RFU coordinates.

    Equivalent to multiplying by [[0, -1, 0], [1, 0, 0], [0, 0, 1]].
    """
    return Vec3(-v.y, v.x, v.z)


def rfu_to_flu(v: Vec3) -> Vec3:
    """Inverse of :func:`flu_to_rfu` (transpose of the same matrix)."""
    return Vec3(v.y, -v.x, v.z)


def euler_cm_to_apollo(e: EulerAngles) -> EulerAngles:
    """Remap dynamics-side Euler angles to the ADS-side convention.

    Applies the fixed matrix [[0, 0, 1], [-1, 0, 0], [0, -1, 0]] followed by a
    (0, 0, -pi/2) offset, then wraps each component to (-pi, pi].
    """
    return EulerAngles(
        wrap_angle(e.yaw),
        wrap_angle(-e.roll),
        wrap_angle(-e.pitch - math.pi / 2.0),
    )


def euler_apollo_to_cm(e: EulerAngles) -> EulerAngles:
    """Inverse of :func:`euler_cm_to_apollo` up to angle normalization."""
    yaw_shifted = e.yaw + math.pi / 2.0
    return EulerAngles(
        wrap_angle(-e.pitch),
        wrap_angle(-yaw_shifted),
        wrap_angle(e.roll),
    )


def euler_to_quaternion(e: EulerAngles) -> Quaternion:
    """Quaternion for the intrinsic Z-Y-X (yaw, pitch, roll) rotation."""
    cy = math.cos(e.yaw * 0.5)
    sy = math.sin(e.yaw * 0.5)
    cp = math.cos(e.pitch * 0.5)
    sp = math.sin(e.pitch * 0.5)
    cr = math.cos(e.roll * 0.5)
    sr = math.sin(e.roll * 0.5)
    q = Quaternion(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )
    return q.canonical()


def quaternion_to_euler(q: Quaternion) -> tuple[EulerAngles, bool]:
    """Decompose a unit quaternion into Z-Y-X Euler angles.

    Returns ``(angles, gimbal_locked)``. Near pitch = +/-pi/2 the yaw/roll
    split is degenerate; yaw is set to 0 by convention and the flag is True.
    """
    n = q.norm()
    if n == 0.0 or not math.isfinite(n):
        raise ValueError("quaternion must have finite nonzero norm")
    w, x, y, z = (c / n for c in q.as_tuple())

    sinp = 2.0 * (w * y - x * z)
    sinp = max(-1.0, min(1.0, sinp))
    pitch = math.asin(sinp)

    if math.pi / 2.0 - abs(pitch) < GIMBAL_LOCK_PITCH_TOL:
        # Only roll -/+ yaw is observable; put everything into roll.
        r01 = 2.0 * (x * y - w * z)
        r11 = 1.0 - 2.0 * (x * x + z * z)
        if pitch > 0.0:
            roll = math.atan2(r01, r11)
        else:
            roll = math.atan2(-r01, r11)
        return EulerAngles(wrap_angle(roll), pitch, 0.0), True

    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return EulerAngles(wrap_angle(roll), pitch, wrap_angle(yaw)), False
