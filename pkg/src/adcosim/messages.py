"""Payload schemas and the envelope shared by both pub/sub ecosystems.

Five payload kinds cross the converter bridge: startup, localization,
control, chassis, and sensor object lists. A sixth ``tick`` record is used
only by the harness barrier and never bridged.

Field values live in the unit regime of the dialect whose topic carries
them: Dialect A uses radians and [0, 1] actuator fractions, Dialect B uses
percent-of-max actuator values. The converter bridge, not the codecs,
performs unit conversion when relaying between the two sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntFlag

from .frames import Quaternion, Vec3, wrap_angle


class Dialect(str, Enum):
    A = "A"
    B = "B"


class Gear(str, Enum):
    P = "P"
    R = "R"
    N = "N"
    D = "D"


class TurnSignal(str, Enum):
    OFF = "off"
    LEFT = "left"
    RIGHT = "right"


class ObjectType(str, Enum):
    CAR = "car"
    TRUCK = "truck"
    UNKNOWN = "unknown"


class SensorStatus(str, Enum):
    OK = "ok"
    DEGRADED = "degraded"
    OFF = "off"


class Lamps(IntFlag):
    NONE = 0
    LEFT_TURN = 1
    RIGHT_TURN = 2
    HAZARD = 4


class InvalidPayload(ValueError):
    """A payload violates its schema invariants."""


@dataclass(frozen=True)
class StartupMsg:
    start_position: Vec3
    end_position: Vec3
    desired_speed: float
    startup_flag: bool


@dataclass(frozen=True)
class LocalizationMsg:
    position: Vec3
    orientation: Quaternion
    linear_velocity: Vec3
    linear_acceleration: Vec3
    angular_velocity: Vec3
    heading: float


@dataclass(frozen=True)
class ControlMsg:
    steering_rate: float
    steering_target: float
    throttle: float
    brake: float
    gear: Gear = Gear.D
    lamps: Lamps = Lamps.NONE


@dataclass(frozen=True)
class ChassisMsg:
    speed: float
    throttle: float
    brake: float
    steering: float
    steering_rate: float
    gear: Gear = Gear.D
    turn_signal: TurnSignal = TurnSignal.OFF


@dataclass(frozen=True)
class SensorObject:
    object_id: int
    position: Vec3
    velocity: Vec3
    heading: float
    length: float
    width: float
    height: float
    object_type: ObjectType = ObjectType.CAR


@dataclass(frozen=True)
class SensorObjectList:
    objects: tuple[SensorObject, ...]
    stamp_s: float
    sensor_status: SensorStatus = SensorStatus.OK


@dataclass(frozen=True)
class TickMsg:
    """Harness-internal barrier record; never relayed by the bridge."""

    index: int


Payload = StartupMsg | LocalizationMsg | ControlMsg | ChassisMsg | SensorObjectList | TickMsg


@dataclass(frozen=True)
class MessageEnvelope:
    seq: int
    stamp_s: float
    channel: str
    payload: Payload

    @classmethod
    def for_channel(cls, channel: str, stamp_s: float, payload: Payload) -> "MessageEnvelope":
        """Build an envelope awaiting bus sequence assignment (seq = 0)."""
        return cls(seq=0, stamp_s=stamp_s, channel=channel, payload=payload)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidPayload(msg)


def _require_finite_vec(v: Vec3, name: str) -> None:
    _require(isinstance(v, Vec3) and v.is_finite(), f"{name} must be a finite Vec3")


def _validate_startup(msg: StartupMsg) -> None:
    _require_finite_vec(msg.start_position, "start_position")
    _require_finite_vec(msg.end_position, "end_position")
    _require(math.isfinite(msg.desired_speed) and msg.desired_speed >= 0.0, "desired_speed must be >= 0")
    _require(msg.start_position != msg.end_position, "start and end positions must differ")


def _validate_localization(msg: LocalizationMsg) -> None:
    _require_finite_vec(msg.position, "position")
    _require_finite_vec(msg.linear_velocity, "linear_velocity")
    _require_finite_vec(msg.linear_acceleration, "linear_acceleration")
    _require_finite_vec(msg.angular_velocity, "angular_velocity")
    _require(math.isfinite(msg.heading), "heading must be finite")
    _require(-math.pi < msg.heading <= math.pi, "heading must lie in (-pi, pi]")
    _require(abs(msg.orientation.norm() - 1.0) < 1e-9, "orientation must be unit norm")


def _validate_control(msg: ControlMsg, dialect: Dialect) -> None:
    for name in ("steering_rate", "steering_target", "throttle", "brake"):
        _require(math.isfinite(getattr(msg, name)), f"{name} must be finite")
    _require(not (msg.throttle != 0.0 and msg.brake != 0.0), "throttle and brake must not both be nonzero")
    _require(isinstance(msg.gear, Gear), "gear must be a Gear")
    _require(isinstance(msg.lamps, Lamps), "lamps must be a Lamps bitfield")
    if dialect is Dialect.A:
        _require(0.0 <= msg.throttle <= 1.0, "A-side throttle must lie in [0, 1]")
        _require(0.0 <= msg.brake <= 1.0, "A-side brake must lie in [0, 1]")
        _require(abs(msg.steering_target) <= math.pi, "A-side steering_target must lie in [-pi, pi] rad")
    else:
        _require(0.0 <= msg.throttle <= 100.0, "B-side throttle percent must lie in [0, 100]")
        _require(0.0 <= msg.brake <= 100.0, "B-side brake percent must lie in [0, 100]")
        _require(-100.0 <= msg.steering_target <= 100.0, "B-side steering percent must lie in [-100, 100]")


def _validate_chassis(msg: ChassisMsg, dialect: Dialect) -> None:
    for name in ("speed", "throttle", "brake", "steering", "steering_rate"):
        _require(math.isfinite(getattr(msg, name)), f"{name} must be finite")
    _require(isinstance(msg.gear, Gear), "gear must be a Gear")
    _require(isinstance(msg.turn_signal, TurnSignal), "turn_signal must be a TurnSignal")
    if msg.gear is Gear.D:
        _require(msg.speed >= 0.0, "speed must be >= 0 in forward gear")
    if dialect is Dialect.A:
        _require(0.0 <= msg.throttle <= 1.0, "A-side throttle must lie in [0, 1]")
        _require(0.0 <= msg.brake <= 1.0, "A-side brake must lie in [0, 1]")
        _require(abs(msg.steering) <= math.pi, "A-side steering must lie in [-pi, pi] rad")
    else:
        _require(0.0 <= msg.throttle <= 100.0, "B-side throttle percent must lie in [0, 100]")
        _require(0.0 <= msg.brake <= 100.0, "B-side brake percent must lie in [0, 100]")
        _require(-100.0 <= msg.steering <= 100.0, "B-side steering percent must lie in [-100, 100]")


def _validate_sensor_objects(msg: SensorObjectList) -> None:
    _require(math.isfinite(msg.stamp_s) and msg.stamp_s >= 0.0, "stamp_s must be >= 0")
    _require(isinstance(msg.sensor_status, SensorStatus), "sensor_status must be a SensorStatus")
    seen: set[int] = set()
    for obj in msg.objects:
        _require(obj.object_id not in seen, f"duplicate object id {obj.object_id}")
        seen.add(obj.object_id)
        _require_finite_vec(obj.position, "object position")
        _require_finite_vec(obj.velocity, "object velocity")
        _require(math.isfinite(obj.heading), "object heading must be finite")
        _require(
            obj.length > 0.0 and obj.width > 0.0 and obj.height > 0.0,
            "object dimensions must be > 0",
        )
        _require(isinstance(obj.object_type, ObjectType), "object_type must be an ObjectType")


def validate_payload(payload: Payload, dialect: Dialect) -> None:
    """Raise :class:`InvalidPayload` if the payload violates its invariants."""
    if isinstance(payload, StartupMsg):
        _validate_startup(payload)
    elif isinstance(payload, LocalizationMsg):
        _validate_localization(payload)
    elif isinstance(payload, ControlMsg):
        _validate_control(payload, dialect)
    elif isinstance(payload, ChassisMsg):
        _validate_chassis(payload, dialect)
    elif isinstance(payload, SensorObjectList):
        _validate_sensor_objects(payload)
    elif isinstance(payload, TickMsg):
        _require(payload.index >= 0, "tick index must be >= 0")
    else:
        raise InvalidPayload(f"unsupported payload type {type(payload).__name__}")


def validate_envelope(env: MessageEnvelope, dialect: Dialect) -> None:
    _require(isinstance(env.seq, int) and env.seq >= 0, "seq must be a nonnegative integer")
    _require(math.isfinite(env.stamp_s) and env.stamp_s >= 0.0, "stamp_s must be >= 0")
    _require(bool(env.channel), "channel must be non-empty")
    validate_payload(env.payload, dialect)


def normalized_heading(yaw: float) -> float:
    """Heading in (-pi, pi], East = 0, counterclockwise positive."""
    return wrap_angle(yaw)
