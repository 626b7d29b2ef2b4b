"""Wire codecs for the two message dialects.

Dialect A frames one newline-terminated JSON object per record with flat
snake_case keys, vectors as 3-element arrays, quaternions as [w, x, y, z],
angles in radians and actuator values as fractions.

Dialect B frames a 4-byte big-endian payload length followed by a JSON
object with nested groups and camelCase keys; actuator values ride as
percents. Payloads must stay below 2**24 bytes so the first framing byte is
always 0x00, which distinguishes a B frame from an A record (ASCII '{') on
a mixed stream.

Both encoders sort keys and use compact separators, so encoding is
byte-deterministic. Unknown fields are ignored on decode.
"""

from __future__ import annotations

import json
import struct
from typing import Any

from .frames import Quaternion, Vec3
from .messages import (
    ChassisMsg,
    ControlMsg,
    Dialect,
    Gear,
    InvalidPayload,
    Lamps,
    LocalizationMsg,
    MessageEnvelope,
    ObjectType,
    Payload,
    SensorObject,
    SensorObjectList,
    SensorStatus,
    StartupMsg,
    TickMsg,
    TurnSignal,
    validate_envelope,
)

MAX_B_PAYLOAD = 1 << 24

_KIND_BY_TYPE = {
    StartupMsg: "startup",
    LocalizationMsg: "localization",
    ControlMsg: "control",
    ChassisMsg: "chassis",
    SensorObjectList: "sensor_objects",
    TickMsg: "tick",
}

_GEAR_B = {Gear.P: "GEAR_PARK", Gear.R: "GEAR_REVERSE", Gear.N: "GEAR_NEUTRAL", Gear.D: "GEAR_DRIVE"}
_GEAR_B_INV = {v: k for k, v in _GEAR_B.items()}
_TURN_B = {TurnSignal.OFF: "TURN_NONE", TurnSignal.LEFT: "TURN_LEFT", TurnSignal.RIGHT: "TURN_RIGHT"}
_TURN_B_INV = {v: k for k, v in _TURN_B.items()}
_OBJ_B = {ObjectType.CAR: "CAR", ObjectType.TRUCK: "TRUCK", ObjectType.UNKNOWN: "UNKNOWN"}
_OBJ_B_INV = {v: k for k, v in _OBJ_B.items()}
_STATUS_B = {SensorStatus.OK: "OK", SensorStatus.DEGRADED: "DEGRADED", SensorStatus.OFF: "OFF"}
_STATUS_B_INV = {v: k for k, v in _STATUS_B.items()}


class MalformedRecord(ValueError):
    """A wire record cannot be decoded; ``offset`` points at the problem."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def payload_kind(payload: Payload) -> str:
    try:
        return _KIND_BY_TYPE[type(payload)]
    except KeyError:
        raise InvalidPayload(f"unsupported payload type {type(payload).__name__}") from None


def _dumps(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("ascii")


def _vec_a(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def _vec_b(v: Vec3) -> dict[str, float]:
    return {"x": v.x, "y": v.y, "z": v.z}


# ---------------------------------------------------------------------------
# Dialect A payload fields (flat snake_case)

def _startup_a(m: StartupMsg) -> dict:
    return {
        "start_position": _vec_a(m.start_position),
        "end_position": _vec_a(m.end_position),
        "desired_speed": m.desired_speed,
        "startup_flag": m.startup_flag,
    }


def _localization_a(m: LocalizationMsg) -> dict:
    return {
        "position": _vec_a(m.position),
        "orientation": [m.orientation.w, m.orientation.x, m.orientation.y, m.orientation.z],
        "linear_velocity": _vec_a(m.linear_velocity),
        "linear_acceleration": _vec_a(m.linear_acceleration),
        "angular_velocity": _vec_a(m.angular_velocity),
        "heading": m.heading,
    }


def _control_a(m: ControlMsg) -> dict:
    return {
        "steering_rate": m.steering_rate,
        "steering_target": m.steering_target,
        "throttle": m.throttle,
        "brake": m.brake,
        "gear": m.gear.value,
        "lamps": int(m.lamps),
    }


def _chassis_a(m: ChassisMsg) -> dict:
    return {
        "speed": m.speed,
        "throttle": m.throttle,
        "brake": m.brake,
        "steering": m.steering,
        "steering_rate": m.steering_rate,
        "gear": m.gear.value,
        "turn_signal": m.turn_signal.value,
    }


def _sensor_a(m: SensorObjectList) -> dict:
    return {
        "objects": [
            {
                "id": o.object_id,
                "position": _vec_a(o.position),
                "velocity": _vec_a(o.velocity),
                "heading": o.heading,
                "length": o.length,
                "width": o.width,
                "height": o.height,
                "object_type": o.object_type.value,
            }
            for o in m.objects
        ],
        "sensor_stamp_s": m.stamp_s,
        "sensor_status": m.sensor_status.value,
    }


def _tick_a(m: TickMsg) -> dict:
    return {"index": m.index}


_A_BUILDERS = {
    "startup": _startup_a,
    "localization": _localization_a,
    "control": _control_a,
    "chassis": _chassis_a,
    "sensor_objects": _sensor_a,
    "tick": _tick_a,
}


# ---------------------------------------------------------------------------
# Dialect B payload groups (nested camelCase)

def _startup_b(m: StartupMsg) -> tuple[str, dict]:
    return "startup", {
        "startPosition": _vec_b(m.start_position),
        "endPosition": _vec_b(m.end_position),
        "desiredSpeedMps": m.desired_speed,
        "startupFlag": m.startup_flag,
    }


def _localization_b(m: LocalizationMsg) -> tuple[str, dict]:
    q = m.orientation
    return "pose", {
        "position": _vec_b(m.position),
        "orientation": {"qw": q.w, "qx": q.x, "qy": q.y, "qz": q.z},
        "linearVelocity": _vec_b(m.linear_velocity),
        "linearAcceleration": _vec_b(m.linear_acceleration),
        "angularVelocity": _vec_b(m.angular_velocity),
        "heading": m.heading,
    }


def _control_b(m: ControlMsg) -> tuple[str, dict]:
    return "control", {
        "steeringRatePercent": m.steering_rate,
        "steeringTargetPercent": m.steering_target,
        "throttlePercent": m.throttle,
        "brakePercent": m.brake,
        "gear": _GEAR_B[m.gear],
        "lamps": {
            "leftTurn": bool(m.lamps & Lamps.LEFT_TURN),
            "rightTurn": bool(m.lamps & Lamps.RIGHT_TURN),
            "hazard": bool(m.lamps & Lamps.HAZARD),
        },
    }


def _chassis_b(m: ChassisMsg) -> tuple[str, dict]:
    return "chassis", {
        "speedMps": m.speed,
        "throttlePercent": m.throttle,
        "brakePercent": m.brake,
        "steeringPercent": m.steering,
        "steeringRatePercent": m.steering_rate,
        "gear": _GEAR_B[m.gear],
        "turnSignal": _TURN_B[m.turn_signal],
    }


def _sensor_b(m: SensorObjectList) -> tuple[str, dict]:
    return "perception", {
        "objects": [
            {
                "id": o.object_id,
                "position": _vec_b(o.position),
                "velocity": _vec_b(o.velocity),
                "heading": o.heading,
                "length": o.length,
                "width": o.width,
                "height": o.height,
                "objectType": _OBJ_B[o.object_type],
            }
            for o in m.objects
        ],
        "stampSec": m.stamp_s,
        "sensorStatus": _STATUS_B[m.sensor_status],
    }


def _tick_b(m: TickMsg) -> tuple[str, dict]:
    return "tick", {"index": m.index}


_B_BUILDERS = {
    "startup": _startup_b,
    "localization": _localization_b,
    "control": _control_b,
    "chassis": _chassis_b,
    "sensor_objects": _sensor_b,
    "tick": _tick_b,
}


def encode_a(env: MessageEnvelope, validate: bool = True) -> bytes:
    """Encode an envelope as one newline-terminated Dialect-A record."""
    if validate:
        validate_envelope(env, Dialect.A)
    kind = payload_kind(env.payload)
    record: dict[str, Any] = {
        "msg_type": kind,
        "seq": env.seq,
        "stamp_s": env.stamp_s,
        "channel": env.channel,
    }
    record.update(_A_BUILDERS[kind](env.payload))
    return _dumps(record) + b"\n"


def encode_b(env: MessageEnvelope, validate: bool = True) -> bytes:
    """Encode an envelope as one length-prefixed Dialect-B record."""
    if validate:
        validate_envelope(env, Dialect.B)
    kind = payload_kind(env.payload)
    group, body = _B_BUILDERS[kind](env.payload)
    record = {
        "header": {
            "msgType": kind,
            "seq": env.seq,
            "stampSec": env.stamp_s,
            "channel": env.channel,
        },
        group: body,
    }
    payload = _dumps(record)
    if len(payload) >= MAX_B_PAYLOAD:
        raise InvalidPayload(f"B record payload too large ({len(payload)} bytes)")
    return struct.pack(">I", len(payload)) + payload


# ---------------------------------------------------------------------------
# Decoding

def _get(obj: dict, key: str, offset: int) -> Any:
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise MalformedRecord(f"missing field '{key}'", offset) from None


def _num(value: Any, key: str, offset: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedRecord(f"field '{key}' must be a number", offset)
    return float(value)


def _vec_from_a(value: Any, key: str, offset: int) -> Vec3:
    if not (isinstance(value, list) and len(value) == 3):
        raise MalformedRecord(f"field '{key}' must be a 3-element array", offset)
    return Vec3(*(_num(c, key, offset) for c in value))


def _vec_from_b(value: Any, key: str, offset: int) -> Vec3:
    if not isinstance(value, dict):
        raise MalformedRecord(f"field '{key}' must be an object", offset)
    return Vec3(*(_num(_get(value, k, offset), k, offset) for k in ("x", "y", "z")))


def _enum_from(mapping: dict, value: Any, key: str, offset: int):
    try:
        return mapping[value]
    except (KeyError, TypeError):
        raise MalformedRecord(f"field '{key}' has unknown value {value!r}", offset) from None


_GEAR_A_INV = {g.value: g for g in Gear}
_TURN_A_INV = {t.value: t for t in TurnSignal}
_OBJ_A_INV = {o.value: o for o in ObjectType}
_STATUS_A_INV = {s.value: s for s in SensorStatus}


def _parse_payload_a(kind: str, rec: dict, offset: int) -> Payload:
    if kind == "startup":
        return StartupMsg(
            start_position=_vec_from_a(_get(rec, "start_position", offset), "start_position", offset),
            end_position=_vec_from_a(_get(rec, "end_position", offset), "end_position", offset),
            desired_speed=_num(_get(rec, "desired_speed", offset), "desired_speed", offset),
            startup_flag=bool(_get(rec, "startup_flag", offset)),
        )
    if kind == "localization":
        quat = _get(rec, "orientation", offset)
        if not (isinstance(quat, list) and len(quat) == 4):
            raise MalformedRecord("field 'orientation' must be a 4-element array", offset)
        return LocalizationMsg(
            position=_vec_from_a(_get(rec, "position", offset), "position", offset),
            orientation=Quaternion(*(_num(c, "orientation", offset) for c in quat)),
            linear_velocity=_vec_from_a(_get(rec, "linear_velocity", offset), "linear_velocity", offset),
            linear_acceleration=_vec_from_a(
                _get(rec, "linear_acceleration", offset), "linear_acceleration", offset
            ),
            angular_velocity=_vec_from_a(_get(rec, "angular_velocity", offset), "angular_velocity", offset),
            heading=_num(_get(rec, "heading", offset), "heading", offset),
        )
    if kind == "control":
        return ControlMsg(
            steering_rate=_num(_get(rec, "steering_rate", offset), "steering_rate", offset),
            steering_target=_num(_get(rec, "steering_target", offset), "steering_target", offset),
            throttle=_num(_get(rec, "throttle", offset), "throttle", offset),
            brake=_num(_get(rec, "brake", offset), "brake", offset),
            gear=_enum_from(_GEAR_A_INV, _get(rec, "gear", offset), "gear", offset),
            lamps=Lamps(int(_num(_get(rec, "lamps", offset), "lamps", offset))),
        )
    if kind == "chassis":
        return ChassisMsg(
            speed=_num(_get(rec, "speed", offset), "speed", offset),
            throttle=_num(_get(rec, "throttle", offset), "throttle", offset),
            brake=_num(_get(rec, "brake", offset), "brake", offset),
            steering=_num(_get(rec, "steering", offset), "steering", offset),
            steering_rate=_num(_get(rec, "steering_rate", offset), "steering_rate", offset),
            gear=_enum_from(_GEAR_A_INV, _get(rec, "gear", offset), "gear", offset),
            turn_signal=_enum_from(_TURN_A_INV, _get(rec, "turn_signal", offset), "turn_signal", offset),
        )
    if kind == "sensor_objects":
        objs = _get(rec, "objects", offset)
        if not isinstance(objs, list):
            raise MalformedRecord("field 'objects' must be an array", offset)
        return SensorObjectList(
            objects=tuple(
                SensorObject(
                    object_id=int(_num(_get(o, "id", offset), "id", offset)),
                    position=_vec_from_a(_get(o, "position", offset), "position", offset),
                    velocity=_vec_from_a(_get(o, "velocity", offset), "velocity", offset),
                    heading=_num(_get(o, "heading", offset), "heading", offset),
                    length=_num(_get(o, "length", offset), "length", offset),
                    width=_num(_get(o, "width", offset), "width", offset),
                    height=_num(_get(o, "height", offset), "height", offset),
                    object_type=_enum_from(_OBJ_A_INV, _get(o, "object_type", offset), "object_type", offset),
                )
                for o in objs
            ),
            stamp_s=_num(_get(rec, "sensor_stamp_s", offset), "sensor_stamp_s", offset),
            sensor_status=_enum_from(
                _STATUS_A_INV, _get(rec, "sensor_status", offset), "sensor_status", offset
            ),
        )
    if kind == "tick":
        return TickMsg(index=int(_num(_get(rec, "index", offset), "index", offset)))
    raise MalformedRecord(f"unknown channel schema '{kind}'", offset)


def _parse_payload_b(kind: str, rec: dict, offset: int) -> Payload:
    if kind == "startup":
        body = _get(rec, "startup", offset)
        return StartupMsg(
            start_position=_vec_from_b(_get(body, "startPosition", offset), "startPosition", offset),
            end_position=_vec_from_b(_get(body, "endPosition", offset), "endPosition", offset),
            desired_speed=_num(_get(body, "desiredSpeedMps", offset), "desiredSpeedMps", offset),
            startup_flag=bool(_get(body, "startupFlag", offset)),
        )
    if kind == "localization":
        body = _get(rec, "pose", offset)
        quat = _get(body, "orientation", offset)
        return LocalizationMsg(
            position=_vec_from_b(_get(body, "position", offset), "position", offset),
            orientation=Quaternion(
                *(_num(_get(quat, k, offset), k, offset) for k in ("qw", "qx", "qy", "qz"))
            ),
            linear_velocity=_vec_from_b(_get(body, "linearVelocity", offset), "linearVelocity", offset),
            linear_acceleration=_vec_from_b(
                _get(body, "linearAcceleration", offset), "linearAcceleration", offset
            ),
            angular_velocity=_vec_from_b(_get(body, "angularVelocity", offset), "angularVelocity", offset),
            heading=_num(_get(body, "heading", offset), "heading", offset),
        )
    if kind == "control":
        body = _get(rec, "control", offset)
        lamps_obj = _get(body, "lamps", offset)
        lamps = Lamps.NONE
        if _get(lamps_obj, "leftTurn", offset):
            lamps |= Lamps.LEFT_TURN
        if _get(lamps_obj, "rightTurn", offset):
            lamps |= Lamps.RIGHT_TURN
        if _get(lamps_obj, "hazard", offset):
            lamps |= Lamps.HAZARD
        return ControlMsg(
            steering_rate=_num(_get(body, "steeringRatePercent", offset), "steeringRatePercent", offset),
            steering_target=_num(
                _get(body, "steeringTargetPercent", offset), "steeringTargetPercent", offset
            ),
            throttle=_num(_get(body, "throttlePercent", offset), "throttlePercent", offset),
            brake=_num(_get(body, "brakePercent", offset), "brakePercent", offset),
            gear=_enum_from(_GEAR_B_INV, _get(body, "gear", offset), "gear", offset),
            lamps=lamps,
        )
    if kind == "chassis":
        body = _get(rec, "chassis", offset)
        return ChassisMsg(
            speed=_num(_get(body, "speedMps", offset), "speedMps", offset),
            throttle=_num(_get(body, "throttlePercent", offset), "throttlePercent", offset),
            brake=_num(_get(body, "brakePercent", offset), "brakePercent", offset),
            steering=_num(_get(body, "steeringPercent", offset), "steeringPercent", offset),
            steering_rate=_num(_get(body, "steeringRatePercent", offset), "steeringRatePercent", offset),
            gear=_enum_from(_GEAR_B_INV, _get(body, "gear", offset), "gear", offset),
            turn_signal=_enum_from(_TURN_B_INV, _get(body, "turnSignal", offset), "turnSignal", offset),
        )
    if kind == "sensor_objects":
        body = _get(rec, "perception", offset)
        objs = _get(body, "objects", offset)
        if not isinstance(objs, list):
            raise MalformedRecord("field 'objects' must be an array", offset)
        return SensorObjectList(
            objects=tuple(
                SensorObject(
                    object_id=int(_num(_get(o, "id", offset), "id", offset)),
                    position=_vec_from_b(_get(o, "position", offset), "position", offset),
                    velocity=_vec_from_b(_get(o, "velocity", offset), "velocity", offset),
                    heading=_num(_get(o, "heading", offset), "heading", offset),
                    length=_num(_get(o, "length", offset), "length", offset),
                    width=_num(_get(o, "width", offset), "width", offset),
                    height=_num(_get(o, "height", offset), "height", offset),
                    object_type=_enum_from(_OBJ_B_INV, _get(o, "objectType", offset), "objectType", offset),
                )
                for o in objs
            ),
            stamp_s=_num(_get(body, "stampSec", offset), "stampSec", offset),
            sensor_status=_enum_from(_STATUS_B_INV, _get(body, "sensorStatus", offset), "sensorStatus", offset),
        )
    if kind == "tick":
        body = _get(rec, "tick", offset)
        return TickMsg(index=int(_num(_get(body, "index", offset), "index", offset)))
    raise MalformedRecord(f"unknown channel schema '{kind}'", offset)


def _validate_decoded(env: MessageEnvelope, dialect: Dialect) -> None:
    try:
        validate_envelope(env, dialect)
    except InvalidPayload as exc:
        raise MalformedRecord(str(exc)) from exc


def decode_a(data: bytes) -> MessageEnvelope:
    """Decode one Dialect-A record (trailing newline optional)."""
    text = data.rstrip(b"\n")
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(rec, dict):
        raise MalformedRecord("record must be a JSON object")
    kind = _get(rec, "msg_type", 0)
    env = MessageEnvelope(
        seq=int(_num(_get(rec, "seq", 0), "seq", 0)),
        stamp_s=_num(_get(rec, "stamp_s", 0), "stamp_s", 0),
        channel=str(_get(rec, "channel", 0)),
        payload=_parse_payload_a(kind, rec, 0),
    )
    _validate_decoded(env, Dialect.A)
    return env


def decode_b(data: bytes) -> MessageEnvelope:
    """Decode one Dialect-B record (length prefix + JSON payload)."""
    if len(data) < 4:
        raise MalformedRecord("truncated length prefix", len(data))
    (length,) = struct.unpack(">I", data[:4])
    if len(data) - 4 < length:
        raise MalformedRecord(f"truncated payload: need {length} bytes, have {len(data) - 4}", len(data))
    payload = data[4 : 4 + length]
    try:
        rec = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc.msg}", 4 + exc.pos) from exc
    if not isinstance(rec, dict):
        raise MalformedRecord("record must be a JSON object", 4)
    header = _get(rec, "header", 4)
    kind = _get(header, "msgType", 4)
    env = MessageEnvelope(
        seq=int(_num(_get(header, "seq", 4), "seq", 4)),
        stamp_s=_num(_get(header, "stampSec", 4), "stampSec", 4),
        channel=str(_get(header, "channel", 4)),
        payload=_parse_payload_b(kind, rec, 4),
    )
    _validate_decoded(env, Dialect.B)
    return env


def encode(env: MessageEnvelope, dialect: Dialect, validate: bool = True) -> bytes:
    return encode_a(env, validate) if dialect is Dialect.A else encode_b(env, validate)


def decode(data: bytes, dialect: Dialect) -> MessageEnvelope:
    return decode_a(data) if dialect is Dialect.A else decode_b(data)
