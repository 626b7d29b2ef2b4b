"""Shared randomized-message builders for codec and bridge tests."""

import math
import random

from adcosim.frames import EulerAngles, Vec3, euler_to_quaternion, wrap_angle
from adcosim.messages import (
    ChassisMsg,
    ControlMsg,
    Dialect,
    Gear,
    Lamps,
    LocalizationMsg,
    MessageEnvelope,
    ObjectType,
    SensorObject,
    SensorObjectList,
    SensorStatus,
    StartupMsg,
    TurnSignal,
)

PAYLOAD_KINDS = ("startup", "localization", "control", "chassis", "sensor_objects")


def _vec(rng: random.Random, lo=-500.0, hi=500.0) -> Vec3:
    return Vec3(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi))


def random_payload(rng: random.Random, kind: str, dialect: Dialect):
    if kind == "startup":
        start = _vec(rng)
        end = _vec(rng)
        while end == start:
            end = _vec(rng)
        return StartupMsg(start, end, rng.uniform(0, 40), rng.random() < 0.5)
    if kind == "localization":
        euler = EulerAngles(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-math.pi, math.pi))
        return LocalizationMsg(
            position=_vec(rng),
            orientation=euler_to_quaternion(euler),
            linear_velocity=_vec(rng, -40, 40),
            linear_acceleration=_vec(rng, -8, 8),
            angular_velocity=_vec(rng, -1, 1),
            heading=wrap_angle(rng.uniform(-math.pi, math.pi)),
        )
    if kind == "control":
        pedal = rng.uniform(0, 1)
        use_throttle = rng.random() < 0.5
        if dialect is Dialect.A:
            return ControlMsg(
                steering_rate=rng.uniform(-2, 2),
                steering_target=rng.uniform(-0.52, 0.52),
                throttle=pedal if use_throttle else 0.0,
                brake=0.0 if use_throttle else pedal,
                gear=rng.choice(list(Gear)),
                lamps=Lamps(rng.randrange(8)),
            )
        return ControlMsg(
            steering_rate=rng.uniform(-400, 400),
            steering_target=rng.uniform(-100, 100),
            throttle=pedal * 100 if use_throttle else 0.0,
            brake=0.0 if use_throttle else pedal * 100,
            gear=rng.choice(list(Gear)),
            lamps=Lamps(rng.randrange(8)),
        )
    if kind == "chassis":
        pedal = rng.uniform(0, 1)
        use_throttle = rng.random() < 0.5
        if dialect is Dialect.A:
            return ChassisMsg(
                speed=rng.uniform(0, 45),
                throttle=pedal if use_throttle else 0.0,
                brake=0.0 if use_throttle else pedal,
                steering=rng.uniform(-0.52, 0.52),
                steering_rate=rng.uniform(-2, 2),
                gear=Gear.D,
                turn_signal=rng.choice(list(TurnSignal)),
            )
        return ChassisMsg(
            speed=rng.uniform(0, 45),
            throttle=pedal * 100 if use_throttle else 0.0,
            brake=0.0 if use_throttle else pedal * 100,
            steering=rng.uniform(-100, 100),
            steering_rate=rng.uniform(-400, 400),
            gear=Gear.D,
            turn_signal=rng.choice(list(TurnSignal)),
        )
    if kind == "sensor_objects":
        n = rng.randrange(0, 5)
        return SensorObjectList(
            objects=tuple(
                SensorObject(
                    object_id=i + 1,
                    position=_vec(rng),
                    velocity=_vec(rng, -40, 40),
                    heading=rng.uniform(-math.pi, math.pi),
                    length=rng.uniform(3.5, 16.0),
                    width=rng.uniform(1.6, 2.6),
                    height=rng.uniform(1.2, 4.0),
                    object_type=rng.choice(list(ObjectType)),
                )
                for i in range(n)
            ),
            stamp_s=rng.uniform(0, 1000),
            sensor_status=rng.choice(list(SensorStatus)),
        )
    raise ValueError(kind)


def random_envelope(rng: random.Random, dialect: Dialect, kind: str | None = None) -> MessageEnvelope:
    kind = kind or rng.choice(PAYLOAD_KINDS)
    return MessageEnvelope(
        seq=rng.randrange(0, 1_000_000),
        stamp_s=rng.uniform(0, 10_000),
        channel="/" + rng.choice(("cm", "apollo")) + "/" + rng.choice(("alpha", "beta", "gamma")),
        payload=random_payload(rng, kind, dialect),
    )
