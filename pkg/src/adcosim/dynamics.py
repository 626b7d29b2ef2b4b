"""Vehicle-dynamics stand-in: kinematic bicycle plant with actuator and gear
maps, scripted traffic playback, and a ground-truth object sensor.

The plant integrates semi-implicitly at a fixed step. The gear map exists to
reproduce the acceleration discontinuity a real drivetrain shows at an
upshift: the per-gear engine cap drops one tick before the controller can
re-trim its throttle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .frames import EulerAngles, Vec3, euler_to_quaternion, wrap_angle
from .messages import (
    ChassisMsg,
    ControlMsg,
    Gear,
    LocalizationMsg,
    SensorObject,
    SensorObjectList,
    SensorStatus,
    StartupMsg,
    ObjectType,
    TurnSignal,
)
from .scenario import ScenarioSpec, TrafficActor, interpolate_actor
from .mapping import BaseMap


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.8
    max_steer_angle: float = 0.52
    gear_accel_caps: tuple[float, ...] = (3.0, 2.2, 1.6, 1.2)
    gear_upshift_speeds: tuple[float, ...] = (8.0, 14.0, 20.0)
    shift_hysteresis: float = 0.5
    max_brake_decel: float = 8.0
    drag_coeff: float = 0.0004  # 1/m, decel = drag_coeff * v^2


@dataclass(frozen=True)
class SensorConfig:
    range_m: float = 300.0
    fov_deg: float = 120.0


@dataclass(frozen=True)
class EgoState:
    x: float
    y: float
    yaw: float
    v: float
    accel: float = 0.0
    road_wheel_angle: float = 0.0
    drive_gear: int = 1
    odometer: float = 0.0
    selector: Gear = Gear.D


NEUTRAL_CONTROL = ControlMsg(steering_rate=0.0, steering_target=0.0, throttle=0.0, brake=0.0)


def initial_gear(v: float, params: VehicleParams) -> int:
    gear = 1
    for threshold in params.gear_upshift_speeds:
        if v > threshold:
            gear += 1
    return gear


def _shift_gear(gear: int, v: float, params: VehicleParams) -> int:
    ups = params.gear_upshift_speeds
    top = len(params.gear_accel_caps)
    while gear < top and v > ups[gear - 1]:
        gear += 1
    while gear > 1 and v < ups[gear - 2] - params.shift_hysteresis:
        gear -= 1
    return gear


def step_ego(state: EgoState, control: ControlMsg, dt: float, params: VehicleParams) -> EgoState:
    """Advance the plant one step with Dialect-A control values.

    Update order: steering slew, longitudinal accel, semi-implicit speed,
    yaw, position, then the gear shift map on the new speed.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")

    target = max(-params.max_steer_angle, min(params.max_steer_angle, control.steering_target))
    rate = abs(control.steering_rate)
    if rate > 0.0:
        max_delta = rate * dt
        delta = max(-max_delta, min(max_delta, target - state.road_wheel_angle))
        steer = state.road_wheel_angle + delta
    else:
        steer = target

    cap = params.gear_accel_caps[state.drive_gear - 1]
    a = control.throttle * cap - control.brake * params.max_brake_decel - params.drag_coeff * state.v ** 2
    v_new = max(0.0, state.v + a * dt)
    effective_accel = (v_new - state.v) / dt
    yaw_new = wrap_angle(state.yaw + (v_new / params.wheelbase) * math.tan(steer) * dt)
    x_new = state.x + v_new * math.cos(yaw_new) * dt
    y_new = state.y + v_new * math.sin(yaw_new) * dt
    gear_new = _shift_gear(state.drive_gear, v_new, params)

    return EgoState(
        x=x_new,
        y=y_new,
        yaw=yaw_new,
        v=v_new,
        accel=effective_accel,
        road_wheel_angle=steer,
        drive_gear=gear_new,
        odometer=state.odometer + v_new * dt,
        selector=state.selector,
    )


def emit_localization(state: EgoState, params: VehicleParams) -> LocalizationMsg:
    """Dialect-A localization: body vectors in FLU, heading East-referenced."""
    yaw_rate = (state.v / params.wheelbase) * math.tan(state.road_wheel_angle)
    return LocalizationMsg(
        position=Vec3(state.x, state.y, 0.0),
        orientation=euler_to_quaternion(EulerAngles(0.0, 0.0, state.yaw)),
        linear_velocity=Vec3(state.v, 0.0, 0.0),
        linear_acceleration=Vec3(state.accel, 0.0, 0.0),
        angular_velocity=Vec3(0.0, 0.0, yaw_rate),
        heading=wrap_angle(state.yaw),
    )


def emit_chassis(state: EgoState, applied: ControlMsg, steer_rate_actual: float) -> ChassisMsg:
    return ChassisMsg(
        speed=state.v,
        throttle=applied.throttle,
        brake=applied.brake,
        steering=state.road_wheel_angle,
        steering_rate=steer_rate_actual,
        gear=state.selector,
        turn_signal=TurnSignal.OFF,
    )


@dataclass(frozen=True)
class TrafficState:
    actor_id: int
    x: float
    y: float
    speed: float
    heading: float
    length: float
    width: float
    height: float
    object_type: str


class _ActorTrack:
    """Array-backed interpolator with the same semantics as interpolate_actor."""

    def __init__(self, actor: TrafficActor):
        self.actor = actor
        self.t = np.array([s.t for s in actor.trajectory])
        self.x = np.array([s.x for s in actor.trajectory])
        self.y = np.array([s.y for s in actor.trajectory])
        self.speed = np.array([s.speed for s in actor.trajectory])
        self.heading = np.array([s.heading for s in actor.trajectory])

    def state_at(self, t: float) -> TrafficState:
        actor = self.actor
        return TrafficState(
            actor_id=actor.actor_id,
            x=float(np.interp(t, self.t, self.x)),
            y=float(np.interp(t, self.t, self.y)),
            speed=float(np.interp(t, self.t, self.speed)),
            heading=float(np.interp(t, self.t, self.heading)),
            length=actor.length,
            width=actor.width,
            height=actor.height,
            object_type=actor.object_type,
        )


def playback_traffic(spec: ScenarioSpec, t: float) -> list[TrafficState]:
    """Scripted traffic poses at time t (linear interpolation, ends held)."""
    states = []
    for actor in spec.traffic:
        s = interpolate_actor(actor, t)
        states.append(
            TrafficState(
                actor_id=actor.actor_id,
                x=s.x,
                y=s.y,
                speed=s.speed,
                heading=s.heading,
                length=actor.length,
                width=actor.width,
                height=actor.height,
                object_type=actor.object_type,
            )
        )
    return states


def sense_objects(
    state: EgoState, traffic: list[TrafficState], config: SensorConfig, stamp_s: float
) -> SensorObjectList:
    """Ground-truth detections within range and the forward field-of-view cone."""
    half_fov = math.radians(config.fov_deg) / 2.0
    objects = []
    for ts in sorted(traffic, key=lambda t: t.actor_id):
        dx, dy = ts.x - state.x, ts.y - state.y
        dist = math.hypot(dx, dy)
        if dist > config.range_m:
            continue
        bearing = wrap_angle(math.atan2(dy, dx) - state.yaw)
        if abs(bearing) > half_fov:
            continue
        objects.append(
            SensorObject(
                object_id=ts.actor_id,
                position=Vec3(ts.x, ts.y, 0.0),
                velocity=Vec3(ts.speed * math.cos(ts.heading), ts.speed * math.sin(ts.heading), 0.0),
                heading=wrap_angle(ts.heading),
                length=ts.length,
                width=ts.width,
                height=ts.height,
                object_type=ObjectType(ts.object_type),
            )
        )
    return SensorObjectList(objects=tuple(objects), stamp_s=stamp_s, sensor_status=SensorStatus.OK)


class DynamicsAgent:
    """Owns the ego plant and scripted traffic for one scenario run.

    ``on_tick`` applies the most recently delivered control (one-tick
    actuation latency falls out of the harness loop order), advances the
    plant, and returns the Dialect-A messages to publish plus a log row.
    """

    def __init__(
        self,
        spec: ScenarioSpec,
        base: BaseMap,
        dt: float,
        params: VehicleParams = VehicleParams(),
        sensor: SensorConfig = SensorConfig(),
    ):
        self.spec = spec
        self.base = base
        self.dt = dt
        self.params = params
        self.sensor = sensor

        lane = base.lane(spec.ego.init_lane_uid)
        x0, y0 = lane.point_at(spec.ego.init_s)
        self.state = EgoState(
            x=x0,
            y=y0,
            yaw=lane.heading_at(spec.ego.init_s),
            v=spec.ego.init_speed,
            drive_gear=initial_gear(spec.ego.init_speed, params),
        )
        self._pending_control = NEUTRAL_CONTROL
        self._applied_control = NEUTRAL_CONTROL
        self._tracks = [_ActorTrack(actor) for actor in spec.traffic]
        goal_xy = lane.point_at(spec.ego.goal_s)
        self._startup = StartupMsg(
            start_position=Vec3(x0, y0, 0.0),
            end_position=Vec3(goal_xy[0], goal_xy[1], 0.0),
            desired_speed=spec.ego.desired_speed,
            startup_flag=True,
        )

    def deliver_control(self, msg: ControlMsg) -> None:
        self._pending_control = msg

    def on_tick(self, tick: int) -> tuple[float, list[tuple[str, object]], dict]:
        """Advance one step; returns (stamp, [(channel, payload)...], log row)."""
        control = self._pending_control
        prev_steer = self.state.road_wheel_angle
        self.state = step_ego(self.state, control, self.dt, self.params)
        self._applied_control = control
        stamp = (tick + 1) * self.dt

        traffic = [track.state_at(stamp) for track in self._tracks]
        steer_rate_actual = (self.state.road_wheel_angle - prev_steer) / self.dt
        messages: list[tuple[str, object]] = []
        if tick == 0:
            messages.append(("/cm/startup", self._startup))
        messages.append(("/cm/localization", emit_localization(self.state, self.params)))
        messages.append(("/cm/chassis", emit_chassis(self.state, control, steer_rate_actual)))
        messages.append(("/cm/objects", sense_objects(self.state, traffic, self.sensor, stamp)))

        row = {
            "tick": tick,
            "t": stamp,
            "ego_x": self.state.x,
            "ego_y": self.state.y,
            "ego_yaw": self.state.yaw,
            "ego_v": self.state.v,
            "ego_a": self.state.accel,
            "ego_gear": self.state.drive_gear,
        }
        for ts in traffic:
            row[f"actor{ts.actor_id}_x"] = ts.x
            row[f"actor{ts.actor_id}_y"] = ts.y
            row[f"actor{ts.actor_id}_v"] = ts.speed
        return stamp, messages, row
