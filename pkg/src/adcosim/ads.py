"""ADS-stack stand-in: startup/routing, perception passthrough,
constant-velocity prediction, IDM longitudinal planning, pure-pursuit
lateral control, and accel-PID actuator mapping.

Consumes Dialect-B messages and emits Dialect-B control (percent units).
The stack is a deterministic state machine advanced once per harness tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mapping import BaseMap, NoRoute, RoutingGraph, route
from .messages import (
    ChassisMsg,
    ControlMsg,
    Gear,
    Lamps,
    LocalizationMsg,
    SensorObjectList,
    StartupMsg,
)
from .frames import Vec3, wrap_angle


class OffCenterline(ValueError):
    pass


@dataclass(frozen=True)
class ActuatorCalibration:
    """Vehicle calibration the control side works from.

    The throttle map uses one nominal engine-acceleration cap: the plant's
    internal gear schedule is not part of the calibration, so every upshift
    produces a genuine acceleration discontinuity that the accel PID then
    trims out, mirroring how a control stack adapted to a foreign vehicle
    behaves.
    """

    nominal_accel_cap: float = 2.0
    max_brake_decel: float = 8.0
    drag_coeff: float = 0.0004
    wheelbase: float = 2.8
    max_steer_angle: float = 0.52


@dataclass(frozen=True)
class PlannerConfig:
    a_max: float = 1.0
    b_comf: float = 2.0
    s0: float = 2.0
    headway_T: float = 1.5
    delta_exp: int = 4
    accel_min: float = -4.0
    lookahead_min: float = 5.0
    lookahead_gain_s: float = 1.0
    pid_kp: float = 0.5
    pid_ki: float = 0.1
    pid_kd: float = 0.0
    pid_integral_limit: float = 2.0
    prediction_horizon_s: float = 3.0
    prediction_step_s: float = 0.1
    stale_limit_ticks: int = 5
    ego_length: float = 4.5
    steering_rate_percent: float = 200.0
    calibration: ActuatorCalibration = ActuatorCalibration()


@dataclass(frozen=True)
class LeadInfo:
    gap: float  # bumper-to-bumper, m
    speed: float  # m/s along the lane


@dataclass(frozen=True)
class Obstacle:
    obstacle_id: int
    position: Vec3
    velocity: Vec3
    heading: float
    length: float
    width: float
    height: float
    predicted_path: tuple[tuple[float, float, float], ...]  # (t, x, y)


def predict_constant_velocity(
    obstacle_id: int,
    position: Vec3,
    velocity: Vec3,
    heading: float,
    dims: tuple[float, float, float],
    cfg: PlannerConfig,
) -> Obstacle:
    steps = int(round(cfg.prediction_horizon_s / cfg.prediction_step_s))
    path = tuple(
        (k * cfg.prediction_step_s,
         position.x + velocity.x * k * cfg.prediction_step_s,
         position.y + velocity.y * k * cfg.prediction_step_s)
        for k in range(steps + 1)
    )
    return Obstacle(
        obstacle_id=obstacle_id,
        position=position,
        velocity=velocity,
        heading=heading,
        length=dims[0],
        width=dims[1],
        height=dims[2],
        predicted_path=path,
    )


def idm_accel(v: float, v0: float, lead: LeadInfo | None, cfg: PlannerConfig) -> float:
    """Intelligent-Driver-Model acceleration, clamped to [accel_min, a_max].

    The dynamic part of the desired gap is floored at zero so an opening gap
    never increases the interaction term; this keeps the response monotone
    nonincreasing in v and nondecreasing in gap.
    """
    free = (v / v0) ** cfg.delta_exp if v0 > 0 else 1.0
    interaction = 0.0
    if lead is not None:
        dv = v - lead.speed
        s_star = cfg.s0 + max(0.0, v * cfg.headway_T + v * dv / (2.0 * math.sqrt(cfg.a_max * cfg.b_comf)))
        interaction = (s_star / max(lead.gap, 0.01)) ** 2
    a = cfg.a_max * (1.0 - free - interaction)
    return max(cfg.accel_min, min(cfg.a_max, a))


class RoutePath:
    """Concatenated centerline of the route lanes with arc-length indexing."""

    def __init__(self, base: BaseMap, lane_uids: tuple[str, ...]):
        pts = []
        spans = []
        offset = 0.0
        for uid in lane_uids:
            lane = base.lane(uid)
            chunk = lane.centerline if not pts else lane.centerline[1:]
            pts.append(chunk)
            spans.append((uid, offset, offset + lane.length, lane.width / 2.0))
            offset += lane.length
        self.points = np.vstack(pts)
        seg = np.diff(self.points, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.s = np.concatenate(([0.0], np.cumsum(seg_len)))
        self.length = float(self.s[-1])
        self.spans = spans
        self._seg = seg
        self._seg_len = np.where(seg_len == 0.0, 1e-300, seg_len)

    def project(self, x: float, y: float, hint_s: float | None = None) -> tuple[float, float]:
        """(arc length, signed lateral offset) of the nearest path point.

        ``hint_s`` restricts the search to a window around a previous arc
        length; when the minimum lands on a window edge the full path is
        searched instead, so the hint never changes the result.
        """
        lo, hi = 0, len(self._seg)
        if hint_s is not None:
            lo = max(0, int(np.searchsorted(self.s, hint_s - 30.0)) - 1)
            hi = min(len(self._seg), int(np.searchsorted(self.s, hint_s + 30.0)) + 1)
            if hi - lo < 2:
                lo, hi = 0, len(self._seg)
        while True:
            p = np.array([x, y])
            a = self.points[lo:hi]
            seg = self._seg[lo:hi]
            seg_len = self._seg_len[lo:hi]
            rel = p - a
            t = np.clip(np.einsum("ij,ij->i", rel, seg) / (seg_len ** 2), 0.0, 1.0)
            proj = a + t[:, None] * seg
            d = p - proj
            dist2 = np.einsum("ij,ij->i", d, d)
            i = int(np.argmin(dist2))
            full = lo == 0 and hi == len(self._seg)
            on_edge = (i == 0 and lo > 0) or (i == hi - lo - 1 and hi < len(self._seg))
            if on_edge and not full:
                lo, hi = 0, len(self._seg)
                continue
            k = lo + i
            s = float(self.s[k] + t[i] * self._seg_len[k])
            dir_vec = self._seg[k] / self._seg_len[k]
            lateral = float(dir_vec[0] * d[i][1] - dir_vec[1] * d[i][0])
            return s, lateral

    def point_at(self, s: float) -> tuple[float, float]:
        s = min(max(s, 0.0), self.length)
        x = float(np.interp(s, self.s, self.points[:, 0]))
        y = float(np.interp(s, self.s, self.points[:, 1]))
        return x, y

    def half_width_at(self, s: float) -> float:
        for uid, lo, hi, half in self.spans:
            if lo <= s <= hi:
                return half
        return self.spans[-1][3]

    def lane_uid_at(self, s: float) -> str:
        for uid, lo, hi, half in self.spans:
            if lo <= s <= hi:
                return uid
        return self.spans[-1][0]


def pure_pursuit_steer(
    pose_xy: tuple[float, float],
    heading: float,
    path: RoutePath,
    v: float,
    cfg: PlannerConfig,
    projection: tuple[float, float] | None = None,
) -> float:
    """Road-wheel angle steering toward a lookahead point on the path."""
    s, lateral = projection if projection is not None else path.project(*pose_xy)
    if abs(lateral) > 5.0:
        raise OffCenterline(f"ego is {lateral:.2f} m from the route centerline")
    lookahead = max(cfg.lookahead_min, cfg.lookahead_gain_s * v)
    tx, ty = path.point_at(s + lookahead)
    alpha = wrap_angle(math.atan2(ty - pose_xy[1], tx - pose_xy[0]) - heading)
    steer = math.atan2(2.0 * cfg.calibration.wheelbase * math.sin(alpha), lookahead)
    limit = cfg.calibration.max_steer_angle
    return max(-limit, min(limit, steer))


def select_lead(
    ego_s: float,
    obstacles: list[Obstacle],
    path: RoutePath,
    cfg: PlannerConfig,
    s_hints: dict[int, float] | None = None,
) -> tuple[Obstacle, LeadInfo] | None:
    """Closest obstacle ahead of the ego inside the current lane corridor."""
    best: tuple[Obstacle, LeadInfo] | None = None
    for obs in obstacles:
        t0, x0, y0 = obs.predicted_path[0]
        hint = s_hints.get(obs.obstacle_id) if s_hints is not None else None
        s, lateral = path.project(x0, y0, hint_s=hint)
        if s_hints is not None:
            s_hints[obs.obstacle_id] = s
        if abs(lateral) > path.half_width_at(s):
            continue
        if s <= ego_s:
            continue
        gap = (s - ego_s) - (obs.length + cfg.ego_length) / 2.0
        speed = math.hypot(obs.velocity.x, obs.velocity.y)
        if best is None or gap < best[1].gap:
            best = (obs, LeadInfo(gap=max(gap, 0.01), speed=speed))
    return best


@dataclass
class AdsState:
    activated: bool = False
    route_uids: tuple[str, ...] = ()
    desired_speed: float = 0.0


class AdsAgent:
    """Deterministic control stack advanced by the harness tick."""

    def __init__(self, base: BaseMap, graph: RoutingGraph, dt: float, cfg: PlannerConfig = PlannerConfig()):
        self.base = base
        self.graph = graph
        self.dt = dt
        self.cfg = cfg
        self.state = AdsState()
        self.path: RoutePath | None = None

        self._localization: LocalizationMsg | None = None
        self._localization_tick = -1
        self._chassis: ChassisMsg | None = None
        self._obstacles: list[Obstacle] = []
        self._integral = 0.0
        self._prev_error = 0.0
        self._last_control: ControlMsg | None = None
        self._ego_s_hint: float | None = None
        self._obstacle_s_hints: dict[int, float] = {}

    # ------------------------------------------------------------------
    # Message intake (Dialect B payloads)

    def on_startup(self, msg: StartupMsg) -> None:
        if not msg.startup_flag:
            return
        result = route(
            self.graph,
            (msg.start_position.x, msg.start_position.y),
            (msg.end_position.x, msg.end_position.y),
        )
        self.state = AdsState(activated=True, route_uids=result.lane_uids, desired_speed=msg.desired_speed)
        self.path = RoutePath(self.base, result.lane_uids)

    def on_localization(self, msg: LocalizationMsg, tick: int) -> None:
        self._localization = msg
        self._localization_tick = tick

    def on_chassis(self, msg: ChassisMsg) -> None:
        self._chassis = msg

    def on_objects(self, msg: SensorObjectList) -> None:
        self._obstacles = [
            predict_constant_velocity(
                o.object_id, o.position, o.velocity, o.heading,
                (o.length, o.width, o.height), self.cfg,
            )
            for o in msg.objects
        ]

    def handle_payload(self, channel: str, payload, tick: int) -> None:
        if isinstance(payload, StartupMsg):
            self.on_startup(payload)
        elif isinstance(payload, LocalizationMsg):
            self.on_localization(payload, tick)
        elif isinstance(payload, ChassisMsg):
            self.on_chassis(payload)
        elif isinstance(payload, SensorObjectList):
            self.on_objects(payload)

    # ------------------------------------------------------------------

    def _accel_to_pedals(self, a_cmd: float, v: float) -> tuple[float, float]:
        """Inverse actuator map: requested accel -> throttle/brake fractions."""
        cal = self.cfg.calibration
        u = a_cmd + cal.drag_coeff * v * v
        if u > 0.0:
            throttle = min(1.0, u / cal.nominal_accel_cap)
            return throttle, 0.0
        if u < 0.0:
            brake = min(1.0, -u / cal.max_brake_decel)
            return 0.0, brake
        return 0.0, 0.0

    def control_tick(self, tick: int) -> tuple[ControlMsg | None, dict | None]:
        """Compute the Dialect-B control message and the per-tick log row."""
        if not self.state.activated or self.path is None:
            return None, None
        if self._localization is None:
            return None, None

        stale = tick - self._localization_tick > self.cfg.stale_limit_ticks
        stamp = (tick + 1) * self.dt
        if stale and self._last_control is not None:
            row = {
                "tick": tick, "t": stamp, "lead_id": -1, "gap": math.nan,
                "idm_accel": math.nan,
                "throttle_pct": self._last_control.throttle,
                "brake_pct": self._last_control.brake,
                "steer_pct": self._last_control.steering_target,
                "stale": 1,
            }
            return self._last_control, row

        loc = self._localization
        v = self._chassis.speed if self._chassis is not None else math.hypot(
            loc.linear_velocity.x, loc.linear_velocity.y
        )
        a_measured = loc.linear_acceleration.y  # RFU forward axis

        ego_proj = self.path.project(loc.position.x, loc.position.y, hint_s=self._ego_s_hint)
        ego_s = ego_proj[0]
        self._ego_s_hint = ego_s
        lead = select_lead(ego_s, self._obstacles, self.path, self.cfg, self._obstacle_s_hints)
        lead_info = lead[1] if lead is not None else None
        a_idm = idm_accel(v, self.state.desired_speed, lead_info, self.cfg)

        error = a_idm - a_measured
        self._integral = max(
            -self.cfg.pid_integral_limit,
            min(self.cfg.pid_integral_limit, self._integral + error * self.dt),
        )
        derivative = (error - self._prev_error) / self.dt
        self._prev_error = error
        a_adjusted = (
            a_idm
            + self.cfg.pid_kp * error
            + self.cfg.pid_ki * self._integral
            + self.cfg.pid_kd * derivative
        )
        throttle, brake = self._accel_to_pedals(a_adjusted, v)

        steer = pure_pursuit_steer(
            (loc.position.x, loc.position.y), loc.heading, self.path, v, self.cfg,
            projection=ego_proj,
        )
        steer_pct = max(-100.0, min(100.0, steer / self.cfg.calibration.max_steer_angle * 100.0))

        control = ControlMsg(
            steering_rate=self.cfg.steering_rate_percent,
            steering_target=steer_pct,
            throttle=throttle * 100.0,
            brake=brake * 100.0,
            gear=Gear.D,
            lamps=Lamps.NONE,
        )
        self._last_control = control
        row = {
            "tick": tick,
            "t": stamp,
            "lead_id": lead[0].obstacle_id if lead is not None else -1,
            "gap": lead_info.gap if lead_info is not None else math.nan,
            "idm_accel": a_idm,
            "throttle_pct": control.throttle,
            "brake_pct": control.brake,
            "steer_pct": control.steering_target,
            "stale": 0,
        }
        return control, row
