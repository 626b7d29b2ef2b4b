"""Lane-level geometry product derived from a pruned OpenDRIVE document.

Centerlines and boundaries are sampled along the road reference line at a
configurable spacing (<= 1 m by default) with lateral offsets accumulated
from the lane widths. Lane arc length is measured along the reference line.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .opendrive import OpenDriveDoc, RoadDef, ROUTABLE_TYPES

DEFAULT_SAMPLE_SPACING = 1.0
ENDPOINT_CONTINUITY_TOL = 0.01


class GeometryGap(ValueError):
    pass


@dataclass
class Lane:
    uid: str
    lane_type: str
    speed_limit: float
    width: float
    centerline: np.ndarray  # (N, 2)
    left_boundary: np.ndarray
    right_boundary: np.ndarray
    s: np.ndarray  # (N,) arc length along the lane
    length: float
    predecessors: tuple[str, ...] = ()
    successors: tuple[str, ...] = ()
    left_neighbor: str | None = None
    right_neighbor: str | None = None

    @property
    def is_driving(self) -> bool:
        return self.lane_type in ROUTABLE_TYPES

    def heading_at(self, s: float) -> float:
        i = min(max(int(np.searchsorted(self.s, s) - 1), 0), len(self.s) - 2)
        d = self.centerline[i + 1] - self.centerline[i]
        return math.atan2(d[1], d[0])

    def point_at(self, s: float) -> tuple[float, float]:
        s = float(np.clip(s, self.s[0], self.s[-1]))
        x = float(np.interp(s, self.s, self.centerline[:, 0]))
        y = float(np.interp(s, self.s, self.centerline[:, 1]))
        return (x, y)


@dataclass
class BaseMap:
    lanes: dict[str, Lane]

    def driving_lanes(self) -> list[Lane]:
        return [lane for uid, lane in sorted(self.lanes.items()) if lane.is_driving]

    def lane(self, uid: str) -> Lane:
        return self.lanes[uid]


@dataclass(frozen=True)
class Projection:
    s: float
    lateral: float  # signed, left of travel direction positive
    distance: float
    perpendicular: bool  # foot of the projection lies strictly on a segment


def project_to_polyline(points: np.ndarray, x: float, y: float) -> Projection:
    p = np.array([x, y], dtype=float)
    a = points[:-1]
    b = points[1:]
    d = b - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    seg_len2 = np.where(seg_len2 == 0.0, 1e-300, seg_len2)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / seg_len2, 0.0, 1.0)
    proj = a + t[:, None] * d
    delta = p - proj
    dist2 = np.einsum("ij,ij->i", delta, delta)
    i = int(np.argmin(dist2))
    seg_len = math.sqrt(float(seg_len2[i]))
    cum = np.concatenate(([0.0], np.cumsum(np.sqrt(seg_len2))))
    s = float(cum[i] + t[i] * seg_len)
    # Signed lateral: positive when the point lies left of the travel direction.
    dir_vec = d[i] / seg_len
    lateral = float(dir_vec[0] * delta[i][1] - dir_vec[1] * delta[i][0])
    distance = math.sqrt(float(dist2[i]))
    interior = 0.0 < t[i] < 1.0 or (0 < i < len(t) - 1)
    perpendicular = abs(distance - abs(lateral)) < 1e-9 and (interior or 0.0 < t[i] < 1.0)
    return Projection(s=s, lateral=lateral, distance=distance, perpendicular=perpendicular)


def _reference_eval(road: RoadDef, s_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample (x, y) and heading along the road reference line."""
    segs = road.plan_view
    if not segs:
        raise GeometryGap(f"road {road.road_id} has no plan-view geometry")
    starts = [seg.s for seg in segs]
    xs = np.empty(len(s_values))
    ys = np.empty(len(s_values))
    hdgs = np.empty(len(s_values))
    for j, s in enumerate(s_values):
        i = max(bisect_right(starts, s + 1e-12) - 1, 0)
        seg = segs[i]
        local = min(max(s - seg.s, 0.0), seg.length)
        x, y, hdg = seg.point_at(local)
        xs[j] = x
        ys[j] = y
        hdgs[j] = hdg
    return np.stack([xs, ys], axis=1), hdgs


def _check_reference_continuity(road: RoadDef) -> None:
    for prev, nxt in zip(road.plan_view, road.plan_view[1:]):
        ex, ey, _ = prev.end_point()
        gap = math.hypot(nxt.x - ex, nxt.y - ey)
        if gap > ENDPOINT_CONTINUITY_TOL:
            raise GeometryGap(
                f"road {road.road_id}: geometry gap of {gap:.4f} m at s={nxt.s}"
            )


def _section_ranges(road: RoadDef) -> list[tuple[float, float]]:
    ranges = []
    for i, sec in enumerate(road.sections):
        end = road.sections[i + 1].s if i + 1 < len(road.sections) else road.length
        ranges.append((sec.s, end))
    return ranges


def build_base_map(doc: OpenDriveDoc, spacing: float = DEFAULT_SAMPLE_SPACING) -> BaseMap:
    """Sample every kept lane of every road into centerline/boundary polylines."""
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    lanes: dict[str, Lane] = {}

    for road in doc.roads:
        if not road.sections:
            continue
        _check_reference_continuity(road)
        for sec_index, (sec_start, sec_end) in enumerate(_section_ranges(road)):
            sec = road.sections[sec_index]
            sec_len = sec_end - sec_start
            if sec_len <= 0:
                continue
            n = max(int(math.ceil(sec_len / spacing)), 1)
            s_grid = sec_start + np.linspace(0.0, sec_len, n + 1)
            ref_pts, hdgs = _reference_eval(road, s_grid)
            normals = np.stack([-np.sin(hdgs), np.cos(hdgs)], axis=1)

            for side_sign in (-1, 1):
                side_lanes = sorted(
                    (l for l in sec.lanes if (l.lane_id < 0) == (side_sign < 0)),
                    key=lambda l: abs(l.lane_id),
                )
                cum_width = 0.0
                for lane_def in side_lanes:
                    inner = cum_width
                    outer = cum_width + lane_def.width
                    cum_width = outer
                    t_inner = side_sign * inner
                    t_outer = side_sign * outer
                    t_center = side_sign * (inner + lane_def.width / 2.0)

                    center = ref_pts + t_center * normals
                    inner_line = ref_pts + t_inner * normals
                    outer_line = ref_pts + t_outer * normals
                    local_s = s_grid - sec_start

                    if side_sign > 0:
                        # Left lanes travel against the reference direction.
                        center = center[::-1].copy()
                        inner_line = inner_line[::-1].copy()
                        outer_line = outer_line[::-1].copy()
                        local_s = (local_s[-1] - local_s)[::-1].copy()
                        left_b, right_b = outer_line, inner_line
                    else:
                        left_b, right_b = inner_line, outer_line

                    uid = f"{road.road_id}.{sec_index}.{lane_def.lane_id}"
                    lanes[uid] = Lane(
                        uid=uid,
                        lane_type=lane_def.lane_type,
                        speed_limit=lane_def.speed_limit,
                        width=lane_def.width,
                        centerline=center,
                        left_boundary=left_b,
                        right_boundary=right_b,
                        s=local_s,
                        length=float(sec_len),
                    )

    _link_lanes(doc, lanes)
    _check_successor_continuity(lanes)
    return BaseMap(lanes=lanes)


def _link_lanes(doc: OpenDriveDoc, lanes: dict[str, Lane]) -> None:
    successors: dict[str, list[str]] = {uid: [] for uid in lanes}
    predecessors: dict[str, list[str]] = {uid: [] for uid in lanes}

    for road in doc.roads:
        n_sections = len(road.sections)
        for sec_index, sec in enumerate(road.sections):
            for lane_def in sec.lanes:
                uid = f"{road.road_id}.{sec_index}.{lane_def.lane_id}"
                if uid not in lanes or lane_def.successor is None:
                    continue
                if sec_index + 1 < n_sections:
                    succ_uid = f"{road.road_id}.{sec_index + 1}.{lane_def.successor}"
                elif road.successor is not None:
                    succ_uid = f"{road.successor}.0.{lane_def.successor}"
                else:
                    continue
                if succ_uid in lanes:
                    successors[uid].append(succ_uid)
                    predecessors[succ_uid].append(uid)

    for road in doc.roads:
        for sec_index, sec in enumerate(road.sections):
            by_id = {l.lane_id: l for l in sec.lanes}
            for lane_def in sec.lanes:
                uid = f"{road.road_id}.{sec_index}.{lane_def.lane_id}"
                if uid not in lanes:
                    continue
                # The driver's left is toward the reference line on both sides
                # (left-side lanes travel against the reference direction).
                k = abs(lane_def.lane_id)
                sign = 1 if lane_def.lane_id > 0 else -1
                left_id = sign * (k - 1) if k >= 2 else None
                right_id = sign * (k + 1)
                lane = lanes[uid]
                if left_id is not None and left_id in by_id:
                    lane.left_neighbor = f"{road.road_id}.{sec_index}.{left_id}"
                if right_id in by_id:
                    lane.right_neighbor = f"{road.road_id}.{sec_index}.{right_id}"

    for uid, lane in lanes.items():
        lane.successors = tuple(sorted(successors[uid]))
        lane.predecessors = tuple(sorted(predecessors[uid]))


def _check_successor_continuity(lanes: dict[str, Lane]) -> None:
    for lane in lanes.values():
        for succ_uid in lane.successors:
            succ = lanes[succ_uid]
            gap = float(np.hypot(*(lane.centerline[-1] - succ.centerline[0])))
            if gap > ENDPOINT_CONTINUITY_TOL:
                raise GeometryGap(
                    f"lane {lane.uid} -> {succ_uid}: endpoint gap {gap:.4f} m"
                )
