"""Parser and pruner for the OpenDRIVE subset the harness consumes.

Supported content: roads with line/arc plan-view geometry, one or more lane
sections with constant-width lanes, lane and road links. Everything else is
recorded as a warning; a file is rejected only when a driving lane sits on
unsupported geometry.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace

DEFAULT_SPEED_LIMIT = 33.33  # m/s, applied when the map carries no limit

ROUTABLE_TYPES = ("driving",)
KEPT_TYPES = ("driving", "shoulder")


class XmlError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnsupportedGeometry(ValueError):
    pass


@dataclass(frozen=True)
class GeometrySegment:
    kind: str  # "line" or "arc"
    s: float
    x: float
    y: float
    hdg: float
    length: float
    curvature: float = 0.0

    def point_at(self, local_s: float) -> tuple[float, float, float]:
        """(x, y, hdg) at arc length ``local_s`` from the segment start."""
        if self.kind == "line":
            return (
                self.x + local_s * math.cos(self.hdg),
                self.y + local_s * math.sin(self.hdg),
                self.hdg,
            )
        k = self.curvature
        hdg = self.hdg + k * local_s
        return (
            self.x + (math.sin(hdg) - math.sin(self.hdg)) / k,
            self.y - (math.cos(hdg) - math.cos(self.hdg)) / k,
            hdg,
        )

    def end_point(self) -> tuple[float, float, float]:
        return self.point_at(self.length)


@dataclass(frozen=True)
class LaneDef:
    lane_id: int
    lane_type: str
    width: float
    predecessor: int | None = None
    successor: int | None = None
    speed_limit: float = DEFAULT_SPEED_LIMIT
    width_varies: bool = False


@dataclass(frozen=True)
class LaneSectionDef:
    s: float
    lanes: tuple[LaneDef, ...]  # left (positive ids) and right (negative ids)

    def lane(self, lane_id: int) -> LaneDef | None:
        for lane in self.lanes:
            if lane.lane_id == lane_id:
                return lane
        return None


@dataclass(frozen=True)
class RoadDef:
    road_id: str
    length: float
    plan_view: tuple[GeometrySegment, ...]
    sections: tuple[LaneSectionDef, ...]
    predecessor: str | None = None
    successor: str | None = None

    def has_driving_lane(self) -> bool:
        return any(lane.lane_type == "driving" for sec in self.sections for lane in sec.lanes)


@dataclass(frozen=True)
class OpenDriveDoc:
    roads: tuple[RoadDef, ...]
    warnings: tuple[str, ...] = ()

    def road(self, road_id: str) -> RoadDef | None:
        for road in self.roads:
            if road.road_id == road_id:
                return road
        return None


def _float_attr(el: ET.Element, name: str, default: float | None = None) -> float:
    value = el.get(name)
    if value is None:
        if default is None:
            raise XmlError(f"<{el.tag}> missing attribute {name!r}")
        return default
    return float(value)


def _parse_link_target(link_el: ET.Element | None, which: str) -> str | None:
    if link_el is None:
        return None
    el = link_el.find(which)
    if el is None:
        return None
    if el.get("elementType", "road") != "road":
        return None
    return el.get("elementId")


def _parse_lane(el: ET.Element, warnings: list[str], road_id: str) -> LaneDef | None:
    lane_id = int(el.get("id", "0"))
    if lane_id == 0:
        return None  # center lane carries no width
    lane_type = el.get("type", "none")
    widths = el.findall("width")
    if not widths:
        warnings.append(f"road {road_id} lane {lane_id}: no <width>, assuming 3.5 m")
        width, varies = 3.5, False
    else:
        first = widths[0]
        width = _float_attr(first, "a")
        varies = len(widths) > 1 or any(_float_attr(first, c, 0.0) != 0.0 for c in ("b", "c", "d"))
        if varies:
            warnings.append(
                f"road {road_id} lane {lane_id}: varying width approximated by constant a={width}"
            )
    if width <= 0:
        raise XmlError(f"road {road_id} lane {lane_id}: width must be > 0")

    speed_limit = DEFAULT_SPEED_LIMIT
    speed_el = el.find("speed")
    if speed_el is not None:
        unit = speed_el.get("unit", "m/s")
        raw = _float_attr(speed_el, "max")
        if unit == "m/s":
            speed_limit = raw
        elif unit == "km/h":
            speed_limit = raw / 3.6
        else:
            warnings.append(f"road {road_id} lane {lane_id}: speed unit {unit!r} ignored")

    link = el.find("link")
    pred = succ = None
    if link is not None:
        pred_el = link.find("predecessor")
        succ_el = link.find("successor")
        pred = int(pred_el.get("id")) if pred_el is not None and pred_el.get("id") else None
        succ = int(succ_el.get("id")) if succ_el is not None and succ_el.get("id") else None

    return LaneDef(
        lane_id=lane_id,
        lane_type=lane_type,
        width=width,
        predecessor=pred,
        successor=succ,
        speed_limit=speed_limit,
        width_varies=varies,
    )


def parse_opendrive(xml_text: str) -> OpenDriveDoc:
    """Parse the supported OpenDRIVE subset from XML text."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise XmlError(f"XML parse failure: {exc.msg if hasattr(exc, 'msg') else exc}", line, column) from exc
    if root.tag != "OpenDRIVE":
        raise XmlError(f"root element must be <OpenDRIVE>, got <{root.tag}>")

    warnings: list[str] = []
    roads: list[RoadDef] = []
    for road_el in root.findall("road"):
        road_id = road_el.get("id")
        if road_id is None:
            raise XmlError("<road> missing id")
        length = _float_attr(road_el, "length")

        segments: list[GeometrySegment] = []
        unsupported: list[str] = []
        plan_view = road_el.find("planView")
        if plan_view is not None:
            for geo_el in plan_view.findall("geometry"):
                base = dict(
                    s=_float_attr(geo_el, "s"),
                    x=_float_attr(geo_el, "x"),
                    y=_float_attr(geo_el, "y"),
                    hdg=_float_attr(geo_el, "hdg"),
                    length=_float_attr(geo_el, "length"),
                )
                children = [child for child in geo_el if isinstance(child.tag, str)]
                if len(children) != 1:
                    raise XmlError(f"road {road_id}: <geometry> must hold exactly one primitive")
                prim = children[0]
                if prim.tag == "line":
                    segments.append(GeometrySegment(kind="line", **base))
                elif prim.tag == "arc":
                    curvature = _float_attr(prim, "curvature")
                    if curvature == 0.0:
                        segments.append(GeometrySegment(kind="line", **base))
                    else:
                        segments.append(GeometrySegment(kind="arc", curvature=curvature, **base))
                else:
                    unsupported.append(f"road {road_id}: geometry <{prim.tag}> at s={base['s']}")

        sections: list[LaneSectionDef] = []
        lanes_el = road_el.find("lanes")
        if lanes_el is not None:
            for sec_el in lanes_el.findall("laneSection"):
                lanes: list[LaneDef] = []
                for side in ("left", "right"):
                    side_el = sec_el.find(side)
                    if side_el is None:
                        continue
                    for lane_el in side_el.findall("lane"):
                        lane = _parse_lane(lane_el, warnings, road_id)
                        if lane is not None:
                            lanes.append(lane)
                sections.append(
                    LaneSectionDef(
                        s=_float_attr(sec_el, "s", 0.0),
                        lanes=tuple(sorted(lanes, key=lambda l: -l.lane_id)),
                    )
                )
        sections.sort(key=lambda sec: sec.s)

        link_el = road_el.find("link")
        road = RoadDef(
            road_id=road_id,
            length=length,
            plan_view=tuple(segments),
            sections=tuple(sections),
            predecessor=_parse_link_target(link_el, "predecessor"),
            successor=_parse_link_target(link_el, "successor"),
        )

        if unsupported:
            if road.has_driving_lane():
                raise UnsupportedGeometry(
                    "unsupported geometry under driving lanes: " + "; ".join(unsupported)
                )
            warnings.extend(u + " (road skipped, no driving lanes)" for u in unsupported)
            continue
        roads.append(road)

    return OpenDriveDoc(roads=tuple(roads), warnings=tuple(warnings))


@dataclass(frozen=True)
class PruneResult:
    doc: OpenDriveDoc
    report: tuple[str, ...]


def prune(doc: OpenDriveDoc) -> PruneResult:
    """Strip ADS-incompatible content, reporting every removed element.

    Lane types outside the kept set become ``none`` (excluded from routing),
    dangling road/lane links are removed, and lanes whose width varies along
    the road are reported as approximated.
    """
    report: list[str] = []
    road_ids = {road.road_id for road in doc.roads}

    new_roads: list[RoadDef] = []
    for road in doc.roads:
        pred, succ = road.predecessor, road.successor
        if pred is not None and pred not in road_ids:
            report.append(f"road {road.road_id}: predecessor link to missing road {pred} removed")
            pred = None
        if succ is not None and succ not in road_ids:
            report.append(f"road {road.road_id}: successor link to missing road {succ} removed")
            succ = None

        succ_road = doc.road(succ) if succ is not None else None
        pred_road = doc.road(pred) if pred is not None else None

        new_sections: list[LaneSectionDef] = []
        for sec_index, sec in enumerate(road.sections):
            new_lanes: list[LaneDef] = []
            for lane in sec.lanes:
                new_lane = lane
                if lane.lane_type not in KEPT_TYPES:
                    if lane.lane_type != "none":
                        report.append(
                            f"road {road.road_id} lane {lane.lane_id}: "
                            f"type '{lane.lane_type}' mapped to none"
                        )
                    new_lane = replace(new_lane, lane_type="none")
                if lane.width_varies:
                    report.append(
                        f"road {road.road_id} lane {lane.lane_id}: varying width kept as constant"
                    )
                    new_lane = replace(new_lane, width_varies=False)

                if new_lane.successor is not None:
                    if sec_index + 1 < len(road.sections):
                        target = road.sections[sec_index + 1].lane(new_lane.successor)
                    elif succ_road is not None and succ_road.sections:
                        target = succ_road.sections[0].lane(new_lane.successor)
                    else:
                        target = None
                    if target is None:
                        report.append(
                            f"road {road.road_id} lane {lane.lane_id}: "
                            f"dangling successor {new_lane.successor} removed"
                        )
                        new_lane = replace(new_lane, successor=None)
                if new_lane.predecessor is not None:
                    if sec_index > 0:
                        target = road.sections[sec_index - 1].lane(new_lane.predecessor)
                    elif pred_road is not None and pred_road.sections:
                        target = pred_road.sections[-1].lane(new_lane.predecessor)
                    else:
                        target = None
                    if target is None:
                        report.append(
                            f"road {road.road_id} lane {lane.lane_id}: "
                            f"dangling predecessor {new_lane.predecessor} removed"
                        )
                        new_lane = replace(new_lane, predecessor=None)
                new_lanes.append(new_lane)
            new_sections.append(LaneSectionDef(s=sec.s, lanes=tuple(new_lanes)))
        new_roads.append(
            RoadDef(
                road_id=road.road_id,
                length=road.length,
                plan_view=road.plan_view,
                sections=tuple(new_sections),
                predecessor=pred,
                successor=succ,
            )
        )
    return PruneResult(doc=OpenDriveDoc(roads=tuple(new_roads), warnings=doc.warnings), report=tuple(report))
