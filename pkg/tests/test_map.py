import math

import numpy as np
import pytest

from adcosim.mapping import (
    NoRoute,
    SnapFailure,
    UnsupportedGeometry,
    XmlError,
    build_base_map,
    build_map_products,
    build_routing_graph,
    build_sim_map,
    load_opendrive_source,
    parse_opendrive,
    prune,
    rdp,
    route,
    snap_to_driving_lane,
    validate_connectivity,
)
from adcosim.mapping.basemap import GeometryGap, project_to_polyline


def simple_road_xml(length=100.0, y0=0.0, lanes="", geometry=None, road_id="1", link="", lane_section_extra=""):
    geometry = geometry or f'<geometry s="0.0" x="0.0" y="{y0}" hdg="0.0" length="{length}"><line/></geometry>'
    return f"""<?xml version="1.0"?>
<OpenDRIVE>
  <road id="{road_id}" length="{length}" junction="-1">
    {link}
    <planView>{geometry}</planView>
    <lanes>
      <laneSection s="0.0">
        <center><lane id="0" type="none"/></center>
        <right>{lanes}</right>
      </laneSection>
      {lane_section_extra}
    </lanes>
  </road>
</OpenDRIVE>"""


DRIVING_LANE = '<lane id="-1" type="driving"><width a="4.0"/></lane>'


def test_parse_shipped_fixture():
    doc = parse_opendrive(load_opendrive_source("builtin:straight_highway"))
    assert len(doc.roads) == 1
    road = doc.roads[0]
    assert road.length == 420.0
    lanes = road.sections[0].lanes
    assert len(lanes) == 3
    assert sum(1 for l in lanes if l.lane_type == "driving") == 2
    assert sum(1 for l in lanes if l.lane_type == "shoulder") == 1


def test_parse_empty_doc():
    doc = parse_opendrive("<OpenDRIVE/>")
    assert doc.roads == ()


def test_parse_invalid_xml_reports_position():
    with pytest.raises(XmlError) as info:
        parse_opendrive("<OpenDRIVE>\n  <road oops\n</OpenDRIVE>")
    assert info.value.line >= 2


def test_spiral_under_driving_lane_rejected():
    xml = simple_road_xml(
        lanes=DRIVING_LANE,
        geometry='<geometry s="0" x="0" y="0" hdg="0" length="100"><spiral curvStart="0" curvEnd="0.01"/></geometry>',
    )
    with pytest.raises(UnsupportedGeometry):
        parse_opendrive(xml)


def test_spiral_without_driving_lane_is_warning():
    xml = simple_road_xml(
        lanes='<lane id="-1" type="border"><width a="1.0"/></lane>',
        geometry='<geometry s="0" x="0" y="0" hdg="0" length="100"><spiral curvStart="0" curvEnd="0.01"/></geometry>',
    )
    doc = parse_opendrive(xml)
    assert doc.roads == ()
    assert any("spiral" in w for w in doc.warnings)


def test_prune_sidewalk_mapped_to_none():
    xml = simple_road_xml(lanes=DRIVING_LANE + '<lane id="-2" type="sidewalk"><width a="2.0"/></lane>')
    result = prune(parse_opendrive(xml))
    lane = result.doc.roads[0].sections[0].lane(-2)
    assert lane.lane_type == "none"
    assert any("sidewalk" in entry for entry in result.report)
    base = build_base_map(result.doc)
    graph = build_routing_graph(base)
    assert "1.0.-2" not in graph.nodes


def test_prune_clean_doc_unchanged():
    xml = simple_road_xml(lanes=DRIVING_LANE)
    doc = parse_opendrive(xml)
    result = prune(doc)
    assert result.doc == doc
    assert result.report == ()


def test_prune_removes_dangling_road_link():
    xml = simple_road_xml(
        lanes=DRIVING_LANE,
        link='<link><successor elementType="road" elementId="99"/></link>',
    )
    result = prune(parse_opendrive(xml))
    assert result.doc.roads[0].successor is None
    assert any("missing road 99" in entry for entry in result.report)


def test_prune_idempotent():
    xml = simple_road_xml(
        lanes=DRIVING_LANE + '<lane id="-2" type="parking"><width a="2.5"/></lane>',
        link='<link><successor elementType="road" elementId="42"/></link>',
    )
    once = prune(parse_opendrive(xml))
    twice = prune(once.doc)
    assert twice.doc == once.doc
    assert twice.report == ()


def test_base_map_lane_offset_straight():
    xml = simple_road_xml(length=100.0, lanes=DRIVING_LANE)
    base = build_base_map(prune(parse_opendrive(xml)).doc)
    lane = base.lane("1.0.-1")
    assert lane.centerline[0] == pytest.approx([0.0, -2.0])
    assert lane.centerline[-1] == pytest.approx([100.0, -2.0])
    assert len(lane.centerline) == 101
    assert lane.left_boundary[0] == pytest.approx([0.0, 0.0])
    assert lane.right_boundary[0] == pytest.approx([0.0, -4.0])


def test_arc_quarter_circle_endpoint():
    # Radius 100 left turn through 90 degrees ends at (100, 100).
    length = (math.pi / 2) * 100.0
    xml = simple_road_xml(
        length=length,
        lanes=DRIVING_LANE,
        geometry=f'<geometry s="0" x="0" y="0" hdg="0" length="{length}"><arc curvature="0.01"/></geometry>',
    )
    doc = parse_opendrive(xml)
    seg = doc.roads[0].plan_view[0]
    x, y, hdg = seg.end_point()
    assert (x, y) == pytest.approx((100.0, 100.0), abs=1e-6)
    assert hdg == pytest.approx(math.pi / 2)
    # Circle-geometry oracle: every sampled reference point sits on the circle
    # centered at (0, 100) with radius 100.
    base = build_base_map(doc)
    lane = base.lane("1.0.-1")
    center = np.array([0.0, 100.0])
    radii = np.hypot(*(lane.centerline - center).T)
    assert np.allclose(radii, 102.0, atol=1e-9)  # lane center offset -2 -> radius 102


def test_two_road_chain_successors():
    xml = f"""<?xml version="1.0"?>
<OpenDRIVE>
  <road id="1" length="100" junction="-1">
    <link><successor elementType="road" elementId="2"/></link>
    <planView><geometry s="0" x="0" y="0" hdg="0" length="100"><line/></geometry></planView>
    <lanes><laneSection s="0.0">
      <center><lane id="0" type="none"/></center>
      <right><lane id="-1" type="driving"><link><successor id="-1"/></link><width a="4.0"/></lane></right>
    </laneSection></lanes>
  </road>
  <road id="2" length="80" junction="-1">
    <link><predecessor elementType="road" elementId="1"/></link>
    <planView><geometry s="0" x="100" y="0" hdg="0" length="80"><line/></geometry></planView>
    <lanes><laneSection s="0.0">
      <center><lane id="0" type="none"/></center>
      <right><lane id="-1" type="driving"><link><predecessor id="-1"/></link><width a="4.0"/></lane></right>
    </laneSection></lanes>
  </road>
</OpenDRIVE>"""
    base = build_base_map(prune(parse_opendrive(xml)).doc)
    assert base.lane("1.0.-1").successors == ("2.0.-1",)
    assert base.lane("2.0.-1").predecessors == ("1.0.-1",)
    for lane in base.lanes.values():
        for succ in lane.successors:
            gap = np.hypot(*(lane.centerline[-1] - base.lane(succ).centerline[0]))
            assert gap <= 0.01


def test_geometry_gap_detected():
    xml = simple_road_xml(
        length=200.0,
        lanes=DRIVING_LANE,
        geometry=(
            '<geometry s="0" x="0" y="0" hdg="0" length="100"><line/></geometry>'
            '<geometry s="100" x="100" y="5" hdg="0" length="100"><line/></geometry>'
        ),
    )
    with pytest.raises(GeometryGap):
        build_base_map(parse_opendrive(xml))


TWO_ROAD_TWO_LANE = """<?xml version="1.0"?>
<OpenDRIVE>
  <road id="1" length="100" junction="-1">
    <link><successor elementType="road" elementId="2"/></link>
    <planView><geometry s="0" x="0" y="0" hdg="0" length="100"><line/></geometry></planView>
    <lanes><laneSection s="0.0">
      <center><lane id="0" type="none"/></center>
      <right>
        <lane id="-1" type="driving"><link><successor id="-1"/></link><width a="4.0"/></lane>
        <lane id="-2" type="driving"><link><successor id="-2"/></link><width a="4.0"/></lane>
        <lane id="-3" type="shoulder"><width a="2.0"/></lane>
      </right>
    </laneSection></lanes>
  </road>
  <road id="2" length="100" junction="-1">
    <link><predecessor elementType="road" elementId="1"/></link>
    <planView><geometry s="0" x="100" y="0" hdg="0" length="100"><line/></geometry></planView>
    <lanes><laneSection s="0.0">
      <center><lane id="0" type="none"/></center>
      <right>
        <lane id="-1" type="driving"><link><predecessor id="-1"/></link><width a="4.0"/></lane>
        <lane id="-2" type="driving"><link><predecessor id="-2"/></link><width a="4.0"/></lane>
      </right>
    </laneSection></lanes>
  </road>
</OpenDRIVE>"""


def brute_force_route_cost(graph, start, goal):
    """Enumerate all simple lane paths and return (min cost, lex-smallest path)."""
    base = graph.base
    results = []

    def walk(path, entry_s, cost):
        uid = path[-1]
        if uid == goal.uid and entry_s <= goal.s + 1e-9:
            results.append((cost + (goal.s - entry_s), tuple(path)))
        lane_len = graph.lane_length(uid)
        for succ in graph.successor_edges[uid]:
            if succ not in path:
                walk(path + [succ], 0.0, cost + (lane_len - entry_s))
        for neighbor in graph.neighbor_edges[uid]:
            if neighbor not in path:
                walk(path + [neighbor], min(entry_s, graph.lane_length(neighbor)),
                     cost + graph.lane_change_penalty)

    walk([start.uid], start.s, 0.0)
    if not results:
        return None
    return min(results)


def test_route_same_lane():
    base, graph = build_map_products("builtin:straight_highway")
    result = route(graph, (10.0, -23.0), (300.0, -23.0))
    assert result.lane_uids == ("1.0.-1",)
    assert result.cost == pytest.approx(290.0)


def test_route_matches_brute_force_on_lane_change_fixture():
    base = build_base_map(prune(parse_opendrive(TWO_ROAD_TWO_LANE)).doc)
    graph = build_routing_graph(base)
    # Start on lane A2 (road 1, lane -2), goal on lane B1 (road 2, lane -1).
    start_xy = (20.0, -6.0)
    goal_xy = (150.0, -2.0)
    result = route(graph, start_xy, goal_xy)
    assert result.lane_uids == ("1.0.-2", "1.0.-1", "2.0.-1")
    oracle = brute_force_route_cost(graph, result.start, result.goal)
    assert result.cost == pytest.approx(oracle[0])
    assert result.lane_uids == oracle[1]


def test_route_brute_force_sweep_shipped_map():
    base, graph = build_map_products("builtin:straight_highway")
    cases = [
        ((5.0, -23.0), (400.0, -27.0)),
        ((5.0, -27.0), (380.0, -23.0)),
        ((100.0, -23.0), (120.0, -23.0)),
        ((50.0, -27.0), (60.0, -23.0)),
    ]
    for start_xy, goal_xy in cases:
        result = route(graph, start_xy, goal_xy)
        oracle = brute_force_route_cost(graph, result.start, result.goal)
        assert result.cost == pytest.approx(oracle[0]), (start_xy, goal_xy)
        assert result.lane_uids == oracle[1]


def test_route_goal_on_shoulder_is_no_route():
    base, graph = build_map_products("builtin:straight_highway")
    with pytest.raises(NoRoute):
        route(graph, (10.0, -23.0), (300.0, -30.0))


def test_snap_failure_beyond_five_meters():
    base, graph = build_map_products("builtin:straight_highway")
    with pytest.raises(SnapFailure):
        snap_to_driving_lane(base, 10.0, -50.0)


def test_shipped_map_two_routable_lanes_and_connectivity():
    base, graph = build_map_products("builtin:straight_highway")
    assert graph.nodes == ("1.0.-1", "1.0.-2")
    assert base.lane("1.0.-3").lane_type == "shoulder"
    assert validate_connectivity(graph) == []


def test_neighbor_symmetry():
    base, _ = build_map_products("builtin:straight_highway")
    assert base.lane("1.0.-1").right_neighbor == "1.0.-2"
    assert base.lane("1.0.-2").left_neighbor == "1.0.-1"
    assert base.lane("1.0.-2").right_neighbor == "1.0.-3"
    assert base.lane("1.0.-3").left_neighbor == "1.0.-2"
    assert base.lane("1.0.-1").left_neighbor is None


def max_deviation(original: np.ndarray, simplified: np.ndarray) -> float:
    worst = 0.0
    for p in original:
        proj = project_to_polyline(simplified, p[0], p[1])
        worst = max(worst, proj.distance)
    return worst


def test_sim_map_straight_collapses_to_two_points():
    base, _ = build_map_products("builtin:straight_highway")
    sim = build_sim_map(base, epsilon=0.5)
    lane = base.lane("1.0.-1")
    assert len(lane.centerline) == 421
    assert len(sim.polylines["1.0.-1"]) == 2


def test_sim_map_arc_deviation_bound():
    length = (math.pi / 2) * 100.0
    xml = simple_road_xml(
        length=length,
        lanes=DRIVING_LANE,
        geometry=f'<geometry s="0" x="0" y="0" hdg="0" length="{length}"><arc curvature="0.01"/></geometry>',
    )
    base = build_base_map(parse_opendrive(xml))
    sim = build_sim_map(base, epsilon=0.5)
    lane = base.lane("1.0.-1")
    poly = sim.polylines["1.0.-1"]
    assert len(poly) < len(lane.centerline)
    assert max_deviation(lane.centerline, poly) <= 0.5


def test_rdp_epsilon_zero_is_identity():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    out = rdp(pts, 0.0)
    assert np.array_equal(out, pts)


def test_serialize_round_trip(tmp_path):
    from adcosim.mapping import base_map_from_dict, base_map_to_dict, save_map_products
    from adcosim.mapping import build_sim_map

    base, graph = build_map_products("builtin:straight_highway")
    again = base_map_from_dict(base_map_to_dict(base))
    assert sorted(again.lanes) == sorted(base.lanes)
    lane, lane2 = base.lane("1.0.-1"), again.lane("1.0.-1")
    assert np.array_equal(lane.centerline, lane2.centerline)
    assert lane.successors == lane2.successors

    written = save_map_products(tmp_path, base=base, graph=graph, sim=build_sim_map(base))
    names = {p.name for p in written}
    assert names == {"base_map.json", "routing_map.json", "sim_map.json"}
