import json
import math

import pandas as pd
import pytest

from adcosim.mapping import build_map_products
from adcosim.scenario import (
    DeclaredEvent,
    DetectionParams,
    EgoSetup,
    MissingColumn,
    ScenarioSpec,
    SpeedPhase,
    TrafficActor,
    TrajectorySample,
    UnknownEgo,
    _scripted_actor,
    detect_maneuvers,
    export_scenario,
    interpolate_actor,
    lane_id_assignment,
    lane_id_for_y,
    load_highd_csv,
    load_scenario,
    make_case,
    save_scenario,
    scenario_to_tracks,
    validate_scenario,
    write_tracks_csv,
)

MAP_REF = "builtin:straight_highway_3km"


@pytest.fixture(scope="module")
def base_map():
    base, _ = build_map_products(MAP_REF)
    return base


def mini_cut_in_spec(cross_time=27.98, gap_bumper=40.0, extra_actor=True) -> ScenarioSpec:
    """Hand-built cut-in fixture: ego at 20 m/s, actor crossing y=-25 at cross_time."""
    ego = EgoSetup(
        init_lane_uid="1.0.-2", init_s=20.0, init_speed=20.0, desired_speed=20.0, goal_s=2900.0
    )
    actor = _scripted_actor(
        actor_id=7,
        x0=20.0 + gap_bumper + 4.5,
        v0=20.0,
        phases=(),
        y0=-23.0,
        y1=-27.0,
        change_start=cross_time - 2.0,
        change_duration=4.0,
        duration=59.96,
        extra_times=(cross_time,),
    )
    traffic = [actor]
    if extra_actor:
        traffic.append(
            _scripted_actor(
                actor_id=8,
                x0=220.0,
                v0=20.0,
                phases=(),
                y0=-23.0,
                y1=None,
                change_start=0.0,
                change_duration=0.0,
                duration=59.96,
            )
        )
    return ScenarioSpec(
        name="fixture_cut_in",
        map_ref=MAP_REF,
        duration_s=59.96,
        ego=ego,
        traffic=tuple(traffic),
        declared_events=(DeclaredEvent(kind="cut_in", actor_id=7, time_s=cross_time),),
    )


@pytest.fixture(scope="module")
def cut_in_table(base_map):
    return scenario_to_tracks(mini_cut_in_spec(), base_map)


def test_tracks_fixture_shape(cut_in_table, tmp_path_factory):
    assert len(cut_in_table.frames["frame"].unique()) == 1500
    path = tmp_path_factory.mktemp("tracks") / "tracks.csv"
    write_tracks_csv(cut_in_table, path)
    table = load_highd_csv(path)
    assert table.vehicle_ids() == [1, 7, 8]


def test_load_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame({"frame": [0], "id": [1], "x": [0.0]}).to_csv(path, index=False)
    with pytest.raises(MissingColumn):
        load_highd_csv(path)


def test_load_empty_csv_with_header(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("frame,id,x,y,xVelocity,yVelocity,width,height,laneId\n")
    table = load_highd_csv(path)
    assert len(table.frames) == 0


def test_detect_cut_in_at_frame_700(cut_in_table):
    events = detect_maneuvers(cut_in_table, ego_id=1)
    assert len(events) == 1
    event = events[0]
    assert event.kind == "cut_in"
    assert event.actor_id == 7
    assert event.frame_cross == 700
    assert event.frame_start == 700 - 125
    assert event.frame_end == 700 + 125


def test_detect_unknown_ego(cut_in_table):
    with pytest.raises(UnknownEgo):
        detect_maneuvers(cut_in_table, ego_id=99)


def test_actor_behind_ego_no_event(base_map):
    spec = mini_cut_in_spec(extra_actor=False)
    behind = _scripted_actor(
        actor_id=9,
        x0=-60.0,  # 80 m behind the ego start; gap stays negative
        v0=20.0,
        phases=(),
        y0=-23.0,
        y1=-27.0,
        change_start=30.0,
        change_duration=4.0,
        duration=59.96,
    )
    spec = ScenarioSpec(
        name=spec.name, map_ref=spec.map_ref, duration_s=spec.duration_s, ego=spec.ego,
        traffic=(behind,), declared_events=(),
    )
    table = scenario_to_tracks(spec, base_map)
    assert detect_maneuvers(table, ego_id=1) == []


def test_two_cut_ins_ordered(base_map):
    first = _scripted_actor(
        actor_id=7, x0=20.0 + 34.5, v0=20.0, phases=(), y0=-23.0, y1=-27.0,
        change_start=8.0, change_duration=4.0, duration=59.96, extra_times=(10.0,),
    )
    second = _scripted_actor(
        actor_id=8, x0=20.0 + 84.5, v0=20.0, phases=(), y0=-23.0, y1=-27.0,
        change_start=28.0, change_duration=4.0, duration=59.96, extra_times=(30.0,),
    )
    spec = ScenarioSpec(
        name="double", map_ref=MAP_REF, duration_s=59.96,
        ego=EgoSetup("1.0.-2", 20.0, 20.0, 20.0, 2900.0),
        traffic=(first, second),
    )
    table = scenario_to_tracks(spec, base_map)
    events = detect_maneuvers(table, ego_id=1)
    assert [e.kind for e in events] == ["cut_in", "cut_in"]
    assert [e.actor_id for e in events] == [7, 8]
    assert events[0].frame_cross < events[1].frame_cross


def test_detection_permutation_invariant(cut_in_table):
    shuffled = cut_in_table.frames.sample(frac=1.0, random_state=5).reset_index(drop=True)
    from adcosim.scenario import TrackTable

    table = TrackTable(frames=shuffled.sort_values(["id", "frame"]).reset_index(drop=True),
                       frame_rate=cut_in_table.frame_rate)
    assert detect_maneuvers(table, ego_id=1) == detect_maneuvers(cut_in_table, ego_id=1)


def test_export_cut_in_window(cut_in_table, base_map):
    event = detect_maneuvers(cut_in_table, ego_id=1)[0]
    spec = export_scenario(cut_in_table, event, MAP_REF, base_map)
    assert len(spec.traffic) == 1
    assert spec.traffic[0].actor_id == 7
    assert spec.declared_events[0].kind == "cut_in"
    assert spec.declared_events[0].time_s == pytest.approx(5.0)
    assert spec.duration_s == pytest.approx(10.0)
    assert spec.ego.init_lane_uid == "1.0.-2"
    validate_scenario(spec, base_map)


def test_export_following_no_crossing(base_map):
    table = scenario_to_tracks(make_case("following"), base_map)
    events = detect_maneuvers(table, ego_id=1)
    follows = [e for e in events if e.kind == "following"]
    assert len(follows) == 1
    spec = export_scenario(table, follows[0], MAP_REF, base_map)
    assert spec.declared_events[0].time_s is None
    assert spec.duration_s >= 10.0


def test_export_round_trips_bit_identically(cut_in_table, base_map, tmp_path):
    event = detect_maneuvers(cut_in_table, ego_id=1)[0]
    spec = export_scenario(cut_in_table, event, MAP_REF, base_map)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_scenario(spec, p1)
    save_scenario(load_scenario(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert load_scenario(p1) == spec


def test_make_case_declared_events():
    assert make_case("cut_in").declared_events == (
        DeclaredEvent(kind="cut_in", actor_id=101, time_s=50.188),
    )
    assert make_case("cut_out").declared_events == (
        DeclaredEvent(kind="cut_out", actor_id=201, time_s=53.8),
    )
    following = make_case("following").declared_events[0]
    assert following.kind == "following"
    assert following.time_s is None


def test_make_case_specs_validate_against_map(base_map):
    for case in ("cut_in", "cut_out", "following"):
        validate_scenario(make_case(case), base_map)


def test_make_case_unknown():
    with pytest.raises(ValueError):
        make_case("case4")


@pytest.mark.parametrize(
    "case,kind,declared_time",
    [("cut_in", "cut_in", 50.188), ("cut_out", "cut_out", 53.8)],
)
def test_detection_recovers_scripted_crossings(base_map, case, kind, declared_time):
    spec = make_case(case)
    table = scenario_to_tracks(spec, base_map)
    events = detect_maneuvers(table, ego_id=1)
    assert len(events) == 1
    event = events[0]
    assert event.kind == kind
    assert abs(event.frame_cross - declared_time * table.frame_rate) <= 1.0


def test_following_case_yields_exactly_one_following(base_map):
    table = scenario_to_tracks(make_case("following"), base_map)
    events = detect_maneuvers(table, ego_id=1)
    assert [e.kind for e in events] == ["following"]
    event = events[0]
    assert (event.frame_end - event.frame_start) / table.frame_rate >= 10.0


def test_lane_id_buckets(base_map):
    buckets = lane_id_assignment(base_map)
    assert lane_id_for_y(buckets, -30.0) == 1  # shoulder
    assert lane_id_for_y(buckets, -27.0) == 2
    assert lane_id_for_y(buckets, -23.0) == 3
    assert lane_id_for_y(buckets, -25.0) == 3  # boundary belongs to the upper lane


def test_interpolation_holds_ends():
    actor = TrafficActor(
        actor_id=1,
        trajectory=(
            TrajectorySample(1.0, 0.0, 0.0, 5.0, 0.0),
            TrajectorySample(2.0, 10.0, 0.0, 5.0, 0.0),
        ),
    )
    assert interpolate_actor(actor, 1.5).x == pytest.approx(5.0)
    assert interpolate_actor(actor, 0.0).x == 0.0
    assert interpolate_actor(actor, 9.0).x == 10.0


def test_scenario_timestamps_strictly_increasing(base_map):
    spec = make_case("cut_in")
    for actor in spec.traffic:
        ts = [s.t for s in actor.trajectory]
        assert all(b > a for a, b in zip(ts, ts[1:]))
        assert any(abs(t - 50.188) < 1e-12 for t in ts)
