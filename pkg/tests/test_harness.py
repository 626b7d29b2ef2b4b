import math
from pathlib import Path

import pytest

from adcosim.analysis import analyze, emit_report, validate_report_dict
from adcosim.harness import IncompleteLog, SimConfig, SimLog, run
from adcosim.mapping import build_map_products
from adcosim.scenario import (
    DeclaredEvent,
    EgoSetup,
    ScenarioSpec,
    _scripted_actor,
    make_case,
)

MAP_REF = "builtin:straight_highway_3km"


def mini_scenario(duration=5.0, cross_time=2.5, assertions=()) -> ScenarioSpec:
    actor = _scripted_actor(
        actor_id=42,
        x0=100.0,
        v0=20.0,
        phases=(),
        y0=-23.0,
        y1=-27.0,
        change_start=cross_time - 1.0,
        change_duration=2.0,
        duration=duration,
        extra_times=(cross_time,),
    )
    return ScenarioSpec(
        name="mini",
        map_ref=MAP_REF,
        duration_s=duration,
        ego=EgoSetup("1.0.-2", 50.0, 20.0, 20.0, 2900.0),
        traffic=(actor,),
        declared_events=(DeclaredEvent(kind="cut_in", actor_id=42, time_s=cross_time),),
        assertions=tuple(assertions),
    )


@pytest.fixture(scope="module")
def base_map():
    base, _ = build_map_products(MAP_REF)
    return base


@pytest.fixture(scope="module")
def mini_log():
    spec = mini_scenario(assertions=[
        {"kind": "crossing_time", "event": "cut_in", "actor_id": 42, "time_s": 2.5, "tol_s": 0.02},
        {"kind": "no_collision"},
        {"kind": "lane_keeping", "max_lateral_m": 0.3},
    ])
    return spec, run(SimConfig(scenario=spec))


def test_tick_counts(mini_log):
    spec, log = mini_log
    assert len(log.dynamics_rows) == 500
    assert len(log.ads_rows) == 500
    assert log.dynamics_rows[0]["t"] == pytest.approx(0.01)
    assert log.dynamics_rows[-1]["t"] == pytest.approx(5.0)


def test_determinism_same_config(mini_log):
    spec, log = mini_log
    again = run(SimConfig(scenario=spec))
    assert log.digests() == again.digests()


def test_log_write_read_round_trip(mini_log, tmp_path):
    spec, log = mini_log
    paths = log.write(tmp_path)
    again = SimLog.read(tmp_path)
    assert again.digests() == log.digests()
    rewritten = again.write(tmp_path / "again")
    for key in paths:
        assert paths[key].read_bytes() == rewritten[key].read_bytes()


def test_incomplete_log_detected(tmp_path):
    with pytest.raises(IncompleteLog):
        SimLog.read(tmp_path)


def test_control_relay_log_completeness(mini_log):
    spec, log = mini_log
    control_relays = [row for row in log.bridge_rows if row["destination"] == "/cm/control"]
    assert len(control_relays) == len(log.ads_rows)
    seqs = [row["seq"] for row in control_relays]
    assert seqs == sorted(seqs)
    # A-side relays: startup once plus localization/chassis/objects per tick.
    a_relays = [row for row in log.bridge_rows if row["source"].startswith("/cm/") is False]
    assert len(log.bridge_rows) == len(control_relays) + 1 + 3 * len(log.dynamics_rows)


def test_analyzer_recovers_scripted_crossing(mini_log, base_map):
    spec, log = mini_log
    report = analyze(log, spec, base_map)
    assert report.verdict == "pass"
    assert len(report.crossings) == 1
    crossing = report.crossings[0]
    assert crossing.kind == "cut_in"
    assert abs(crossing.time_s - 2.5) <= 0.02
    assert report.tick_count == 500


def test_analyzer_no_crossing_case(base_map):
    spec = mini_scenario()
    no_change = _scripted_actor(
        actor_id=7, x0=120.0, v0=20.0, phases=(), y0=-27.0, y1=None,
        change_start=0.0, change_duration=0.0, duration=4.0,
    )
    spec = ScenarioSpec(
        name="follow_mini", map_ref=MAP_REF, duration_s=4.0,
        ego=spec.ego, traffic=(no_change,),
        declared_events=(DeclaredEvent(kind="following", actor_id=7, time_s=None),),
    )
    log = run(SimConfig(scenario=spec))
    report = analyze(log, spec, base_map)
    assert report.crossings == []
    assert report.min_in_lane_gap_m is not None
    assert report.min_in_lane_gap_m > 0


def test_emit_report_files(mini_log, base_map, tmp_path):
    spec, log = mini_log
    report = analyze(log, spec, base_map)
    written = emit_report(report, log, spec, base_map, tmp_path)
    names = {p.name for p in written}
    assert names == {
        "report.json", "report.md",
        "longitudinal_position.csv", "lateral_position.csv", "acceleration.csv",
    }
    import json

    data = json.loads((tmp_path / "report.json").read_text())
    validate_report_dict(data)
    lat = (tmp_path / "lateral_position.csv").read_text().splitlines()
    assert len(lat) == 1 + 500
    header = lat[0].split(",")
    for ref in ("lane_ref_-21", "lane_ref_-25", "lane_ref_-29"):
        assert ref in header
    first = dict(zip(header, lat[1].split(",")))
    assert float(first["lane_ref_-25"]) == -25.0
    acc = (tmp_path / "acceleration.csv").read_text().splitlines()
    assert len(acc) == 1 + 500


def test_socket_mode_matches_in_process(tmp_path):
    spec = mini_scenario(duration=3.0)
    log_in = run(SimConfig(scenario=spec, duration_s=3.0))
    in_paths = log_in.write(tmp_path / "inproc")
    log_sock = run(SimConfig(scenario=spec, duration_s=3.0, mode="socket", log_dir=tmp_path / "sock"))
    assert log_in.digests() == log_sock.digests()
    for name in ("dynamics.csv", "ads.csv", "bridge.csv"):
        assert (tmp_path / "inproc" / name).read_bytes() == (tmp_path / "sock" / name).read_bytes()


def test_run_rejects_unknown_mode():
    from adcosim.harness import HarnessError

    spec = mini_scenario(duration=1.0)
    with pytest.raises(HarnessError):
        run(SimConfig(scenario=spec, mode="carrier_pigeon"))


def test_error_reports_tick_index():
    # Ego placed on the shoulder: the startup route fails at tick 0 and the
    # harness wraps the error with the tick index.
    from adcosim.harness import HarnessError

    spec = mini_scenario(duration=1.0)
    bad = ScenarioSpec(
        name="bad", map_ref=spec.map_ref, duration_s=1.0,
        ego=EgoSetup("1.0.-3", 50.0, 20.0, 20.0, 2900.0),
        traffic=spec.traffic,
        declared_events=(),
    )
    with pytest.raises(HarnessError, match="tick 0"):
        run(SimConfig(scenario=bad))
