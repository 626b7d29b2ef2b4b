"""Post-run analysis: maneuver timing recovered from logs, gap/acceleration
metrics, scenario-assertion verdicts, and report emission.

Lane-crossing times are recovered independently of the scenario script by
linear interpolation of each traffic actor's lateral position across the
boundaries shared by adjacent driving lanes. Gaps are bumper-to-bumper along
the lane direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .harness import SimLog
from .mapping import BaseMap
from .scenario import ScenarioSpec

REPORT_SCHEMA_VERSION = 1

LANE_BAND_FLATNESS_TOL = 0.1


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class CrossingEvent:
    actor_id: int
    kind: str  # "cut_in" | "cut_out"
    boundary_y: float
    time_s: float
    onset_gap_m: float


@dataclass(frozen=True)
class AssertionResult:
    kind: str
    passed: bool
    detail: str


@dataclass
class AnalysisReport:
    schema_version: int
    scenario_name: str
    mode: str
    seed: int
    dt_s: float
    tick_count: int
    crossings: list[CrossingEvent]
    min_in_lane_gap_m: float | None
    max_in_lane_gap_m: float | None
    accel_min_mps2: float
    accel_max_mps2: float
    lane_keeping_max_m: float
    collision: bool
    assertion_results: list[AssertionResult]
    verdict: str
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["crossings"] = [asdict(c) for c in self.crossings]
        data["assertion_results"] = [asdict(a) for a in self.assertion_results]
        return data


def validate_report_dict(data: dict) -> None:
    """Schema check for report.json; raises AnalysisError on violations."""
    required = {
        "schema_version": int,
        "scenario_name": str,
        "mode": str,
        "seed": int,
        "dt_s": float,
        "tick_count": int,
        "crossings": list,
        "accel_min_mps2": float,
        "accel_max_mps2": float,
        "lane_keeping_max_m": float,
        "collision": bool,
        "assertion_results": list,
        "verdict": str,
        "notes": list,
    }
    for key, typ in required.items():
        if key not in data:
            raise AnalysisError(f"report missing key {key!r}")
        if not isinstance(data[key], typ):
            raise AnalysisError(f"report key {key!r} must be {typ.__name__}")
    if data["verdict"] not in ("pass", "fail"):
        raise AnalysisError("verdict must be 'pass' or 'fail'")
    for item in data["crossings"]:
        for key in ("actor_id", "kind", "boundary_y", "time_s", "onset_gap_m"):
            if key not in item:
                raise AnalysisError(f"crossing entry missing {key!r}")
    for item in data["assertion_results"]:
        for key in ("kind", "passed", "detail"):
            if key not in item:
                raise AnalysisError(f"assertion entry missing {key!r}")


def _flat_line_y(points: np.ndarray, what: str) -> float:
    ys = points[:, 1]
    if float(np.max(ys) - np.min(ys)) > LANE_BAND_FLATNESS_TOL:
        raise AnalysisError(f"{what} is not flat; crossing analysis supports straight maps only")
    return float(np.mean(ys))


def driving_boundary_lines(base: BaseMap) -> tuple[list[float], list[float]]:
    """(interior boundaries between adjacent driving lanes, all driving-lane edges)."""
    interior = []
    edges = set()
    for lane in base.driving_lanes():
        left = _flat_line_y(lane.left_boundary, f"lane {lane.uid} left boundary")
        right = _flat_line_y(lane.right_boundary, f"lane {lane.uid} right boundary")
        edges.add(round(left, 6))
        edges.add(round(right, 6))
        for neighbor_uid in (lane.left_neighbor, lane.right_neighbor):
            if neighbor_uid is None:
                continue
            neighbor = base.lanes[neighbor_uid]
            if not neighbor.is_driving:
                continue
            shared = right if neighbor_uid == lane.right_neighbor else left
            interior.append(round(shared, 6))
    return sorted(set(interior)), sorted(edges, reverse=True)


def _interp_crossing(t: np.ndarray, y: np.ndarray, boundary: float) -> list[float]:
    diff = y - boundary
    times = []
    for i in range(len(diff) - 1):
        a, b = diff[i], diff[i + 1]
        if a == 0.0:
            continue
        if (a > 0 > b) or (a < 0 < b) or (b == 0.0 and a != 0.0):
            frac = a / (a - b)
            times.append(float(t[i] + frac * (t[i + 1] - t[i])))
    return times


@dataclass
class _Arrays:
    t: np.ndarray
    ego_x: np.ndarray
    ego_y: np.ndarray
    ego_v: np.ndarray
    ego_a: np.ndarray
    ego_gear: np.ndarray
    actors: dict[int, dict[str, np.ndarray]]


def _extract_arrays(log: SimLog, spec: ScenarioSpec) -> _Arrays:
    frame = log.dynamics_frame()
    if len(frame) == 0:
        raise AnalysisError("dynamics log is empty")
    ticks = frame["tick"].to_numpy()
    if not np.array_equal(ticks, np.arange(len(ticks))):
        from .harness import IncompleteLog

        raise IncompleteLog("dynamics log tick sequence has gaps")
    actors = {}
    for actor in spec.traffic:
        prefix = f"actor{actor.actor_id}"
        if f"{prefix}_x" not in frame.columns:
            from .harness import IncompleteLog

            raise IncompleteLog(f"dynamics log missing columns for actor {actor.actor_id}")
        actors[actor.actor_id] = {
            "x": frame[f"{prefix}_x"].to_numpy(dtype=float),
            "y": frame[f"{prefix}_y"].to_numpy(dtype=float),
            "v": frame[f"{prefix}_v"].to_numpy(dtype=float),
            "length": actor.length,
            "width": actor.width,
        }
    return _Arrays(
        t=frame["t"].to_numpy(dtype=float),
        ego_x=frame["ego_x"].to_numpy(dtype=float),
        ego_y=frame["ego_y"].to_numpy(dtype=float),
        ego_v=frame["ego_v"].to_numpy(dtype=float),
        ego_a=frame["ego_a"].to_numpy(dtype=float),
        ego_gear=frame["ego_gear"].to_numpy(dtype=int),
        actors=actors,
    )


def _ego_lane_center_y(base: BaseMap, spec: ScenarioSpec) -> float:
    lane = base.lane(spec.ego.init_lane_uid)
    return _flat_line_y(lane.centerline, f"lane {lane.uid} centerline")


def analyze(log: SimLog, spec: ScenarioSpec, base: BaseMap, mode: str = "in_process", seed: int = 0) -> AnalysisReport:
    """Derive maneuver times, gap and acceleration metrics, and the verdict."""
    arrays = _extract_arrays(log, spec)
    t = arrays.t
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    notes: list[str] = []

    interior, _ = driving_boundary_lines(base)
    ego_center_y = _ego_lane_center_y(base, spec)
    ego_half_width = base.lane(spec.ego.init_lane_uid).width / 2.0

    crossings: list[CrossingEvent] = []
    for actor_id, data in sorted(arrays.actors.items()):
        gap = arrays.actors[actor_id]["x"] - arrays.ego_x - (data["length"] + spec.ego.length) / 2.0
        for boundary in interior:
            for time_s in _interp_crossing(t, data["y"], boundary):
                idx = int(np.searchsorted(t, time_s))
                idx = min(max(idx, 0), len(t) - 1)
                y_after = data["y"][min(idx + 1, len(t) - 1)]
                toward_ego = (y_after - boundary) * (ego_center_y - boundary) > 0
                onset_gap = float(np.interp(time_s, t, gap))
                crossings.append(
                    CrossingEvent(
                        actor_id=actor_id,
                        kind="cut_in" if toward_ego else "cut_out",
                        boundary_y=boundary,
                        time_s=time_s,
                        onset_gap_m=onset_gap,
                    )
                )
    crossings.sort(key=lambda c: (c.time_s, c.actor_id))

    min_gap = None
    max_gap = None
    collision = False
    for actor_id, data in arrays.actors.items():
        gap = data["x"] - arrays.ego_x - (data["length"] + spec.ego.length) / 2.0
        in_lane = np.abs(data["y"] - ego_center_y) <= ego_half_width
        if np.any(in_lane):
            lane_gaps = gap[in_lane]
            lo, hi = float(np.min(lane_gaps)), float(np.max(lane_gaps))
            min_gap = lo if min_gap is None else min(min_gap, lo)
            max_gap = hi if max_gap is None else max(max_gap, hi)
        overlap_x = np.abs(data["x"] - arrays.ego_x) < (data["length"] + spec.ego.length) / 2.0
        overlap_y = np.abs(data["y"] - arrays.ego_y) < (data["width"] + spec.ego.width) / 2.0
        if np.any(overlap_x & overlap_y):
            collision = True

    lane_keeping = float(np.max(np.abs(arrays.ego_y - ego_center_y)))

    ctx = {
        "arrays": arrays,
        "spec": spec,
        "crossings": crossings,
        "collision": collision,
        "min_gap": min_gap,
        "lane_keeping": lane_keeping,
        "dt": dt,
    }
    results = [
        _evaluate_assertion(dict(assertion), ctx) for assertion in spec.assertions
    ]
    verdict = "pass" if all(r.passed for r in results) else "fail"
    if not spec.assertions:
        notes.append("scenario declares no assertions; verdict defaults to pass")

    return AnalysisReport(
        schema_version=REPORT_SCHEMA_VERSION,
        scenario_name=spec.name,
        mode=mode,
        seed=seed,
        dt_s=dt,
        tick_count=len(t),
        crossings=crossings,
        min_in_lane_gap_m=min_gap,
        max_in_lane_gap_m=max_gap,
        accel_min_mps2=float(np.min(arrays.ego_a)),
        accel_max_mps2=float(np.max(arrays.ego_a)),
        lane_keeping_max_m=lane_keeping,
        collision=collision,
        assertion_results=results,
        verdict=verdict,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Assertion evaluation

def _first_crossing(ctx, kind: str | None = None, actor_id: int | None = None) -> CrossingEvent | None:
    for crossing in ctx["crossings"]:
        if kind is not None and crossing.kind != kind:
            continue
        if actor_id is not None and crossing.actor_id != actor_id:
            continue
        return crossing
    return None


def _accel_phase(ctx, start_offset: float, speed_tol: float) -> tuple[float, float] | None:
    """(phase start, time the ego first reaches desired speed) or None."""
    crossing = _first_crossing(ctx)
    if crossing is None:
        return None
    arrays = ctx["arrays"]
    desired = ctx["spec"].ego.desired_speed
    mask = (arrays.t >= crossing.time_s) & (np.abs(arrays.ego_v - desired) <= speed_tol)
    if not np.any(mask):
        return None
    t_end = float(arrays.t[np.argmax(mask)])
    return crossing.time_s + start_offset, t_end


def _evaluate_assertion(assertion: dict, ctx) -> AssertionResult:
    kind = assertion.get("kind", "")
    arrays: _Arrays = ctx["arrays"]

    if kind == "crossing_time":
        crossing = _first_crossing(ctx, assertion["event"], assertion.get("actor_id"))
        if crossing is None:
            return AssertionResult(kind, False, f"no {assertion['event']} crossing detected")
        err = abs(crossing.time_s - assertion["time_s"])
        passed = err <= assertion["tol_s"]
        return AssertionResult(
            kind, passed,
            f"detected at {crossing.time_s:.3f} s (expected {assertion['time_s']} +/- {assertion['tol_s']})",
        )

    if kind == "decel_after_crossing":
        crossing = _first_crossing(ctx, actor_id=assertion.get("actor_id"))
        if crossing is None:
            return AssertionResult(kind, False, "no crossing detected")
        mask = (arrays.t >= crossing.time_s) & (arrays.t <= crossing.time_s + assertion["within_s"])
        min_a = float(np.min(arrays.ego_a[mask])) if np.any(mask) else math.inf
        return AssertionResult(
            kind, min_a < 0.0, f"min accel {min_a:.3f} m/s^2 within {assertion['within_s']} s of crossing"
        )

    if kind == "accel_band_after_crossing":
        phase = _accel_phase(ctx, assertion.get("start_offset_s", 0.2), assertion.get("speed_tol_mps", 0.1))
        if phase is None:
            return AssertionResult(kind, False, "ego never reached desired speed after crossing")
        t_lo, t_hi = phase
        mask = (arrays.t >= t_lo) & (arrays.t <= t_hi)
        a = arrays.ego_a[mask]
        a_max = assertion.get("max", 1.0)
        ok = bool(np.all(a > 0.0) and np.all(a <= a_max + 1e-9))
        return AssertionResult(
            kind, ok,
            f"accel in ({np.min(a):.3f}, {np.max(a):.3f}] over [{t_lo:.2f}, {t_hi:.2f}] s "
            f"(band (0, {a_max}])",
        )

    if kind == "gear_shift_during_accel_phase":
        phase = _accel_phase(ctx, 0.0, 0.1)
        if phase is None:
            return AssertionResult(kind, False, "no acceleration phase found")
        t_lo, t_hi = phase
        mask = (arrays.t >= t_lo) & (arrays.t <= t_hi)
        idx = np.flatnonzero(mask)
        shifts = 0
        last = len(arrays.t) - 1
        for i in idx[1:]:
            if arrays.ego_gear[i] == arrays.ego_gear[i - 1]:
                continue
            # The shifted cap takes effect one tick after the logged change.
            jump = max(
                abs(arrays.ego_a[i] - arrays.ego_a[i - 1]),
                abs(arrays.ego_a[min(i + 1, last)] - arrays.ego_a[i]),
            )
            if jump > 0.1:
                shifts += 1
        return AssertionResult(
            kind, shifts >= 1, f"{shifts} gear-shift acceleration discontinuities in the phase"
        )

    if kind == "no_collision":
        min_gap = ctx["min_gap"]
        gap_ok = min_gap is None or min_gap > 0.0
        passed = not ctx["collision"] and gap_ok
        gap_text = "n/a" if min_gap is None else f"{min_gap:.2f} m"
        return AssertionResult(kind, passed, f"collision={ctx['collision']}, min in-lane gap {gap_text}")

    if kind == "lane_keeping":
        passed = ctx["lane_keeping"] < assertion["max_lateral_m"]
        return AssertionResult(
            kind, passed,
            f"max lateral deviation {ctx['lane_keeping']:.4f} m (limit {assertion['max_lateral_m']})",
        )

    if kind == "speed_tracking":
        actor = arrays.actors.get(assertion["actor_id"])
        if actor is None:
            return AssertionResult(kind, False, f"actor {assertion['actor_id']} missing from log")
        tol = assertion.get("tol_mps", 1.0)
        settle = assertion.get("settle_s", 10.0)
        min_interval = assertion.get("min_interval_s", 5.0)
        t = arrays.t
        lead_v = actor["v"]
        const = np.abs(np.diff(lead_v)) < 5e-3
        intervals = []
        start = None
        for i, ok in enumerate(list(const) + [False]):
            if ok and start is None:
                start = i
            elif not ok and start is not None:
                intervals.append((start, i))
                start = None
        checked = 0
        worst = 0.0
        for i0, i1 in intervals:
            t_lo = t[i0] + settle
            t_hi = t[i1]
            if t_hi - t_lo < min_interval:
                continue
            mask = (t >= t_lo) & (t <= t_hi)
            err = float(np.max(np.abs(arrays.ego_v[mask] - lead_v[mask])))
            worst = max(worst, err)
            checked += 1
        if checked == 0:
            return AssertionResult(kind, False, "no qualifying constant-lead-speed interval")
        return AssertionResult(
            kind, worst <= tol,
            f"worst tracking error {worst:.3f} m/s over {checked} constant-speed interval(s)",
        )

    return AssertionResult(kind or "unknown", False, f"unknown assertion kind {kind!r}")


# ---------------------------------------------------------------------------
# Report emission

def _plot_csvs(log: SimLog, spec: ScenarioSpec, base: BaseMap, out: Path) -> list[Path]:
    from .harness import format_cell

    frame = log.dynamics_frame()
    actor_ids = sorted(a.actor_id for a in spec.traffic)
    _, edge_lines = driving_boundary_lines(base)

    paths = []

    lon_cols = ["t", "ego_x"] + [f"actor{a}_x" for a in actor_ids]
    lat_cols = ["t", "ego_y"] + [f"actor{a}_y" for a in actor_ids]
    ref_names = [f"lane_ref_{y:g}" for y in edge_lines]

    lon_path = out / "longitudinal_position.csv"
    with lon_path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(lon_cols) + "\n")
        for row in frame.itertuples(index=False):
            values = [getattr(row, c) for c in lon_cols]
            fh.write(",".join(format_cell(float(v)) for v in values) + "\n")
    paths.append(lon_path)

    lat_path = out / "lateral_position.csv"
    with lat_path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(lat_cols + ref_names) + "\n")
        ref_cells = [format_cell(float(y)) for y in edge_lines]
        for row in frame.itertuples(index=False):
            values = [format_cell(float(getattr(row, c))) for c in lat_cols]
            fh.write(",".join(values + ref_cells) + "\n")
    paths.append(lat_path)

    acc_path = out / "acceleration.csv"
    with acc_path.open("w", encoding="utf-8") as fh:
        fh.write("t,ego_accel_mps2\n")
        for row in frame.itertuples(index=False):
            fh.write(f"{format_cell(float(row.t))},{format_cell(float(row.ego_a))}\n")
    paths.append(acc_path)
    return paths


def _report_markdown(report: AnalysisReport) -> str:
    lines = [
        f"# Simulation report: {report.scenario_name}",
        "",
        f"- Verdict: **{report.verdict}**",
        f"- Mode: {report.mode}, seed {report.seed}, {report.tick_count} ticks at dt = {report.dt_s:g} s",
        f"- Ego acceleration range: [{report.accel_min_mps2:.3f}, {report.accel_max_mps2:.3f}] m/s^2",
        f"- Max lateral deviation from lane center: {report.lane_keeping_max_m:.4f} m",
        f"- Collision: {'yes' if report.collision else 'no'}",
    ]
    if report.min_in_lane_gap_m is not None:
        lines.append(
            f"- In-lane bumper gap range: [{report.min_in_lane_gap_m:.2f}, {report.max_in_lane_gap_m:.2f}] m"
        )
    if report.crossings:
        lines += ["", "## Lane crossings", ""]
        for c in report.crossings:
            lines.append(
                f"- actor {c.actor_id}: {c.kind} across y = {c.boundary_y:g} at "
                f"{c.time_s:.3f} s (onset gap {c.onset_gap_m:.2f} m)"
            )
    lines += ["", "## Assertions", ""]
    if not report.assertion_results:
        lines.append("- none declared")
    for result in report.assertion_results:
        status = "PASS" if result.passed else "FAIL"
        lines.append(f"- [{status}] {result.kind}: {result.detail}")
    if report.notes:
        lines += ["", "## Notes", ""] + [f"- {n}" for n in report.notes]
    return "\n".join(lines) + "\n"


def emit_report(
    report: AnalysisReport,
    log: SimLog,
    spec: ScenarioSpec,
    base: BaseMap,
    out_dir: str | Path,
) -> list[Path]:
    """Write report.json, report.md, and the three per-plot CSV files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = report.to_dict()
    validate_report_dict(data)
    json_path = out / "report.json"
    json_path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    md_path = out / "report.md"
    md_path.write_text(_report_markdown(report), encoding="utf-8")
    return [json_path, md_path] + _plot_csvs(log, spec, base, out)
