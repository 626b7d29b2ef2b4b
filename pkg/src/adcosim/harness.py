"""Co-simulation coordinator: fixed-step loop, three-stream logging, and the
lock-step two-process socket mode.

Tick order: (1) the dynamics side applies the control received last tick
and steps, (2) its Dialect-A messages are published, (3) the bridge relays
them to Dialect B, (4) the ADS computes and publishes control on B, (5) the
bridge relays the control back to A where it is applied next tick. Identical
(config, seed) produces byte-identical logs; socket mode reproduces the
in-process dynamics log byte-for-byte.
"""

from __future__ import annotations

import hashlib
import queue
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from .ads import AdsAgent, PlannerConfig
from .bridge import Bridge, BridgeConfig, default_bridge_config
from .bus import Bus
from .codecs import encode
from .dynamics import DynamicsAgent, SensorConfig, VehicleParams
from .mapping import build_map_products
from .messages import Dialect, MessageEnvelope, TickMsg
from .scenario import ScenarioSpec, save_scenario
from .socketbus import BusServer

DYNAMICS_FILE = "dynamics.csv"
ADS_FILE = "ads.csv"
BRIDGE_FILE = "bridge.csv"

BRIDGE_HEADER = ("t", "seq", "source", "destination", "digest")
ADS_HEADER = (
    "tick", "t", "lead_id", "gap", "idm_accel", "throttle_pct", "brake_pct", "steer_pct", "stale",
)

TICK_TOPIC = "/sync/tick"
TICK_ACK_TOPIC = "/sync/tick_ack"
READY_TOPIC = "/sync/ready"

B_CHANNELS = (
    "/apollo/startup",
    "/apollo/localization/pose",
    "/apollo/canbus/chassis",
    "/apollo/perception/obstacles",
)


class HarnessError(RuntimeError):
    pass


class IncompleteLog(ValueError):
    pass


@dataclass
class SimConfig:
    scenario: ScenarioSpec
    dt: float = 0.01
    duration_s: float | None = None
    mode: str = "in_process"  # "in_process" | "socket"
    seed: int = 0  # reserved for future noise models; no effect today
    log_dir: Path | None = None

    @property
    def effective_duration(self) -> float:
        return self.duration_s if self.duration_s is not None else self.scenario.duration_s

    @property
    def n_ticks(self) -> int:
        return int(round(self.effective_duration / self.dt))


def format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):
        value = value.item()
        if isinstance(value, float):
            return repr(value)
    return str(value)


def rows_to_csv(header: tuple[str, ...], rows: list[dict]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(row[col]) for col in header))
    return "\n".join(lines) + "\n"


def write_rows(path: Path, header: tuple[str, ...], rows: list[dict]) -> None:
    path.write_text(rows_to_csv(header, rows), encoding="utf-8")


@dataclass
class SimLog:
    dynamics_rows: list[dict]
    ads_rows: list[dict]
    bridge_rows: list[dict]
    dynamics_header: tuple[str, ...]
    ads_header: tuple[str, ...] = ADS_HEADER
    bridge_header: tuple[str, ...] = BRIDGE_HEADER

    def dynamics_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.dynamics_rows, columns=list(self.dynamics_header))

    def ads_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.ads_rows, columns=list(self.ads_header))

    def bridge_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.bridge_rows, columns=list(self.bridge_header))

    def write(self, log_dir: str | Path) -> dict[str, Path]:
        out = Path(log_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "dynamics": out / DYNAMICS_FILE,
            "ads": out / ADS_FILE,
            "bridge": out / BRIDGE_FILE,
        }
        write_rows(paths["dynamics"], self.dynamics_header, self.dynamics_rows)
        write_rows(paths["ads"], self.ads_header, self.ads_rows)
        write_rows(paths["bridge"], self.bridge_header, self.bridge_rows)
        return paths

    def digests(self) -> dict[str, str]:
        return {
            "dynamics": hashlib.sha256(rows_to_csv(self.dynamics_header, self.dynamics_rows).encode()).hexdigest(),
            "ads": hashlib.sha256(rows_to_csv(self.ads_header, self.ads_rows).encode()).hexdigest(),
            "bridge": hashlib.sha256(rows_to_csv(self.bridge_header, self.bridge_rows).encode()).hexdigest(),
        }

    @classmethod
    def read(cls, log_dir: str | Path) -> "SimLog":
        out = Path(log_dir)
        for name in (DYNAMICS_FILE, ADS_FILE, BRIDGE_FILE):
            if not (out / name).exists():
                raise IncompleteLog(f"missing log file {name} in {out}")
        dyn = pd.read_csv(out / DYNAMICS_FILE, float_precision="round_trip")
        ads = pd.read_csv(out / ADS_FILE, float_precision="round_trip")
        bridge = pd.read_csv(out / BRIDGE_FILE, float_precision="round_trip")
        return cls(
            dynamics_rows=dyn.to_dict(orient="records"),
            ads_rows=ads.to_dict(orient="records"),
            bridge_rows=bridge.to_dict(orient="records"),
            dynamics_header=tuple(dyn.columns),
            ads_header=tuple(ads.columns),
            bridge_header=tuple(bridge.columns),
        )


def _register_topics(bus_a: Bus, bus_b: Bus, bridge_config: BridgeConfig, with_sync: bool) -> None:
    for spec in bridge_config.converters:
        bus_a.register(spec.a_topic, Dialect.A)
        bus_b.register(spec.b_channel, Dialect.B)
    if with_sync:
        for bus in (bus_a, bus_b):
            bus.register(TICK_TOPIC, Dialect.A)
            bus.register(TICK_ACK_TOPIC, Dialect.A)
            bus.register(READY_TOPIC, Dialect.A)


def _bridge_logger(rows: list[dict]):
    def hook(env: MessageEnvelope, destination: str, converted, source_dialect: Dialect) -> None:
        # The bus already validated the envelope on publish.
        digest = hashlib.sha256(encode(env, source_dialect, validate=False)).hexdigest()[:16]
        rows.append(
            {
                "t": env.stamp_s,
                "seq": env.seq,
                "source": env.channel,
                "destination": destination,
                "digest": digest,
            }
        )

    return hook


def dynamics_header_for(spec: ScenarioSpec) -> tuple[str, ...]:
    cols = ["tick", "t", "ego_x", "ego_y", "ego_yaw", "ego_v", "ego_a", "ego_gear"]
    for actor in spec.traffic:
        cols += [f"actor{actor.actor_id}_x", f"actor{actor.actor_id}_y", f"actor{actor.actor_id}_v"]
    return tuple(cols)


def run(config: SimConfig) -> SimLog:
    """Execute the scenario and return the three log streams."""
    if config.mode == "socket":
        return _run_socket(config)
    if config.mode != "in_process":
        raise HarnessError(f"unknown mode {config.mode!r}")
    return _run_in_process(config)


def _run_in_process(config: SimConfig) -> SimLog:
    spec = config.scenario
    base, graph = build_map_products(spec.map_ref)
    bridge_config = default_bridge_config()

    bus_a, bus_b = Bus(), Bus()
    _register_topics(bus_a, bus_b, bridge_config, with_sync=False)
    bridge_rows: list[dict] = []
    bridge = Bridge(bridge_config)
    bridge.relay_hook = _bridge_logger(bridge_rows)
    bridge.start(bus_a, bus_b)

    dynamics = DynamicsAgent(spec, base, config.dt)
    ads = AdsAgent(base, graph, config.dt)

    control_sub = bus_a.subscribe("/cm/control")
    inbox_b: list[tuple[str, object]] = []
    for channel in B_CHANNELS:
        bus_b.subscribe(channel, callback=lambda env, _c=channel: inbox_b.append((_c, env.payload)))

    dynamics_rows: list[dict] = []
    ads_rows: list[dict] = []

    for tick in range(config.n_ticks):
        try:
            for env in control_sub.drain():
                dynamics.deliver_control(env.payload)
            stamp, messages, dyn_row = dynamics.on_tick(tick)
            for channel, payload in messages:
                bus_a.publish(channel, MessageEnvelope.for_channel(channel, stamp, payload))
            for channel, payload in inbox_b:
                ads.handle_payload(channel, payload, tick)
            inbox_b.clear()
            control, ads_row = ads.control_tick(tick)
            if control is not None:
                bus_b.publish("/apollo/control", MessageEnvelope.for_channel("/apollo/control", stamp, control))
            dynamics_rows.append(dyn_row)
            if ads_row is not None:
                ads_rows.append(ads_row)
        except Exception as exc:
            raise HarnessError(f"tick {tick}: {exc}") from exc

    bridge.shutdown()
    return SimLog(
        dynamics_rows=dynamics_rows,
        ads_rows=ads_rows,
        bridge_rows=bridge_rows,
        dynamics_header=dynamics_header_for(spec),
    )


def _wait_ack(ack_queue: "queue.Queue[int]", tick: int, side: str) -> None:
    try:
        got = ack_queue.get(timeout=30.0)
    except queue.Empty:
        raise HarnessError(f"tick {tick}: no {side} ack within 30 s") from None
    if got != tick:
        raise HarnessError(f"tick {tick}: {side} acked tick {got}")


def _run_socket(config: SimConfig) -> SimLog:
    spec = config.scenario
    if config.log_dir is None:
        raise HarnessError("socket mode requires a log_dir")
    log_dir = Path(config.log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    scenario_path = log_dir / "scenario.json"
    save_scenario(spec, scenario_path)

    bridge_config = default_bridge_config()
    bus_a, bus_b = Bus(), Bus()
    _register_topics(bus_a, bus_b, bridge_config, with_sync=True)
    bridge_rows: list[dict] = []
    bridge = Bridge(bridge_config)
    bridge.relay_hook = _bridge_logger(bridge_rows)
    bridge.start(bus_a, bus_b)

    ack_a: "queue.Queue[int]" = queue.Queue()
    ack_b: "queue.Queue[int]" = queue.Queue()
    ready_a: "queue.Queue[int]" = queue.Queue()
    ready_b: "queue.Queue[int]" = queue.Queue()
    bus_a.subscribe(TICK_ACK_TOPIC, callback=lambda env: ack_a.put(env.payload.index))
    bus_b.subscribe(TICK_ACK_TOPIC, callback=lambda env: ack_b.put(env.payload.index))
    bus_a.subscribe(READY_TOPIC, callback=lambda env: ready_a.put(env.payload.index))
    bus_b.subscribe(READY_TOPIC, callback=lambda env: ready_b.put(env.payload.index))

    server_a = BusServer(bus_a)
    server_b = BusServer(bus_b)
    procs: list[subprocess.Popen] = []
    try:
        common = [sys.executable, "-m", "adcosim.workers"]
        procs.append(
            subprocess.Popen(
                common
                + [
                    "dynamics",
                    "--endpoint", server_a.endpoint,
                    "--scenario", str(scenario_path),
                    "--dt", str(config.dt),
                    "--ticks", str(config.n_ticks),
                    "--log", str(log_dir / DYNAMICS_FILE),
                ]
            )
        )
        procs.append(
            subprocess.Popen(
                common
                + [
                    "ads",
                    "--endpoint", server_b.endpoint,
                    "--scenario", str(scenario_path),
                    "--dt", str(config.dt),
                    "--ticks", str(config.n_ticks),
                    "--log", str(log_dir / ADS_FILE),
                ]
            )
        )

        # Ticks may flow only once both workers have subscribed; unsubscribed
        # publishes would be dropped.
        for ready_queue, side in ((ready_a, "dynamics"), (ready_b, "ads")):
            try:
                ready_queue.get(timeout=30.0)
            except queue.Empty:
                raise HarnessError(f"{side} worker did not report ready within 30 s") from None

        for tick in range(config.n_ticks):
            stamp = tick * config.dt
            bus_a.publish(TICK_TOPIC, MessageEnvelope.for_channel(TICK_TOPIC, stamp, TickMsg(tick)))
            _wait_ack(ack_a, tick, "dynamics")
            bus_b.publish(TICK_TOPIC, MessageEnvelope.for_channel(TICK_TOPIC, stamp, TickMsg(tick)))
            _wait_ack(ack_b, tick, "ads")

        for proc in procs:
            if proc.wait(timeout=30.0) != 0:
                raise HarnessError(f"worker exited with {proc.returncode}")
    finally:
        for proc in procs:
            if proc.poll() is None:
                proc.kill()
        server_a.close()
        server_b.close()
        bridge.shutdown()

    dyn = pd.read_csv(log_dir / DYNAMICS_FILE, float_precision="round_trip")
    ads = pd.read_csv(log_dir / ADS_FILE, float_precision="round_trip")
    log = SimLog(
        dynamics_rows=dyn.to_dict(orient="records"),
        ads_rows=ads.to_dict(orient="records"),
        bridge_rows=bridge_rows,
        dynamics_header=tuple(dyn.columns),
        ads_header=tuple(ads.columns),
    )
    write_rows(log_dir / BRIDGE_FILE, log.bridge_header, bridge_rows)
    return log
