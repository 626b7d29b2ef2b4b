"""Child-process entry points for the two-process socket mode.

Each worker connects to its side's bus server, acknowledges every barrier
tick after finishing its step, and writes its own log stream using the same
row formatting as the in-process path, so logs are byte-identical across
modes.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .ads import AdsAgent
from .dynamics import DynamicsAgent
from .harness import ADS_HEADER, READY_TOPIC, TICK_ACK_TOPIC, TICK_TOPIC, dynamics_header_for, write_rows
from .mapping import build_map_products
from .messages import ControlMsg, TickMsg
from .scenario import load_scenario
from .socketbus import BusClient


def _common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--endpoint", required=True)
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--dt", type=float, required=True)
    parser.add_argument("--ticks", type=int, required=True)
    parser.add_argument("--log", required=True)


def run_dynamics_worker(endpoint: str, scenario_path: str, dt: float, n_ticks: int, log_path: str) -> int:
    spec = load_scenario(scenario_path)
    base, _ = build_map_products(spec.map_ref)
    agent = DynamicsAgent(spec, base, dt)
    client = BusClient(endpoint, subscribe_topics=[TICK_TOPIC, "/cm/control"])
    client.publish(READY_TOPIC, TickMsg(0), 0.0)
    rows: list[dict] = []
    try:
        while True:
            env = client.next_envelope(timeout=60.0)
            if isinstance(env.payload, ControlMsg):
                agent.deliver_control(env.payload)
                continue
            if isinstance(env.payload, TickMsg):
                tick = env.payload.index
                stamp, messages, row = agent.on_tick(tick)
                for channel, payload in messages:
                    client.publish(channel, payload, stamp)
                rows.append(row)
                client.publish(TICK_ACK_TOPIC, TickMsg(tick), stamp)
                if tick == n_ticks - 1:
                    break
    finally:
        write_rows(Path(log_path), dynamics_header_for(spec), rows)
        client.close()
    return 0


def run_ads_worker(endpoint: str, scenario_path: str, dt: float, n_ticks: int, log_path: str) -> int:
    spec = load_scenario(scenario_path)
    base, graph = build_map_products(spec.map_ref)
    agent = AdsAgent(base, graph, dt)
    subscriptions = [
        TICK_TOPIC,
        "/apollo/startup",
        "/apollo/localization/pose",
        "/apollo/canbus/chassis",
        "/apollo/perception/obstacles",
    ]
    client = BusClient(endpoint, subscribe_topics=subscriptions)
    client.publish(READY_TOPIC, TickMsg(0), 0.0)
    rows: list[dict] = []
    try:
        while True:
            env = client.next_envelope(timeout=60.0)
            if isinstance(env.payload, TickMsg):
                tick = env.payload.index
                control, row = agent.control_tick(tick)
                if control is not None:
                    client.publish("/apollo/control", control, (tick + 1) * dt)
                if row is not None:
                    rows.append(row)
                client.publish(TICK_ACK_TOPIC, TickMsg(tick), tick * dt)
                if tick == n_ticks - 1:
                    break
            else:
                agent.handle_payload(env.channel, env.payload, _current_tick(env.stamp_s, dt))
    finally:
        write_rows(Path(log_path), ADS_HEADER, rows)
        client.close()
    return 0


def _current_tick(stamp_s: float, dt: float) -> int:
    # Messages of tick k are stamped (k + 1) * dt.
    return max(0, int(round(stamp_s / dt)) - 1)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="adcosim-worker")
    sub = parser.add_subparsers(dest="role", required=True)
    for role in ("dynamics", "ads"):
        _common_args(sub.add_parser(role))
    args = parser.parse_args(argv)
    if args.role == "dynamics":
        return run_dynamics_worker(args.endpoint, args.scenario, args.dt, args.ticks, args.log)
    return run_ads_worker(args.endpoint, args.scenario, args.dt, args.ticks, args.log)


if __name__ == "__main__":
    sys.exit(main())
