"""JSON serialization of the three map products.

Schemas are versioned with a ``schema_version`` field; polylines are lists
of [x, y] pairs. See docs/file_schemas.md for the full layout.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .basemap import BaseMap, Lane
from .routing import RoutingGraph
from .simmap import SimMap

SCHEMA_VERSION = 1


def _poly(arr: np.ndarray) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in arr]


def base_map_to_dict(base: BaseMap) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "lanes": {
            uid: {
                "lane_type": lane.lane_type,
                "speed_limit_mps": lane.speed_limit,
                "width_m": lane.width,
                "length_m": lane.length,
                "centerline": _poly(lane.centerline),
                "left_boundary": _poly(lane.left_boundary),
                "right_boundary": _poly(lane.right_boundary),
                "s": [float(v) for v in lane.s],
                "predecessors": list(lane.predecessors),
                "successors": list(lane.successors),
                "left_neighbor": lane.left_neighbor,
                "right_neighbor": lane.right_neighbor,
            }
            for uid, lane in sorted(base.lanes.items())
        },
    }


def base_map_from_dict(data: dict) -> BaseMap:
    lanes: dict[str, Lane] = {}
    for uid, item in data["lanes"].items():
        lanes[uid] = Lane(
            uid=uid,
            lane_type=item["lane_type"],
            speed_limit=item["speed_limit_mps"],
            width=item["width_m"],
            length=item["length_m"],
            centerline=np.asarray(item["centerline"], dtype=float),
            left_boundary=np.asarray(item["left_boundary"], dtype=float),
            right_boundary=np.asarray(item["right_boundary"], dtype=float),
            s=np.asarray(item["s"], dtype=float),
            predecessors=tuple(item["predecessors"]),
            successors=tuple(item["successors"]),
            left_neighbor=item["left_neighbor"],
            right_neighbor=item["right_neighbor"],
        )
    return BaseMap(lanes=lanes)


def routing_graph_to_dict(graph: RoutingGraph) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "lane_change_penalty_m": graph.lane_change_penalty,
        "nodes": list(graph.nodes),
        "successor_edges": {
            uid: [{"to": succ, "cost_m": graph.lane_length(succ)} for succ in graph.successor_edges[uid]]
            for uid in graph.nodes
        },
        "lane_change_edges": {
            uid: [{"to": n, "cost_m": graph.lane_change_penalty} for n in graph.neighbor_edges[uid]]
            for uid in graph.nodes
        },
    }


def sim_map_to_dict(sim: SimMap) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "epsilon_m": sim.epsilon,
        "polylines": {uid: _poly(poly) for uid, poly in sorted(sim.polylines.items())},
    }


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def save_map_products(
    out_dir: str | Path,
    base: BaseMap | None = None,
    graph: RoutingGraph | None = None,
    sim: SimMap | None = None,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if base is not None:
        path = out / "base_map.json"
        _write_json(path, base_map_to_dict(base))
        written.append(path)
    if graph is not None:
        path = out / "routing_map.json"
        _write_json(path, routing_graph_to_dict(graph))
        written.append(path)
    if sim is not None:
        path = out / "sim_map.json"
        _write_json(path, sim_map_to_dict(sim))
        written.append(path)
    return written
