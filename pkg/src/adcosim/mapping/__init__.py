"""OpenDRIVE to map-product pipeline: parse, prune, base/routing/sim maps."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

from .basemap import BaseMap, GeometryGap, Lane, Projection, build_base_map, project_to_polyline
from .opendrive import (
    OpenDriveDoc,
    PruneResult,
    UnsupportedGeometry,
    XmlError,
    parse_opendrive,
    prune,
)
from .routing import (
    LanePoint,
    NoRoute,
    Route,
    RoutingGraph,
    SnapFailure,
    build_routing_graph,
    route,
    snap_to_driving_lane,
    validate_connectivity,
)
from .serialize import (
    base_map_from_dict,
    base_map_to_dict,
    routing_graph_to_dict,
    save_map_products,
    sim_map_to_dict,
)
from .simmap import SimMap, build_sim_map, rdp

BUILTIN_PREFIX = "builtin:"


def load_opendrive_source(map_ref: str) -> str:
    """Read OpenDRIVE XML from a ``builtin:<name>`` token or a filesystem path."""
    if map_ref.startswith(BUILTIN_PREFIX):
        name = map_ref[len(BUILTIN_PREFIX):]
        return resources.files("adcosim.data").joinpath(f"{name}.xodr").read_text(encoding="utf-8")
    return Path(map_ref).read_text(encoding="utf-8")


@lru_cache(maxsize=8)
def build_map_products(map_ref: str, spacing: float = 1.0) -> tuple[BaseMap, RoutingGraph]:
    """Parse, prune, and build the base map and routing graph for a map ref."""
    doc = parse_opendrive(load_opendrive_source(map_ref))
    pruned = prune(doc)
    base = build_base_map(pruned.doc, spacing=spacing)
    graph = build_routing_graph(base)
    return base, graph
