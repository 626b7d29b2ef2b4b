"""Lane-topology graph and least-cost route search over the base map.

Traversal cost is the remaining lane length in meters; moving to a neighbor
lane costs a flat length-equivalent penalty. Ties are broken by the
lexicographically smallest lane-uid sequence, so routes are deterministic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .basemap import BaseMap, Lane, Projection, project_to_polyline

LANE_CHANGE_PENALTY = 10.0
SNAP_MAX_DISTANCE = 5.0


class NoRoute(ValueError):
    pass


class SnapFailure(ValueError):
    pass


@dataclass(frozen=True)
class LanePoint:
    uid: str
    s: float
    lateral: float


@dataclass
class RoutingGraph:
    base: BaseMap
    nodes: tuple[str, ...]
    successor_edges: dict[str, tuple[str, ...]]
    neighbor_edges: dict[str, tuple[str, ...]]
    lane_change_penalty: float = LANE_CHANGE_PENALTY

    def lane_length(self, uid: str) -> float:
        return self.base.lane(uid).length


def build_routing_graph(base: BaseMap, lane_change_penalty: float = LANE_CHANGE_PENALTY) -> RoutingGraph:
    driving = {lane.uid for lane in base.driving_lanes()}
    successor_edges = {}
    neighbor_edges = {}
    for uid in sorted(driving):
        lane = base.lane(uid)
        successor_edges[uid] = tuple(s for s in lane.successors if s in driving)
        neighbors = [n for n in (lane.left_neighbor, lane.right_neighbor) if n in driving]
        neighbor_edges[uid] = tuple(sorted(neighbors))
    return RoutingGraph(
        base=base,
        nodes=tuple(sorted(driving)),
        successor_edges=successor_edges,
        neighbor_edges=neighbor_edges,
        lane_change_penalty=lane_change_penalty,
    )


def _containing_lanes(base: BaseMap, x: float, y: float) -> list[tuple[Lane, Projection]]:
    hits = []
    for uid, lane in sorted(base.lanes.items()):
        proj = project_to_polyline(lane.centerline, x, y)
        if proj.distance <= lane.width / 2.0 + 1e-9 and abs(proj.distance - abs(proj.lateral)) < 1e-6:
            hits.append((lane, proj))
    return hits


def snap_to_driving_lane(base: BaseMap, x: float, y: float, max_dist: float = SNAP_MAX_DISTANCE) -> LanePoint:
    """Resolve a map position to a driving lane.

    A point lying inside a non-drivable lane (shoulder or pruned type) is a
    routing dead end and raises :class:`NoRoute`; a point farther than
    ``max_dist`` from every driving centerline raises :class:`SnapFailure`.
    """
    hits = _containing_lanes(base, x, y)
    driving_hits = [(lane, proj) for lane, proj in hits if lane.is_driving]
    if driving_hits:
        lane, proj = min(driving_hits, key=lambda lp: (abs(lp[1].lateral), lp[0].uid))
        return LanePoint(uid=lane.uid, s=proj.s, lateral=proj.lateral)
    if hits:
        lane = min(hits, key=lambda lp: (abs(lp[1].lateral), lp[0].uid))[0]
        raise NoRoute(f"position ({x:.2f}, {y:.2f}) lies on non-drivable lane {lane.uid}")

    best: tuple[float, str, Projection] | None = None
    for lane in base.driving_lanes():
        proj = project_to_polyline(lane.centerline, x, y)
        if best is None or (proj.distance, lane.uid) < (best[0], best[1]):
            best = (proj.distance, lane.uid, proj)
    if best is None or best[0] > max_dist:
        raise SnapFailure(f"position ({x:.2f}, {y:.2f}) is beyond {max_dist} m of any driving lane")
    return LanePoint(uid=best[1], s=best[2].s, lateral=best[2].lateral)


@dataclass(frozen=True)
class Route:
    lane_uids: tuple[str, ...]
    cost: float
    start: LanePoint
    goal: LanePoint


def route(graph: RoutingGraph, start_xy: tuple[float, float], goal_xy: tuple[float, float]) -> Route:
    """Least-cost lane sequence between two map positions."""
    base = graph.base
    start = snap_to_driving_lane(base, *start_xy)
    goal = snap_to_driving_lane(base, *goal_xy)

    # States are (lane, entry_s); finishing on the goal lane costs the
    # remaining distance up to goal.s. Heap entries carry the path for the
    # lexicographic tie-break.
    heap: list[tuple[float, tuple[str, ...], float]] = [(0.0, (start.uid,), start.s)]
    best: dict[tuple[str, float], float] = {}
    goal_best: tuple[float, tuple[str, ...]] | None = None

    while heap:
        cost, path, entry_s = heapq.heappop(heap)
        uid = path[-1]
        # Strictly-greater guard: equal-cost states must still pop so the
        # lexicographic tie-break sees every optimal path.
        if goal_best is not None and cost > goal_best[0]:
            break
        key = (uid, round(entry_s, 9))
        if best.get(key, math.inf) < cost:
            continue
        best[key] = cost

        if uid == goal.uid and entry_s <= goal.s + 1e-9:
            final = cost + (goal.s - entry_s)
            candidate = (final, path)
            if goal_best is None or candidate < goal_best:
                goal_best = candidate

        lane_len = graph.lane_length(uid)
        for succ in graph.successor_edges[uid]:
            if succ in path:
                continue
            heapq.heappush(heap, (cost + (lane_len - entry_s), path + (succ,), 0.0))
        for neighbor in graph.neighbor_edges[uid]:
            if neighbor in path:
                continue
            entry = min(entry_s, graph.lane_length(neighbor))
            heapq.heappush(heap, (cost + graph.lane_change_penalty, path + (neighbor,), entry))

    if goal_best is None:
        raise NoRoute(f"no route from {start.uid} to {goal.uid}")
    return Route(lane_uids=goal_best[1], cost=goal_best[0], start=start, goal=goal)


def strongly_connected_components(graph: RoutingGraph) -> list[tuple[str, ...]]:
    """Kosaraju SCCs over successor + neighbor edges, for map validation."""
    edges = {
        uid: tuple(sorted(set(graph.successor_edges[uid]) | set(graph.neighbor_edges[uid])))
        for uid in graph.nodes
    }
    reverse: dict[str, list[str]] = {uid: [] for uid in graph.nodes}
    for uid, outs in edges.items():
        for out in outs:
            reverse[out].append(uid)

    visited: set[str] = set()
    order: list[str] = []
    for root in graph.nodes:
        if root in visited:
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        visited.add(root)
        while stack:
            node, idx = stack.pop()
            outs = edges[node]
            if idx < len(outs):
                stack.append((node, idx + 1))
                nxt = outs[idx]
                if nxt not in visited:
                    visited.add(nxt)
                    stack.append((nxt, 0))
            else:
                order.append(node)

    assigned: set[str] = set()
    components: list[tuple[str, ...]] = []
    for root in reversed(order):
        if root in assigned:
            continue
        comp = []
        stack2 = [root]
        assigned.add(root)
        while stack2:
            node = stack2.pop()
            comp.append(node)
            for nxt in reverse[node]:
                if nxt not in assigned:
                    assigned.add(nxt)
                    stack2.append(nxt)
        components.append(tuple(sorted(comp)))
    return sorted(components)


def validate_connectivity(graph: RoutingGraph) -> list[str]:
    """Human-readable findings; empty when the graph is one strong component."""
    comps = strongly_connected_components(graph)
    if len(comps) <= 1:
        return []
    return [f"strongly-disconnected component: {', '.join(comp)}" for comp in comps]
