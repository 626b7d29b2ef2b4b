"""Downsampled visualization polylines derived from the base map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basemap import BaseMap

DEFAULT_SIM_MAP_EPSILON = 0.5


@dataclass
class SimMap:
    polylines: dict[str, np.ndarray]
    epsilon: float


def _perpendicular_distances(points: np.ndarray, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    chord = end - start
    chord_len = np.hypot(*chord)
    if chord_len == 0.0:
        return np.hypot(*(points - start).T)
    rel = start - points
    cross = chord[0] * rel[:, 1] - chord[1] * rel[:, 0]
    return np.abs(cross) / chord_len


def rdp(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Ramer-Douglas-Peucker polyline simplification.

    ``epsilon == 0`` returns the input unchanged so the identity contract is
    exact (plain RDP would still collapse exactly collinear runs).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0.0 or len(points) <= 2:
        return points.copy()

    keep = np.zeros(len(points), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(points) - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        inner = points[lo + 1 : hi]
        dists = _perpendicular_distances(inner, points[lo], points[hi])
        idx = int(np.argmax(dists))
        if dists[idx] > epsilon:
            split = lo + 1 + idx
            keep[split] = True
            stack.append((lo, split))
            stack.append((split, hi))
    return points[keep].copy()


def build_sim_map(base: BaseMap, epsilon: float = DEFAULT_SIM_MAP_EPSILON) -> SimMap:
    polylines = {uid: rdp(lane.centerline, epsilon) for uid, lane in sorted(base.lanes.items())}
    return SimMap(polylines=polylines, epsilon=epsilon)
