"""Offboard automatic labeling.

Derives ground-truth future trajectories and intention labels (intersection
exit taken, lane sequence followed) from logged obstacle tracks. Labels are
pure functions of the log: positions are interpolated, never extrapolated,
so a track that ends before the horizon yields no trajectory label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import CoverageError, ParseError
from .geometry import Point2
from .scene import MapGraph, ObstacleTrack, TIME_EPS, nearest_lane

DEFAULT_RESOLUTION_S = 0.1
DEFAULT_HORIZON_S = 8.0
DEFAULT_EXIT_CAPTURE_M = 3.0
DEFAULT_LATERAL_CAPTURE_M = 2.0


@dataclass(frozen=True)
class TrajectoryLabel:
    """Ground-truth future positions at a fixed resolution after anchor_time."""

    obstacle_id: str
    anchor_time: float
    future_points: Tuple[Tuple[float, Point2], ...]
    horizon: float


@dataclass(frozen=True)
class ExitLabel:
    obstacle_id: str
    anchor_time: float
    exit_id: str


@dataclass(frozen=True)
class LaneSequenceLabel:
    obstacle_id: str
    anchor_time: float
    lane_ids: Tuple[str, ...]


def label_future_trajectory(
    track: ObstacleTrack,
    anchor_time: float,
    horizon: float,
    resolution: float = DEFAULT_RESOLUTION_S,
) -> TrajectoryLabel:
    """Sample the track's future at anchor_time + k*resolution, k = 1..horizon/resolution.

    Raises CoverageError if the track does not cover the full horizon; labels
    are never extrapolated.
    """
    if resolution <= 0.0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if anchor_time < track.first_time - TIME_EPS:
        raise CoverageError(
            f"anchor {anchor_time} precedes track {track.obstacle_id!r} start {track.first_time}"
        )
    steps = int(math.floor(horizon / resolution + TIME_EPS))
    end = anchor_time + steps * resolution
    if end > track.last_time + TIME_EPS:
        raise CoverageError(
            f"track {track.obstacle_id!r} ends at {track.last_time}, "
            f"before the {horizon}s horizon after anchor {anchor_time}"
        )
    points = []
    for k in range(1, steps + 1):
        rel = k * resolution
        t = min(anchor_time + rel, track.last_time)
        points.append((rel, track.position_at(t)))
    return TrajectoryLabel(
        obstacle_id=track.obstacle_id,
        anchor_time=anchor_time,
        future_points=tuple(points),
        horizon=horizon,
    )


def _future_polyline(
    track: ObstacleTrack, anchor_time: float, horizon: float
) -> list[Tuple[float, Point2]]:
    """Timestamped vertices of the future sub-track, clipped to the horizon."""
    end_time = min(anchor_time + horizon, track.last_time)
    if end_time <= anchor_time + TIME_EPS:
        return []
    samples = [(anchor_time, track.position_at(anchor_time))]
    for st in track.states:
        if anchor_time < st.timestamp < end_time:
            samples.append((st.timestamp, st.position))
    samples.append((end_time, track.position_at(end_time)))
    return samples


def _earliest_capture_time(
    polyline: Sequence[Tuple[float, Point2]], target: Point2, radius: float
) -> Optional[float]:
    """Earliest time at which the piecewise-linear path enters the capture disk."""
    r2 = radius * radius
    for (t0, a), (t1, b) in zip(polyline, polyline[1:]):
        dax, day = a.x - target.x, a.y - target.y
        c = dax * dax + day * day - r2
        if c <= 0.0:
            return t0
        vx, vy = b.x - a.x, b.y - a.y
        qa = vx * vx + vy * vy
        qb = 2.0 * (dax * vx + day * vy)
        if qa == 0.0:
            continue
        disc = qb * qb - 4.0 * qa * c
        if disc < 0.0:
            continue
        u = (-qb - math.sqrt(disc)) / (2.0 * qa)
        if 0.0 <= u <= 1.0:
            return t0 + u * (t1 - t0)
    if polyline:
        t_last, p_last = polyline[-1]
        if p_last.distance_to(target) <= radius:
            return t_last
    return None


def label_exit_taken(
    track: ObstacleTrack,
    anchor_time: float,
    map_graph: MapGraph,
    horizon: float,
    capture_radius: float = DEFAULT_EXIT_CAPTURE_M,
) -> Optional[ExitLabel]:
    """The exit whose position the future sub-track reaches first within
    capture_radius, or None when no exit is captured inside the horizon.
    Simultaneous captures resolve to the smaller exit id."""
    polyline = _future_polyline(track, anchor_time, horizon)
    if not polyline:
        return None
    best: Optional[Tuple[float, str]] = None
    for ex in map_graph.sorted_exits():
        t_hit = _earliest_capture_time(polyline, ex.position, capture_radius)
        if t_hit is None:
            continue
        if best is None or t_hit < best[0]:
            best = (t_hit, ex.exit_id)
    if best is None:
        return None
    return ExitLabel(obstacle_id=track.obstacle_id, anchor_time=anchor_time, exit_id=best[1])


def label_lane_sequence(
    track: ObstacleTrack,
    anchor_time: float,
    map_graph: MapGraph,
    horizon: float,
    resolution: float = DEFAULT_RESOLUTION_S,
    lateral_capture: float = DEFAULT_LATERAL_CAPTURE_M,
) -> Optional[LaneSequenceLabel]:
    """Ordered lane ids the future sub-track follows, consecutive duplicates
    collapsed; None when no sample associates with any lane."""
    end_time = min(anchor_time + horizon, track.last_time)
    sequence: list[str] = []
    k = 1
    while True:
        t = anchor_time + k * resolution
        if t > end_time + TIME_EPS:
            break
        lane_id = nearest_lane(map_graph, track.position_at(min(t, track.last_time)), lateral_capture)
        if lane_id is not None and (not sequence or sequence[-1] != lane_id):
            sequence.append(lane_id)
        k += 1
    if not sequence:
        return None
    return LaneSequenceLabel(
        obstacle_id=track.obstacle_id, anchor_time=anchor_time, lane_ids=tuple(sequence)
    )


def anchor_times(track: ObstacleTrack, stride: float, min_history: float = 0.0) -> list[float]:
    """Anchor grid for a track: first_time + min_history + k*stride within the span.

    Shared by the dataset builder and the prediction driver so that both
    sides of a keyed join compute bit-identical anchor timestamps.
    """
    if stride <= 0.0:
        raise ValueError(f"stride must be positive, got {stride}")
    start = track.first_time + min_history
    anchors = []
    k = 0
    while True:
        t = start + k * stride
        if t > track.last_time + TIME_EPS:
            break
        anchors.append(t)
        k += 1
    return anchors


def build_dataset(
    tracks: Sequence[ObstacleTrack],
    map_graph: MapGraph,
    *,
    road_test_id: str,
    stride: float,
    horizon: float = DEFAULT_HORIZON_S,
    resolution: float = DEFAULT_RESOLUTION_S,
    min_history: float = 0.0,
    exit_capture: float = DEFAULT_EXIT_CAPTURE_M,
    lateral_capture: float = DEFAULT_LATERAL_CAPTURE_M,
) -> Tuple[list[dict], int]:
    """One labeled record per (obstacle, anchor) with enough future coverage.

    Returns the records sorted by (obstacle_id, anchor_time) plus the count
    of anchors skipped for insufficient coverage.
    """
    records = []
    skipped = 0
    for track in sorted(tracks, key=lambda tr: tr.obstacle_id):
        for anchor in anchor_times(track, stride, min_history):
            try:
                label = label_future_trajectory(track, anchor, horizon, resolution)
            except CoverageError:
                skipped += 1
                continue
            exit_label = label_exit_taken(track, anchor, map_graph, horizon, exit_capture)
            lane_label = label_lane_sequence(
                track, anchor, map_graph, horizon, resolution, lateral_capture
            )
            history = [
                {
                    "t": st.timestamp,
                    "x": st.position.x,
                    "y": st.position.y,
                    "heading": st.heading,
                    "speed": st.speed,
                }
                for st in track.states
                if st.timestamp <= anchor + TIME_EPS
            ]
            records.append(
                {
                    "road_test_id": road_test_id,
                    "obstacle_id": track.obstacle_id,
                    "anchor_time": anchor,
                    "history": history,
                    "future": [[rel, p.x, p.y] for rel, p in label.future_points],
                    "exit_label": exit_label.exit_id if exit_label else None,
                    "lane_sequence_label": list(lane_label.lane_ids) if lane_label else None,
                }
            )
    return records, skipped


def load_dataset_records(path: str) -> list[dict]:
    """Parse a JSON-lines dataset file, validating the record shape."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            for key in ("road_test_id", "obstacle_id", "anchor_time", "history", "future"):
                if key not in record:
                    raise ParseError(f"{path}:{lineno}: missing key {key!r}")
            records.append(record)
    return records
