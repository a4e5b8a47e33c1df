"""Scene data model and ingestion.

Obstacle histories come from a JSON-lines log (one state per line), the lane
and intersection-exit map from a single JSON document, and the ego vehicle's
planned trajectory from an optional JSON-lines file. Loaded scenes are
immutable; concurrent readers need no synchronization.

Also hosts the onboard-style pre-processing classifiers: scenario selection
(intersection vs regular road) and obstacle prioritization (caution vs
normal).
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

from .errors import CoverageError, ParseError, SceneIntegrityError
from .geometry import Curve, Point2, point_at_s, project_point, wrap_angle

TIME_EPS = 1e-9

SCENARIO_INTERSECTION = "intersection"
SCENARIO_REGULAR_ROAD = "regular_road"
PRIORITY_CAUTION = "caution"
PRIORITY_NORMAL = "normal"

DEFAULT_SCENARIO_BUFFER_M = 2.0
DEFAULT_CAUTION_THRESHOLD_M = 10.0


@dataclass(frozen=True)
class ObstacleState:
    """One timestamped kinematic sample of a road entity."""

    timestamp: float
    position: Point2
    heading: float
    speed: float
    obstacle_id: str
    polygon: Optional[Tuple[Point2, ...]] = None

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValueError(f"non-finite timestamp for obstacle {self.obstacle_id!r}")
        if not math.isfinite(self.heading) or not -math.pi < self.heading <= math.pi:
            raise ValueError(
                f"heading {self.heading} out of (-pi, pi] for obstacle {self.obstacle_id!r}"
            )
        if not math.isfinite(self.speed) or self.speed < 0.0:
            raise ValueError(f"invalid speed {self.speed} for obstacle {self.obstacle_id!r}")


@dataclass(frozen=True)
class ObstacleTrack:
    """Time-ordered state history of one obstacle."""

    obstacle_id: str
    states: Tuple[ObstacleState, ...]

    def __post_init__(self):
        if not self.states:
            raise ValueError(f"track {self.obstacle_id!r} has no states")
        for st in self.states:
            if st.obstacle_id != self.obstacle_id:
                raise ValueError(
                    f"track {self.obstacle_id!r} contains state of {st.obstacle_id!r}"
                )
        times = [st.timestamp for st in self.states]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise SceneIntegrityError(
                f"non-monotonic timestamps within obstacle {self.obstacle_id!r}"
            )

    @property
    def first_time(self) -> float:
        return self.states[0].timestamp

    @property
    def last_time(self) -> float:
        return self.states[-1].timestamp

    @property
    def latest(self) -> ObstacleState:
        return self.states[-1]

    def covers(self, t: float) -> bool:
        return self.first_time - TIME_EPS <= t <= self.last_time + TIME_EPS

    def _bracket(self, t: float) -> Tuple[ObstacleState, ObstacleState, float]:
        times = [st.timestamp for st in self.states]
        i = bisect_right(times, t) - 1
        i = min(max(i, 0), len(times) - 2) if len(times) > 1 else 0
        a = self.states[i]
        b = self.states[min(i + 1, len(self.states) - 1)]
        if b.timestamp == a.timestamp:
            return a, b, 0.0
        u = (t - a.timestamp) / (b.timestamp - a.timestamp)
        return a, b, min(max(u, 0.0), 1.0)

    def position_at(self, t: float) -> Point2:
        """Linearly interpolated position; t must be within the track span."""
        if not self.covers(t):
            raise CoverageError(
                f"time {t} outside track {self.obstacle_id!r} span "
                f"[{self.first_time}, {self.last_time}]"
            )
        a, b, u = self._bracket(t)
        return Point2(
            a.position.x + u * (b.position.x - a.position.x),
            a.position.y + u * (b.position.y - a.position.y),
        )

    def state_at(self, t: float) -> ObstacleState:
        """Interpolated state at t: linear position/speed, shortest-path heading."""
        if not self.covers(t):
            raise CoverageError(
                f"time {t} outside track {self.obstacle_id!r} span "
                f"[{self.first_time}, {self.last_time}]"
            )
        a, b, u = self._bracket(t)
        if u == 0.0:
            return a
        heading = wrap_angle(a.heading + u * wrap_angle(b.heading - a.heading))
        return ObstacleState(
            timestamp=t,
            position=Point2(
                a.position.x + u * (b.position.x - a.position.x),
                a.position.y + u * (b.position.y - a.position.y),
            ),
            heading=heading,
            speed=a.speed + u * (b.speed - a.speed),
            obstacle_id=self.obstacle_id,
        )


@dataclass(frozen=True)
class EgoPlan:
    """The ego vehicle's previously planned trajectory."""

    poses: Tuple[Tuple[float, Point2], ...]

    def __post_init__(self):
        if not self.poses:
            raise ValueError("ego plan has no poses")
        times = [t for t, _ in self.poses]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise SceneIntegrityError("non-monotonic timestamps in ego plan")

    def position_at(self, t: float) -> Point2:
        """Linearly interpolated pose; queries beyond coverage clamp to the ends."""
        times = [tt for tt, _ in self.poses]
        if t <= times[0]:
            return self.poses[0][1]
        if t >= times[-1]:
            return self.poses[-1][1]
        i = bisect_right(times, t) - 1
        (t0, p0), (t1, p1) = self.poses[i], self.poses[i + 1]
        u = (t - t0) / (t1 - t0)
        return Point2(p0.x + u * (p1.x - p0.x), p0.y + u * (p1.y - p0.y))


@dataclass(frozen=True)
class Lane:
    lane_id: str
    centerline: Curve
    successor_ids: Tuple[str, ...] = ()
    speed_limit: Optional[float] = None


@dataclass(frozen=True)
class IntersectionExit:
    exit_id: str
    position: Point2
    heading: float
    associated_lane_id: str

    def __post_init__(self):
        if not -math.pi < self.heading <= math.pi:
            raise ValueError(f"exit {self.exit_id!r} heading {self.heading} out of (-pi, pi]")


@dataclass(frozen=True)
class MapGraph:
    """Lane graph plus intersection exits and optional intersection polygon."""

    lanes: Dict[str, Lane] = field(default_factory=dict)
    exits: Dict[str, IntersectionExit] = field(default_factory=dict)
    intersection_polygon: Optional[Tuple[Point2, ...]] = None

    def __post_init__(self):
        for lane in self.lanes.values():
            for succ in lane.successor_ids:
                if succ not in self.lanes:
                    raise SceneIntegrityError(
                        f"lane {lane.lane_id!r} references missing successor {succ!r}"
                    )
        for ex in self.exits.values():
            if ex.associated_lane_id not in self.lanes:
                raise SceneIntegrityError(
                    f"exit {ex.exit_id!r} references missing lane {ex.associated_lane_id!r}"
                )

    def sorted_lanes(self) -> Sequence[Lane]:
        return [self.lanes[k] for k in sorted(self.lanes)]

    def sorted_exits(self) -> Sequence[IntersectionExit]:
        return [self.exits[k] for k in sorted(self.exits)]


DEFAULT_LATERAL_CAPTURE_M = 2.0


def nearest_lane(
    map_graph: MapGraph, position: Point2, lateral_capture: float = DEFAULT_LATERAL_CAPTURE_M
) -> Optional[str]:
    """Lane whose centerline is nearest to position within the capture
    distance; ties resolve to the smaller lane id.

    Distance is to the closest on-curve point, which equals the absolute
    lateral offset for interior projections but, unlike it, does not treat a
    lane as infinitely extended past its endpoints.
    """
    best: Optional[Tuple[float, str]] = None
    for lane in map_graph.sorted_lanes():
        s, _ = project_point(lane.centerline, position)
        closest, _ = point_at_s(lane.centerline, s)
        distance = closest.distance_to(position)
        if distance > lateral_capture:
            continue
        if best is None or distance < best[0]:
            best = (distance, lane.lane_id)
    return best[1] if best else None


def _require(record: dict, key: str, path: str, line: int):
    if key not in record:
        raise ParseError(f"{path}:{line}: missing key {key!r}")
    return record[key]


def _as_float(value, key: str, path: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{path}:{line}: key {key!r} must be a number, got {value!r}")
    return float(value)


def _iter_jsonl(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise ParseError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def state_to_record(state: ObstacleState) -> dict:
    """Serialize a state back to the obstacle-log row schema."""
    record = {
        "obstacle_id": state.obstacle_id,
        "t": state.timestamp,
        "x": state.position.x,
        "y": state.position.y,
        "heading": state.heading,
        "speed": state.speed,
    }
    if state.polygon is not None:
        record["polygon"] = [[p.x, p.y] for p in state.polygon]
    return record


def load_obstacle_log(path: str) -> list[ObstacleTrack]:
    """Parse a JSON-lines obstacle log into tracks sorted by obstacle id.

    Rows may arrive out of order and are re-sorted per obstacle; duplicate
    timestamps within one obstacle are an error.
    """
    states_by_id: Dict[str, list[ObstacleState]] = {}
    for lineno, record in _iter_jsonl(path):
        obstacle_id = _require(record, "obstacle_id", path, lineno)
        if not isinstance(obstacle_id, str):
            raise ParseError(f"{path}:{lineno}: 'obstacle_id' must be a string")
        t = _as_float(_require(record, "t", path, lineno), "t", path, lineno)
        x = _as_float(_require(record, "x", path, lineno), "x", path, lineno)
        y = _as_float(_require(record, "y", path, lineno), "y", path, lineno)
        heading = _as_float(_require(record, "heading", path, lineno), "heading", path, lineno)
        speed = _as_float(_require(record, "speed", path, lineno), "speed", path, lineno)
        polygon = None
        if record.get("polygon") is not None:
            try:
                polygon = tuple(Point2(float(px), float(py)) for px, py in record["polygon"])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed 'polygon'") from exc
        try:
            state = ObstacleState(
                timestamp=t,
                position=Point2(x, y),
                heading=wrap_angle(heading),
                speed=speed,
                obstacle_id=obstacle_id,
                polygon=polygon,
            )
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        states_by_id.setdefault(obstacle_id, []).append(state)

    tracks = []
    for obstacle_id in sorted(states_by_id):
        states = sorted(states_by_id[obstacle_id], key=lambda st: st.timestamp)
        tracks.append(ObstacleTrack(obstacle_id=obstacle_id, states=tuple(states)))
    return tracks


def load_map(path: str) -> MapGraph:
    """Parse the single-document JSON map file into a validated MapGraph."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}:1: map file must be a JSON object")

    lanes: Dict[str, Lane] = {}
    for entry in doc.get("lanes", []):
        lane_id = entry.get("id")
        if not isinstance(lane_id, str):
            raise ParseError(f"{path}: lane entry without a string 'id'")
        if lane_id in lanes:
            raise SceneIntegrityError(f"duplicate lane id {lane_id!r}")
        try:
            centerline = Curve(entry["centerline"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: lane {lane_id!r}: bad centerline: {exc}") from exc
        lanes[lane_id] = Lane(
            lane_id=lane_id,
            centerline=centerline,
            successor_ids=tuple(entry.get("successors", [])),
            speed_limit=entry.get("speed_limit"),
        )

    exits: Dict[str, IntersectionExit] = {}
    for entry in doc.get("exits", []):
        exit_id = entry.get("id")
        if not isinstance(exit_id, str):
            raise ParseError(f"{path}: exit entry without a string 'id'")
        if exit_id in exits:
            raise SceneIntegrityError(f"duplicate exit id {exit_id!r}")
        try:
            exits[exit_id] = IntersectionExit(
                exit_id=exit_id,
                position=Point2(float(entry["x"]), float(entry["y"])),
                heading=wrap_angle(float(entry["heading"])),
                associated_lane_id=entry["lane_id"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: exit {exit_id!r}: {exc}") from exc

    polygon = None
    if doc.get("intersection_polygon") is not None:
        try:
            polygon = tuple(Point2(float(x), float(y)) for x, y in doc["intersection_polygon"])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: malformed 'intersection_polygon'") from exc

    return MapGraph(lanes=lanes, exits=exits, intersection_polygon=polygon)


def load_ego_plan(path: str) -> EgoPlan:
    """Parse a JSON-lines ego plan of {t, x, y} rows."""
    poses = []
    for lineno, record in _iter_jsonl(path):
        t = _as_float(_require(record, "t", path, lineno), "t", path, lineno)
        x = _as_float(_require(record, "x", path, lineno), "x", path, lineno)
        y = _as_float(_require(record, "y", path, lineno), "y", path, lineno)
        poses.append((t, Point2(x, y)))
    if not poses:
        raise ParseError(f"{path}:1: ego plan file is empty")
    poses.sort(key=lambda pair: pair[0])
    return EgoPlan(poses=tuple(poses))


def load_scene(
    obstacle_log: str, map_file: str, ego_file: Optional[str] = None
) -> Tuple[list[ObstacleTrack], MapGraph, Optional[EgoPlan]]:
    """Load and validate the full scene: tracks, map, and optional ego plan."""
    tracks = load_obstacle_log(obstacle_log)
    map_graph = load_map(map_file)
    ego = load_ego_plan(ego_file) if ego_file is not None else None
    return tracks, map_graph, ego


def _point_in_polygon(p: Point2, polygon: Sequence[Point2]) -> bool:
    inside = False
    n = len(polygon)
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        if (a.y > p.y) != (b.y > p.y):
            x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y)
            if p.x < x_cross:
                inside = not inside
    return inside


def _distance_to_polygon(p: Point2, polygon: Sequence[Point2]) -> float:
    best = math.inf
    n = len(polygon)
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        vx, vy = b.x - a.x, b.y - a.y
        seg2 = vx * vx + vy * vy
        if seg2 == 0.0:
            best = min(best, p.distance_to(a))
            continue
        t = min(max(((p.x - a.x) * vx + (p.y - a.y) * vy) / seg2, 0.0), 1.0)
        best = min(best, math.hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy)))
    return best


def classify_scenario(
    track: ObstacleTrack, map_graph: MapGraph, buffer_m: float = DEFAULT_SCENARIO_BUFFER_M
) -> str:
    """Intersection if the latest position is inside (or within buffer_m of)
    the map's intersection polygon; regular road otherwise or when the map
    has no polygon."""
    polygon = map_graph.intersection_polygon
    if not polygon:
        return SCENARIO_REGULAR_ROAD
    p = track.latest.position
    if _point_in_polygon(p, polygon) or _distance_to_polygon(p, polygon) <= buffer_m:
        return SCENARIO_INTERSECTION
    return SCENARIO_REGULAR_ROAD


def classify_priority(
    track: ObstacleTrack,
    ego: Optional[EgoPlan],
    threshold_m: float = DEFAULT_CAUTION_THRESHOLD_M,
) -> str:
    """Caution if the latest position comes strictly closer than threshold_m
    to any ego planned pose; normal otherwise or without an ego plan."""
    if ego is None or not ego.poses:
        return PRIORITY_NORMAL
    p = track.latest.position
    min_dist = min(p.distance_to(pose) for _, pose in ego.poses)
    return PRIORITY_CAUTION if min_dist < threshold_m else PRIORITY_NORMAL
