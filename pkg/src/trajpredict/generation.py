"""Candidate trajectory generation.

For each intention hypothesis (an intersection exit or a lane sequence) the
generator searches lane paths through the successor graph, samples constant
acceleration speed profiles within kinematic limits, and realizes each
(path, profile) pair as a timestamped candidate trajectory. Short paths are
handled by tangent extrapolation; separately, an already generated
trajectory can be extended to a longer horizon with a constant turn rate
and velocity model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import AssociationError, ConfigError, ParseError
from .geometry import (
    Curve,
    Point2,
    curvature_at_s,
    point_at_s,
    project_point,
    tail_from,
    wrap_angle,
)
from .scene import MapGraph, ObstacleState, ObstacleTrack, nearest_lane

LANE_SEQUENCE_SEPARATOR = "->"
DEFAULT_LATERAL_CAPTURE_M = 2.0


@dataclass(frozen=True)
class IntentionPrior:
    """One intention hypothesis with its probability before trajectory evidence."""

    intention_id: str
    prior: float


def normalize_priors(priors: Sequence[IntentionPrior]) -> List[IntentionPrior]:
    """Renormalize priors to sum exactly to 1; rejects negatives and zero mass."""
    if not priors:
        raise ValueError("no priors to normalize")
    total = math.fsum(p.prior for p in priors)
    if any(p.prior < 0.0 for p in priors) or total <= 0.0:
        raise ValueError("priors must be nonnegative with positive total mass")
    return [IntentionPrior(p.intention_id, p.prior / total) for p in priors]


def load_priors(path: str) -> Dict[Tuple[str, float], List[IntentionPrior]]:
    """Parse a JSON-lines priors file keyed by (obstacle_id, anchor_time)."""
    table: Dict[Tuple[str, float], List[IntentionPrior]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            try:
                key = (record["obstacle_id"], float(record["anchor_time"]))
                entries = [
                    IntentionPrior(item["id"], float(item["prior"]))
                    for item in record["intentions"]
                ]
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed priors record: {exc}") from exc
            if key in table:
                raise ParseError(f"{path}:{lineno}: duplicate priors for {key}")
            if len({p.intention_id for p in entries}) != len(entries):
                raise ParseError(f"{path}:{lineno}: repeated intention id for {key}")
            try:
                table[key] = normalize_priors(entries)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return table


def heuristic_exit_priors(
    track: ObstacleTrack, map_graph: MapGraph, temperature: float = 1.0
) -> List[IntentionPrior]:
    """Softmax over negative heading misalignment between the obstacle's
    heading and the bearing to each exit. A stand-in prior source for when
    no model-produced priors file is supplied."""
    if not map_graph.exits:
        raise ValueError("map has no intersection exits")
    if temperature <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    state = track.latest
    scores = []
    for ex in map_graph.sorted_exits():
        bearing = math.atan2(ex.position.y - state.position.y, ex.position.x - state.position.x)
        misalignment = abs(wrap_angle(bearing - state.heading))
        scores.append((ex.exit_id, -misalignment / temperature))
    peak = max(score for _, score in scores)
    weights = [(exit_id, math.exp(score - peak)) for exit_id, score in scores]
    total = math.fsum(w for _, w in weights)
    return [IntentionPrior(exit_id, w / total) for exit_id, w in weights]


@dataclass(frozen=True)
class PathCandidate:
    """A successor-linked lane sequence realized as one concatenated curve,
    trimmed to start at the obstacle's projection point."""

    intention_id: str
    lane_ids: Tuple[str, ...]
    curve: Curve


def _concat_centerlines(map_graph: MapGraph, lane_ids: Sequence[str]) -> Curve:
    points: List[Point2] = []
    for lane_id in lane_ids:
        for p in map_graph.lanes[lane_id].centerline.points:
            if points and points[-1].distance_to(p) < 1e-9:
                continue
            points.append(p)
    return Curve(points)


def _trimmed_curve(curve: Curve, start: Point2) -> Curve:
    """Cut the concatenated centerline at the projection of the start position.

    A start at (or past) the curve end degenerates to a short tangent stub so
    downstream interpolation can extrapolate forward.
    """
    s, _ = project_point(curve, start)
    if s >= curve.length - 1e-9:
        pos, heading = point_at_s(curve, curve.length)
        return Curve(
            [pos, Point2(pos.x + math.cos(heading), pos.y + math.sin(heading))]
        )
    return tail_from(curve, s)


def _enumerate_sequences(
    map_graph: MapGraph,
    initial: Sequence[str],
    initial_length: float,
    min_length: float,
    max_lanes: int,
    required_lane: Optional[str],
) -> List[Tuple[str, ...]]:
    """Depth-first successor sequences extending `initial`, truncated once the
    required lane (if any) is included and the cumulative length reaches
    min_length, or at max_lanes; lane repetition within one sequence is
    forbidden, which also breaks graph cycles."""
    results: List[Tuple[str, ...]] = []

    def visit(sequence: List[str], length: float):
        lane_id = sequence[-1]
        satisfied = length >= min_length and (
            required_lane is None or required_lane in sequence
        )
        successors = [
            succ
            for succ in sorted(map_graph.lanes[lane_id].successor_ids)
            if succ not in sequence
        ]
        if satisfied or len(sequence) >= max_lanes or not successors:
            results.append(tuple(sequence))
            return
        for succ in successors:
            visit(sequence + [succ], length + map_graph.lanes[succ].centerline.length)

    visit(list(initial), initial_length)
    return results


def _curve_distance(curve: Curve, p: Point2) -> float:
    s, _ = project_point(curve, p)
    closest, _ = point_at_s(curve, s)
    return closest.distance_to(p)


def _reachable(map_graph: MapGraph, src: str, dst: str) -> bool:
    """True when dst can be reached from src through successor links."""
    frontier = [src]
    seen = {src}
    while frontier:
        lane_id = frontier.pop()
        if lane_id == dst:
            return True
        for succ in map_graph.lanes[lane_id].successor_ids:
            if succ not in seen:
                seen.add(succ)
                frontier.append(succ)
    return False


def search_paths(
    intention_id: str,
    start: ObstacleState,
    map_graph: MapGraph,
    min_length: float,
    max_lanes: int,
    lateral_capture: float = DEFAULT_LATERAL_CAPTURE_M,
) -> List[PathCandidate]:
    """Lane-sequence search for one intention from the obstacle's position.

    The search roots at the lane the obstacle laterally associates with. An
    exit intention must route through the exit's associated lane unless the
    obstacle has already passed it (the root is a successor-descendant of
    it); when no rooted sequence reaches that lane, the search re-roots
    there provided the obstacle lies within the capture distance of it. An
    intention id naming lanes joined by '->' pins the sequence prefix
    explicitly. AssociationError means the intention is not realizable from
    the obstacle's position: off-map with no pinned lanes, or an exit whose
    lane is out of reach.
    """
    if max_lanes < 1:
        raise ValueError(f"max_lanes must be >= 1, got {max_lanes}")

    required_lane: Optional[str] = None
    pinned: Optional[List[str]] = None
    if intention_id in map_graph.exits:
        required_lane = map_graph.exits[intention_id].associated_lane_id
    else:
        parts = intention_id.split(LANE_SEQUENCE_SEPARATOR)
        if all(part in map_graph.lanes for part in parts):
            pinned = parts

    if pinned is not None:
        for cur, nxt in zip(pinned, pinned[1:]):
            if nxt not in map_graph.lanes[cur].successor_ids:
                raise AssociationError(
                    f"intention {intention_id!r}: lane {nxt!r} is not a successor of {cur!r}"
                )
        base_curve = _concat_centerlines(map_graph, pinned)
        if _curve_distance(base_curve, start.position) > lateral_capture:
            raise AssociationError(
                f"obstacle {start.obstacle_id!r} is more than {lateral_capture} m "
                f"from the lanes of intention {intention_id!r}"
            )
        s0, _ = project_point(base_curve, start.position)
        sequences = _enumerate_sequences(
            map_graph, pinned, base_curve.length - s0, min_length, max_lanes, None
        )
        return [
            PathCandidate(
                intention_id=intention_id,
                lane_ids=lane_ids,
                curve=_trimmed_curve(_concat_centerlines(map_graph, lane_ids), start.position),
            )
            for lane_ids in sorted(set(sequences))
        ]

    def reroot_at_required() -> List[Tuple[str, ...]]:
        req_curve = map_graph.lanes[required_lane].centerline
        if _curve_distance(req_curve, start.position) > lateral_capture:
            raise AssociationError(
                f"intention {intention_id!r}: exit lane {required_lane!r} is out of "
                f"reach for obstacle {start.obstacle_id!r}"
            )
        s_req, _ = project_point(req_curve, start.position)
        return _enumerate_sequences(
            map_graph, [required_lane], req_curve.length - s_req, min_length, max_lanes, None
        )

    root = nearest_lane(map_graph, start.position, lateral_capture)
    if root is None:
        if required_lane is None:
            raise AssociationError(
                f"obstacle {start.obstacle_id!r} does not associate with any lane "
                f"within {lateral_capture} m"
            )
        sequences = reroot_at_required()
    else:
        require = required_lane
        if require is not None and (root == require or _reachable(map_graph, require, root)):
            require = None  # the exit's lane is the root or already behind the obstacle
        root_curve = map_graph.lanes[root].centerline
        s0, _ = project_point(root_curve, start.position)
        sequences = _enumerate_sequences(
            map_graph, [root], root_curve.length - s0, min_length, max_lanes, require
        )
        if require is not None:
            sequences = [seq for seq in sequences if require in seq]
            if not sequences:
                sequences = reroot_at_required()
    return [
        PathCandidate(
            intention_id=intention_id,
            lane_ids=lane_ids,
            curve=_trimmed_curve(_concat_centerlines(map_graph, lane_ids), start.position),
        )
        for lane_ids in sorted(set(sequences))
    ]


@dataclass(frozen=True)
class KinematicLimits:
    """Vehicle physical limits bounding the sampled speed profiles."""

    a_min: float = -6.0
    a_max: float = 4.0
    v_max: float = 25.0


@dataclass(frozen=True)
class SpeedProfile:
    """Constant-acceleration speed profile with speed clamped to [0, v_max]."""

    v0: float
    a: float
    duration: float
    resolution: float
    v_max: float = math.inf

    def __post_init__(self):
        if self.v0 < 0.0:
            raise ValueError(f"initial speed must be nonnegative, got {self.v0}")
        if self.resolution <= 0.0 or self.duration <= 0.0:
            raise ValueError("duration and resolution must be positive")

    def speed_at(self, t: float) -> float:
        return min(self.v_max, max(0.0, self.v0 + self.a * t))

    def state_at(self, t: float) -> Tuple[float, float, float]:
        """(arc length, speed, effective acceleration) at time t.

        The arc length is the exact integral of the clamped speed: the
        unclamped speed is linear in t, so integrating piecewise between the
        clamp crossings with the trapezoid rule is closed-form exact.
        """
        if t < 0.0:
            raise ValueError(f"time must be nonnegative, got {t}")
        breaks = [0.0, t]
        if self.a != 0.0:
            for bound in (0.0, self.v_max):
                tc = (bound - self.v0) / self.a
                if 0.0 < tc < t:
                    breaks.append(tc)
        breaks.sort()
        s = 0.0
        for t0, t1 in zip(breaks, breaks[1:]):
            s += 0.5 * (self.speed_at(t0) + self.speed_at(t1)) * (t1 - t0)
        v = self.speed_at(t)
        effective_a = self.a if 0.0 < v < self.v_max else 0.0
        return s, v, effective_a

    def sample_times(self) -> List[float]:
        steps = int(round(self.duration / self.resolution))
        return [k * self.resolution for k in range(1, steps + 1)]


def sample_profiles(
    v0: float,
    accel_set: Sequence[float],
    horizon: float,
    resolution: float,
    limits: KinematicLimits,
) -> List[SpeedProfile]:
    """One profile per admissible acceleration, sorted ascending; accelerations
    outside [a_min, a_max] are dropped and speeds cap at v_max."""
    if not accel_set:
        raise ValueError("accel_set must be nonempty")
    admissible = sorted({a for a in accel_set if limits.a_min <= a <= limits.a_max})
    return [
        SpeedProfile(v0=v0, a=a, duration=horizon, resolution=resolution, v_max=limits.v_max)
        for a in admissible
    ]


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    position: Point2
    speed: float
    curvature: float
    accel: float


@dataclass(frozen=True)
class CandidateTrajectory:
    """A (path, speed profile) pair realized as timestamped poses."""

    intention_id: str
    points: Tuple[TrajectoryPoint, ...]
    source_profile: SpeedProfile


def realize_trajectory(path: PathCandidate, profile: SpeedProfile) -> CandidateTrajectory:
    """Walk the path's curve by the profile's closed-form arc length.

    Points beyond the curve end follow the final segment's tangent; their
    curvature is zero on the straight extension.
    """
    points = []
    for t in profile.sample_times():
        s, v, a_eff = profile.state_at(t)
        position, _ = point_at_s(path.curve, s)
        points.append(
            TrajectoryPoint(
                t=t,
                position=position,
                speed=v,
                curvature=curvature_at_s(path.curve, s),
                accel=a_eff,
            )
        )
    return CandidateTrajectory(
        intention_id=path.intention_id, points=tuple(points), source_profile=profile
    )


def extend_trajectory(
    points: Sequence[Tuple[float, Point2]], target_horizon: float, resolution: float
) -> List[Tuple[float, Point2]]:
    """Append constant-turn-rate-and-velocity points until target_horizon.

    Turn rate and speed come from the final three points (final two when only
    two exist, with zero turn rate). Input already reaching the horizon is
    returned unchanged.
    """
    if len(points) < 2:
        raise ValueError("extension needs at least 2 trajectory points")
    if resolution <= 0.0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    out = list(points)
    t_last, p_last = out[-1]
    if t_last >= target_horizon - 1e-9:
        return out

    (t1, p1), (t2, p2) = out[-2], out[-1]
    chord = p1.distance_to(p2)
    dt_tail = t2 - t1
    speed = chord / dt_tail
    heading = math.atan2(p2.y - p1.y, p2.x - p1.x)
    turn_rate = 0.0
    if len(out) >= 3:
        t0, p0 = out[-3]
        prev_heading = math.atan2(p1.y - p0.y, p1.x - p0.x)
        # chord headings are tangents at segment midpoints, half a step behind
        turn_rate = wrap_angle(heading - prev_heading) / (0.5 * (t2 - t0))
        heading = wrap_angle(heading + 0.5 * turn_rate * dt_tail)

    t, x, y = t_last, p_last.x, p_last.y
    while t + resolution <= target_horizon + 1e-9:
        t = t + resolution
        if abs(turn_rate) > 1e-12:
            x += speed / turn_rate * (math.sin(heading + turn_rate * resolution) - math.sin(heading))
            y += speed / turn_rate * (-math.cos(heading + turn_rate * resolution) + math.cos(heading))
            heading = wrap_angle(heading + turn_rate * resolution)
        else:
            x += speed * resolution * math.cos(heading)
            y += speed * resolution * math.sin(heading)
        out.append((t, Point2(x, y)))
    return out


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for the candidate generator, loaded from a JSON document."""

    accel_set: Tuple[float, ...] = (-4.0, -2.0, -1.0, 0.0, 1.0, 2.0)
    a_min: float = -6.0
    a_max: float = 4.0
    v_max: float = 25.0
    horizon_secs: float = 8.0
    resolution_secs: float = 0.1
    min_path_length_m: float = 60.0
    max_lanes: int = 4
    temperature: float = 1.0

    def __post_init__(self):
        if not self.accel_set:
            raise ConfigError("accel_set must be nonempty")
        if self.horizon_secs <= 0.0 or self.resolution_secs <= 0.0:
            raise ConfigError("horizon_secs and resolution_secs must be positive")
        if self.v_max <= 0.0:
            raise ConfigError("v_max must be positive")
        if self.a_min > self.a_max:
            raise ConfigError("a_min must not exceed a_max")
        if self.max_lanes < 1:
            raise ConfigError("max_lanes must be >= 1")
        if self.temperature <= 0.0:
            raise ConfigError("temperature must be positive")

    @property
    def limits(self) -> KinematicLimits:
        return KinematicLimits(a_min=self.a_min, a_max=self.a_max, v_max=self.v_max)

    @classmethod
    def from_file(cls, path: str) -> "GenerationConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: generation config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"{path}: unknown generation config keys: {sorted(unknown)}")
        if "accel_set" in doc:
            doc = dict(doc)
            doc["accel_set"] = tuple(float(a) for a in doc["accel_set"])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
