"""Max-margin tuning of the cost weights from logged ground truth.

The assumption is that observed human trajectories are statistically optimal:
for good weights, every sampled candidate should cost at least the ground
truth plus a small margin. The resulting objective is a hinge loss that is
convex and piecewise linear in the weights, so a projected subgradient
descent (weights clamped nonnegative) optimizes it directly; the margin
forbids the degenerate all-zero solution. Normalizers z1 and z2 stay frozen,
folded into the sub-costs, so only the three weights are learned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .annotation import TrajectoryLabel
from .errors import ConfigError, JoinError, ParseError, PipelineError
from .geometry import Point2, menger_curvature
from .scene import EgoPlan

SubCosts = Tuple[float, float, float]


@dataclass(frozen=True)
class TuningExample:
    """Sub-costs of one anchor's ground truth and its sampled candidates."""

    gt_subcosts: SubCosts
    candidate_subcosts: Tuple[SubCosts, ...]
    key: Optional[Tuple[str, float]] = None

    def __post_init__(self):
        if not self.candidate_subcosts:
            raise ValueError("a tuning example needs at least one candidate")
        for triple in (self.gt_subcosts, *self.candidate_subcosts):
            if any(not math.isfinite(v) or v < 0.0 for v in triple):
                raise ValueError(f"sub-costs must be finite and nonnegative, got {triple}")


@dataclass(frozen=True)
class TunerConfig:
    """Descent hyperparameters. The batch descent is deterministic, so the
    seed only matters to stochastic variants; it is accepted and recorded."""

    delta: float = 0.1
    learning_rate: float = 0.01
    max_iters: int = 1000
    convergence_tol: float = 1e-8
    seed: int = 0
    theta_init: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ConfigError(f"margin delta must be positive, got {self.delta}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_iters < 0:
            raise ConfigError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.convergence_tol < 0.0:
            raise ConfigError(f"convergence_tol must be nonnegative, got {self.convergence_tol}")

    @classmethod
    def from_file(cls, path: str) -> "TunerConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: tuner config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"{path}: unknown tuner config keys: {sorted(unknown)}")
        if "theta_init" in doc:
            doc = dict(doc)
            theta = doc["theta_init"]
            if not isinstance(theta, (list, tuple)) or len(theta) != 3:
                raise ConfigError(f"{path}: theta_init must have exactly 3 entries")
            doc["theta_init"] = tuple(float(v) for v in theta)
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


def _finite_difference_speeds(points: Sequence[Tuple[float, Point2]]) -> List[float]:
    """Speed estimates: central differences of the position vectors, with
    second-order one-sided stencils at the endpoints."""
    n = len(points)
    times = [t for t, _ in points]
    xs = [p.x for _, p in points]
    ys = [p.y for _, p in points]

    def magnitude(dx, dy, dt):
        return math.hypot(dx, dy) / dt

    speeds = [
        magnitude(
            -3.0 * xs[0] + 4.0 * xs[1] - xs[2],
            -3.0 * ys[0] + 4.0 * ys[1] - ys[2],
            times[2] - times[0],
        )
    ]
    for i in range(1, n - 1):
        speeds.append(
            magnitude(xs[i + 1] - xs[i - 1], ys[i + 1] - ys[i - 1], times[i + 1] - times[i - 1])
        )
    speeds.append(
        magnitude(
            3.0 * xs[-1] - 4.0 * xs[-2] + xs[-3],
            3.0 * ys[-1] - 4.0 * ys[-2] + ys[-3],
            times[-1] - times[-3],
        )
    )
    return speeds


def _finite_difference_rate(times: Sequence[float], values: Sequence[float]) -> List[float]:
    """Central differences of a scalar series, second-order at the endpoints."""
    n = len(values)
    rates = [
        (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (times[2] - times[0])
    ]
    for i in range(1, n - 1):
        rates.append((values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1]))
    rates.append((3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (times[-1] - times[-3]))
    return rates


def ground_truth_subcosts(
    label: TrajectoryLabel, ego: Optional[EgoPlan], z1: float, z2: float
) -> SubCosts:
    """Sub-costs of a labeled ground-truth trajectory.

    Speeds come from central finite differences of the label positions,
    accelerations from central differences of the speeds, and curvature from
    the circumradius of consecutive point triples, so the result is directly
    comparable with candidate sub-costs computed from exact profiles.
    """
    points = label.future_points
    if len(points) < 3:
        raise ValueError(
            f"label for {label.obstacle_id!r}@{label.anchor_time} has {len(points)} points; "
            "finite-difference kinematics needs at least 3"
        )
    times = [t for t, _ in points]
    speeds = _finite_difference_speeds(points)
    accels = _finite_difference_rate(times, speeds)
    interior = [
        menger_curvature(points[i - 1][1], points[i][1], points[i + 1][1])
        for i in range(1, len(points) - 1)
    ]
    # endpoints have no bracketing triple; copy the nearest interior estimate
    curvatures = [interior[0]] + interior + [interior[-1]]

    c_acc = math.fsum(a * a for a in accels)
    c_centripetal = math.fsum((v * v * k) ** 2 for v, k in zip(speeds, curvatures)) / z1
    if ego is None or not ego.poses:
        c_collision = 0.0
    else:
        terms = []
        for rel, pos in points:
            d = pos.distance_to(ego.position_at(label.anchor_time + rel))
            terms.append(math.exp(-d * d))
        c_collision = math.fsum(terms) / z2
    return (c_acc, c_centripetal, c_collision)


def _stack(examples: Sequence[TuningExample]) -> np.ndarray:
    """All (ground truth - candidate) sub-cost differences as one matrix."""
    rows = []
    for ex in examples:
        gt = np.asarray(ex.gt_subcosts, dtype=float)
        for cand in ex.candidate_subcosts:
            rows.append(gt - np.asarray(cand, dtype=float))
    return np.asarray(rows, dtype=float)


def hinge_objective(
    examples: Sequence[TuningExample], theta: Sequence[float], delta: float
) -> float:
    """Sum over every (anchor, candidate) pair of max(0, C(gt) - C(cand) + delta)."""
    diffs = _stack(examples)
    margins = diffs @ np.asarray(theta, dtype=float) + delta
    return float(np.sum(np.maximum(margins, 0.0)))


def hinge_subgradient(
    examples: Sequence[TuningExample], theta: Sequence[float], delta: float
) -> np.ndarray:
    """Subgradient of the hinge objective: the sum of (gt - candidate)
    sub-cost differences over strictly active terms."""
    diffs = _stack(examples)
    margins = diffs @ np.asarray(theta, dtype=float) + delta
    active = margins > 0.0
    if not np.any(active):
        return np.zeros(3)
    return diffs[active].sum(axis=0)


def tune_weights(
    examples: Sequence[TuningExample],
    config: TunerConfig,
    theta_init: Optional[Sequence[float]] = None,
) -> Tuple[np.ndarray, List[float]]:
    """Projected subgradient descent on the hinge objective.

    Steps theta against the subgradient, clamping componentwise at zero, and
    stops at max_iters, at zero loss, or when the loss change over a full
    pass drops below convergence_tol. Returns the final weights and the
    per-iteration loss history (the first entry is the initial loss). The
    procedure is deterministic for fixed inputs and configuration.
    """
    if not examples:
        raise ValueError("cannot tune on an empty example list")
    ordered = sorted(examples, key=lambda ex: (ex.key is None, ex.key))
    diffs = _stack(ordered)
    theta = np.asarray(theta_init if theta_init is not None else config.theta_init, dtype=float)
    if theta.shape != (3,):
        raise ValueError(f"theta must have 3 components, got shape {theta.shape}")
    delta = config.delta

    def loss_and_grad(th):
        margins = diffs @ th + delta
        active = margins > 0.0
        loss = float(np.sum(margins[active]))
        grad = diffs[active].sum(axis=0) if np.any(active) else np.zeros(3)
        return loss, grad

    loss, grad = loss_and_grad(theta)
    if not math.isfinite(loss):
        raise PipelineError(f"non-finite tuning loss {loss}; inputs are corrupt")
    history = [loss]
    for _ in range(config.max_iters):
        if loss == 0.0:
            break
        theta = np.maximum(theta - config.learning_rate * grad, 0.0)
        new_loss, grad = loss_and_grad(theta)
        if not math.isfinite(new_loss):
            raise PipelineError(f"non-finite tuning loss {new_loss}; inputs are corrupt")
        history.append(new_loss)
        converged = abs(new_loss - loss) < config.convergence_tol
        loss = new_loss
        if converged:
            break
    return theta, history


def extract_examples(
    prediction_records: Sequence[dict],
    dataset_records: Sequence[dict],
    ego: Optional[EgoPlan] = None,
) -> Tuple[List[TuningExample], int]:
    """Join prediction and dataset files on (obstacle_id, anchor_time).

    Candidate sub-costs come from the per-candidate breakdowns embedded in
    the prediction records; ground-truth sub-costs are recomputed from each
    label with the same normalizers the predictions carry. Anchors present
    on only one side are skipped and counted; duplicate keys are an error.
    """
    predictions: Dict[Tuple[str, float], dict] = {}
    for record in prediction_records:
        key = (record["obstacle_id"], float(record["anchor_time"]))
        if key in predictions:
            raise JoinError(f"duplicate prediction key {key}")
        predictions[key] = record

    labels: Dict[Tuple[str, float], dict] = {}
    for record in dataset_records:
        key = (record["obstacle_id"], float(record["anchor_time"]))
        if key in labels:
            raise JoinError(f"duplicate dataset key {key}")
        labels[key] = record

    examples = []
    for key in sorted(set(predictions) & set(labels)):
        pred = predictions[key]
        data = labels[key]
        label = TrajectoryLabel(
            obstacle_id=key[0],
            anchor_time=key[1],
            future_points=tuple((f[0], Point2(f[1], f[2])) for f in data["future"]),
            horizon=data["future"][-1][0] if data["future"] else 0.0,
        )
        try:
            z1, z2 = float(pred["z1"]), float(pred["z2"])
        except KeyError as exc:
            raise JoinError(f"prediction record {key} lacks normalizer {exc}") from exc
        gt = ground_truth_subcosts(label, ego, z1, z2)
        candidates = tuple(
            (float(c[0]), float(c[1]), float(c[2]))
            for entry in pred["intentions"]
            for c in entry["candidates"]
        )
        examples.append(TuningExample(gt_subcosts=gt, candidate_subcosts=candidates, key=key))
    skipped = (len(predictions) - len(examples)) + (len(labels) - len(examples))
    return examples, skipped
