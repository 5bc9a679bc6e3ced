"""Kinematic and interaction features over pair segments.

Every distance and velocity is normalized by the torso height of the person
it belongs to (interaction distances use the mean of both torso heights),
which removes sensitivity to subject-camera distance. Per-frame series are
aggregated into a fixed-order feature vector with mean / median / min /
max / p95 statistics plus a handful of event-shaped scalars (time to peak,
retraction after peak, longest fast-and-close run, ...).

Per-frame values can be *missing* (None) when the joints involved are
invalid in that frame; statistics are computed over the present values and
an all-missing series falls back to a kind-specific sentinel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Sequence, Union

from .preprocess import body_center, effective_torso_height
from .types import (
    LEFT_EAR,
    LEFT_ELBOW,
    LEFT_HIP,
    LEFT_SHOULDER,
    LEFT_WRIST,
    NOSE,
    RIGHT_EAR,
    RIGHT_ELBOW,
    RIGHT_HIP,
    RIGHT_SHOULDER,
    RIGHT_WRIST,
    PairSegment,
    Skeleton,
    Track,
)

Value = Optional[float]


class InsufficientSamples(ValueError):
    """Track too short for the requested derivative order."""


class DegenerateBox(ValueError):
    """Bounding-box area hit zero where a relative rate is required."""


class NoTemporalOverlap(ValueError):
    """The two tracks share no usable time span."""


class NoValidJointPairs(ValueError):
    """No frame has the joints needed for any reaching feature."""


class UnknownStatistic(ValueError):
    """Aggregation statistic name not supported."""


class SegmentTooShort(ValueError):
    """Segment shorter than the configured minimum frame count."""


@dataclass(frozen=True)
class FeatureParams:
    """Thresholds for the event-shaped features (normalized units)."""

    fast_hand_threshold: float = 1.5  # torso-heights / second
    elbow_flex_threshold: float = 120.0  # degrees
    close_hand_threshold: float = 0.4  # torso-heights
    hand_toward_threshold: float = 0.7  # cosine
    min_segment_frames: int = 5


@dataclass
class FeatureSeries:
    """A named per-frame series; None marks frames where it is undefined."""

    name: str
    times: list[float]
    values: list[Value]

    def present(self) -> list[float]:
        return [v for v in self.values if v is not None]


# ---------------------------------------------------------------------------
# aggregation

STATS = ("mean", "median", "min", "max", "p95")

# Value substituted when a whole series (or scalar) is unobservable.
# Distance-type features default to "far apart", everything else to 0.
MISSING_DISTANCE = 10.0


def _stat(values: list[float], stat: str) -> float:
    if stat == "mean":
        return sum(values) / len(values)
    if stat == "median":
        s = sorted(values)
        n = len(s)
        if n % 2 == 1:
            return s[n // 2]
        return (s[n // 2 - 1] + s[n // 2]) / 2.0
    if stat == "min":
        return min(values)
    if stat == "max":
        return max(values)
    if stat == "p95":
        s = sorted(values)
        return s[math.ceil(0.95 * len(s)) - 1]
    raise UnknownStatistic(f"unknown statistic {stat!r}")


def aggregate(
    series: FeatureSeries, stats: Sequence[str], missing: Value = None
) -> dict[str, Value]:
    """Aggregate the present values of a series; empty series yield ``missing``."""
    for stat in stats:
        if stat not in STATS:
            raise UnknownStatistic(f"unknown statistic {stat!r}")
    values = series.present()
    if not values:
        return {stat: missing for stat in stats}
    return {stat: _stat(values, stat) for stat in stats}


# ---------------------------------------------------------------------------
# schema

_INDIVIDUAL_LAYOUT: tuple[tuple[str, str, bool], ...] = (
    # (name, "series"|"scalar", aggressor_only)
    ("velocity", "series", False),
    ("acceleration", "series", False),
    ("handVelocity", "series", False),
    ("fastHandPct", "scalar", False),
    ("timeToPeakHandVel", "scalar", False),
    ("handAcceleration", "series", True),
    ("handJerkMin", "scalar", True),
    ("armExtension", "series", False),
    ("timeToPeakArmExt", "scalar", True),
    ("armRetraction0p2s", "scalar", True),
    ("elbowFlexPctL", "scalar", False),
    ("elbowFlexPctR", "scalar", False),
    ("elbowAngleL", "series", False),
    ("elbowAngleR", "series", False),
    ("bboxAreaRate", "series", False),
)

_INTERACTION_LAYOUT: tuple[tuple[str, str], ...] = (
    ("distance", "series"),
    ("distanceRate", "series"),
    ("iou", "series"),
    ("iouPeak", "scalar"),
    ("iouDrop0p2s", "scalar"),
    ("relativeSpeed", "series"),
    ("handTowardCos", "series"),
    ("handTowardGt07Pct", "scalar"),
    ("handToTorso", "series"),
    ("handToHip", "series"),
    ("closeHandPct", "scalar"),
    ("fastAndClosePct", "scalar"),
    ("fastAndCloseLongest", "scalar"),
    ("postContactSepMean", "scalar"),
    ("AfacingToB", "series"),
    ("BfacingToA", "series"),
    ("facingRate", "series"),
)

# Historic spellings accepted on input and mapped to canonical names.
NAME_ALIASES = {
    "dist_p95": "distance_p95",
    "distancet_max": "distance_max",
    "handToTorsoMin": "handToTorso_min",
    "handToHipMin": "handToHip_min",
    "handTowardPct": "handTowardGt07Pct",
}

_COSINE_BASES = {"handTowardCos", "AfacingToB", "BfacingToA"}
_IOU_BASES = {"iou", "iouPeak", "iouDrop0p2s"}
_DISTANCE_BASES = {"distance", "handToTorso", "handToHip", "postContactSepMean"}


def canonical_name(name: str) -> str:
    if name.startswith("AB_"):
        name = name[3:]
    return NAME_ALIASES.get(name, name)


def _split_stat(base: str) -> tuple[str, Optional[str]]:
    for stat in STATS:
        suffix = "_" + stat
        if base.endswith(suffix):
            return base[: -len(suffix)], stat
    return base, None


def feature_kind(name: str) -> str:
    """percentage | iou | cosine | distance | other, for ranges and sentinels."""
    base = canonical_name(name)
    if base.startswith(("A_", "B_")):
        base = base[2:]
    core, _ = _split_stat(base)
    if "Pct" in core:
        return "percentage"
    if core in _IOU_BASES:
        return "iou"
    if core in _COSINE_BASES:
        return "cosine"
    if core in _DISTANCE_BASES:
        return "distance"
    return "other"


def missing_sentinel(name: str) -> float:
    return MISSING_DISTANCE if feature_kind(name) == "distance" else 0.0


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, versioned list of aggregated feature names."""

    names: tuple[str, ...]
    version: str

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise ValueError("schema names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(canonical_name(name))

    def select(self, names: Sequence[str], version: Optional[str] = None) -> "FeatureSchema":
        chosen = {canonical_name(n) for n in names}
        unknown = chosen - set(self.names)
        if unknown:
            raise KeyError(f"names not in schema: {sorted(unknown)}")
        kept = tuple(n for n in self.names if n in chosen)
        return FeatureSchema(kept, version or f"{self.version}+select{len(kept)}")


def full_schema() -> FeatureSchema:
    names: list[str] = []
    for prefix, is_aggressor in (("A_", True), ("B_", False)):
        for base, shape, agg_only in _INDIVIDUAL_LAYOUT:
            if agg_only and not is_aggressor:
                continue
            if shape == "series":
                names.extend(f"{prefix}{base}_{stat}" for stat in STATS)
            else:
                names.append(f"{prefix}{base}")
    for base, shape in _INTERACTION_LAYOUT:
        if shape == "series":
            names.extend(f"{base}_{stat}" for stat in STATS)
        else:
            names.append(base)
    return FeatureSchema(tuple(names), version="full-v1")


@dataclass(frozen=True)
class FeatureVector:
    """Aggregated features of one segment under one role ordering."""

    values: dict[str, float]
    start_time: float
    end_time: float
    roles: tuple[str, str]  # (aggressor track id, victim track id)

    def __getitem__(self, name: str) -> float:
        return self.values[canonical_name(name)]

    def as_row(self, schema: FeatureSchema) -> list[float]:
        return [self.values[name] for name in schema.names]


# ---------------------------------------------------------------------------
# per-frame geometry helpers (plain arithmetic, fixed operation order)


def _dist(ax: float, ay: float, bx: float, by: float) -> float:
    return math.sqrt((ax - bx) ** 2 + (ay - by) ** 2)


def _skels(track: Track) -> list[Skeleton]:
    if track.smoothed is None:
        raise ValueError(f"track {track.track_id} has not been smoothed")
    return track.smoothed


def _centers(track: Track) -> list[Optional[tuple[float, float]]]:
    return [body_center(s) for s in _skels(track)]


def _torsos(track: Track) -> list[Value]:
    return [effective_torso_height(s) for s in _skels(track)]


def _valid_pos(skel: Skeleton, idx: int) -> Optional[tuple[float, float]]:
    kp = skel.keypoints[idx]
    return (kp.x, kp.y) if kp.is_valid() else None


def _frames_for(span_s: float, fps: float) -> int:
    return round(span_s * fps)


def _first_argmax(values: list[Value]) -> Optional[int]:
    best_i: Optional[int] = None
    best_v = -math.inf
    for i, v in enumerate(values):
        if v is not None and v > best_v:
            best_i, best_v = i, v
    return best_i


def _first_argmin(values: list[Value]) -> Optional[int]:
    best_i: Optional[int] = None
    best_v = math.inf
    for i, v in enumerate(values):
        if v is not None and v < best_v:
            best_i, best_v = i, v
    return best_i


def _pct(flags: list[Optional[bool]]) -> Value:
    present = [f for f in flags if f is not None]
    if not present:
        return None
    return 100.0 * sum(1 for f in present if f) / len(present)


def _longest_run(flags: list[Optional[bool]]) -> float:
    best = run = 0
    for f in flags:
        if f:
            run += 1
            if run > best:
                best = run
        else:
            run = 0
    return float(best)


def _backward_diff(times: list[float], values: list[Value]) -> list[Value]:
    out: list[Value] = [None] * len(values)
    for i in range(1, len(values)):
        if values[i] is not None and values[i - 1] is not None:
            dt = times[i] - times[i - 1]
            if dt > 0:
                out[i] = (values[i] - values[i - 1]) / dt
    return out


# ---------------------------------------------------------------------------
# individual features


def center_kinematics(track: Track) -> tuple[FeatureSeries, FeatureSeries]:
    """Normalized body-center speed and its backward-difference acceleration."""
    if len(track) < 2:
        raise InsufficientSamples("center kinematics need at least 2 samples")
    times = track.timestamps
    centers = _centers(track)
    torsos = _torsos(track)
    speed: list[Value] = [None] * len(times)
    for i in range(1, len(times)):
        c, p, th = centers[i], centers[i - 1], torsos[i]
        dt = times[i] - times[i - 1]
        if c is not None and p is not None and th is not None and dt > 0:
            speed[i] = _dist(c[0], c[1], p[0], p[1]) / dt / th
    accel = _backward_diff(times, speed)
    return (
        FeatureSeries("velocity", times, speed),
        FeatureSeries("acceleration", times, accel),
    )


def wrist_velocities(
    track: Track,
) -> list[dict[int, tuple[float, float, float]]]:
    """Per frame: wrist joint index -> (vx, vy, normalized speed).

    The velocity vector is in raw pixels per frame step; the speed is
    normalized by time step and torso height. A wrist only has a velocity
    at frame i when it is valid at frames i-1 and i.
    """
    times = track.timestamps
    skels = _skels(track)
    torsos = _torsos(track)
    out: list[dict[int, tuple[float, float, float]]] = [dict() for _ in times]
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        th = torsos[i]
        if dt <= 0 or th is None:
            continue
        for wrist in (LEFT_WRIST, RIGHT_WRIST):
            cur = _valid_pos(skels[i], wrist)
            prev = _valid_pos(skels[i - 1], wrist)
            if cur is None or prev is None:
                continue
            vx = cur[0] - prev[0]
            vy = cur[1] - prev[1]
            speed = math.sqrt(vx**2 + vy**2) / dt / th
            out[i][wrist] = (vx, vy, speed)
    return out


@dataclass
class HandMotion:
    hand_velocity: FeatureSeries
    hand_acceleration: FeatureSeries
    hand_jerk: FeatureSeries
    fast_hand_pct: Value
    time_to_peak_hand_vel: Value
    hand_jerk_min: Value
    fast_flags: list[Optional[bool]] = field(repr=False, default_factory=list)


def hand_motion(track: Track, params: FeatureParams = FeatureParams()) -> HandMotion:
    """Wrist speed series (max over the two wrists) and its derivatives."""
    if len(track) < 3:
        raise InsufficientSamples("hand motion needs at least 3 samples")
    times = track.timestamps
    velocities = wrist_velocities(track)
    speed: list[Value] = [None] * len(times)
    for i, per_wrist in enumerate(velocities):
        if per_wrist:
            speed[i] = max(v[2] for v in per_wrist.values())
    accel = _backward_diff(times, speed)
    jerk = _backward_diff(times, accel)

    fast_flags: list[Optional[bool]] = [
        None if s is None else s > params.fast_hand_threshold for s in speed
    ]
    peak = _first_argmax(speed)
    jerk_present = [v for v in jerk if v is not None]
    return HandMotion(
        hand_velocity=FeatureSeries("handVelocity", times, speed),
        hand_acceleration=FeatureSeries("handAcceleration", times, accel),
        hand_jerk=FeatureSeries("handJerk", times, jerk),
        fast_hand_pct=_pct(fast_flags),
        time_to_peak_hand_vel=None if peak is None else float(peak),
        hand_jerk_min=min(jerk_present) if jerk_present else None,
        fast_flags=fast_flags,
    )


def _elbow_angle(skel: Skeleton, shoulder: int, elbow: int, wrist: int) -> Value:
    s = _valid_pos(skel, shoulder)
    e = _valid_pos(skel, elbow)
    w = _valid_pos(skel, wrist)
    if s is None or e is None or w is None:
        return None
    ux, uy = s[0] - e[0], s[1] - e[1]
    wx, wy = w[0] - e[0], w[1] - e[1]
    nu = math.sqrt(ux**2 + uy**2)
    nw = math.sqrt(wx**2 + wy**2)
    if nu == 0.0 or nw == 0.0:
        return None
    c = (ux * wx + uy * wy) / (nu * nw)
    c = min(1.0, max(-1.0, c))
    return math.degrees(math.acos(c))


@dataclass
class ArmPosture:
    arm_extension: FeatureSeries
    elbow_angle_l: FeatureSeries
    elbow_angle_r: FeatureSeries
    time_to_peak_arm_ext: Value
    arm_retraction_0p2s: Value
    elbow_flex_pct_l: Value
    elbow_flex_pct_r: Value


def arm_posture(track: Track, fps: float, params: FeatureParams = FeatureParams()) -> ArmPosture:
    """Arm extension (max over arms) and interior elbow angles."""
    if len(track) < 1:
        raise InsufficientSamples("arm posture needs at least 1 sample")
    times = track.timestamps
    skels = _skels(track)
    torsos = _torsos(track)

    extension: list[Value] = [None] * len(times)
    angle_l: list[Value] = [None] * len(times)
    angle_r: list[Value] = [None] * len(times)
    for i, skel in enumerate(skels):
        th = torsos[i]
        if th is not None:
            per_arm = []
            for shoulder, wrist in ((LEFT_SHOULDER, LEFT_WRIST), (RIGHT_SHOULDER, RIGHT_WRIST)):
                s = _valid_pos(skel, shoulder)
                w = _valid_pos(skel, wrist)
                if s is not None and w is not None:
                    per_arm.append(_dist(w[0], w[1], s[0], s[1]) / th)
            if per_arm:
                extension[i] = max(per_arm)
        angle_l[i] = _elbow_angle(skel, LEFT_SHOULDER, LEFT_ELBOW, LEFT_WRIST)
        angle_r[i] = _elbow_angle(skel, RIGHT_SHOULDER, RIGHT_ELBOW, RIGHT_WRIST)

    peak = _first_argmax(extension)
    retraction: Value = None
    if peak is not None:
        target = peak + _frames_for(0.2, fps)
        if target < len(extension) and extension[target] is not None:
            retraction = extension[peak] - extension[target]

    thr = params.elbow_flex_threshold
    flex_l = _pct([None if a is None else a < thr for a in angle_l])
    flex_r = _pct([None if a is None else a < thr for a in angle_r])
    return ArmPosture(
        arm_extension=FeatureSeries("armExtension", times, extension),
        elbow_angle_l=FeatureSeries("elbowAngleL", times, angle_l),
        elbow_angle_r=FeatureSeries("elbowAngleR", times, angle_r),
        time_to_peak_arm_ext=None if peak is None else float(peak),
        arm_retraction_0p2s=retraction,
        elbow_flex_pct_l=flex_l,
        elbow_flex_pct_r=flex_r,
    )


def bbox_area_rate(track: Track) -> FeatureSeries:
    """Relative derivative of the (smoothed) bounding-box area, per second."""
    if len(track) < 2:
        raise InsufficientSamples("bbox area rate needs at least 2 samples")
    times = track.timestamps
    areas = [s.bbox_area for s in _skels(track)]
    rate: list[Value] = [None] * len(times)
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        if dt <= 0:
            continue
        if areas[i - 1] == 0.0:
            raise DegenerateBox(f"zero-area bbox at sample {i - 1} of track {track.track_id}")
        rate[i] = (areas[i] - areas[i - 1]) / (areas[i - 1] * dt)
    return FeatureSeries("bboxAreaRate", times, rate)


def iou(box_a: Sequence[float], box_b: Sequence[float]) -> float:
    """Intersection over union of two (x1, y1, x2, y2) rectangles."""
    ix1 = max(box_a[0], box_b[0])
    iy1 = max(box_a[1], box_b[1])
    ix2 = min(box_a[2], box_b[2])
    iy2 = min(box_a[3], box_b[3])
    iw = ix2 - ix1
    ih = iy2 - iy1
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    area_a = (box_a[2] - box_a[0]) * (box_a[3] - box_a[1])
    area_b = (box_b[2] - box_b[0]) * (box_b[3] - box_b[1])
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


# ---------------------------------------------------------------------------
# pair alignment and interaction features


def pair_segment(
    track_a: Track,
    track_b: Track,
    fps: float,
    start: Optional[float] = None,
    end: Optional[float] = None,
) -> PairSegment:
    """Align two smoothed tracks on shared timestamps within [start, end]."""
    if track_a.smoothed is None or track_b.smoothed is None:
        raise ValueError("both tracks must be smoothed before pairing")
    index_b = {t: i for i, (t, _) in enumerate(track_b.samples)}
    rows: list[tuple[float, int, int]] = []
    for ia, (t, _) in enumerate(track_a.samples):
        if start is not None and t < start:
            continue
        if end is not None and t > end:
            continue
        ib = index_b.get(t)
        if ib is not None:
            rows.append((t, ia, ib))
    if len(rows) < 2:
        raise NoTemporalOverlap(
            f"tracks {track_a.track_id} and {track_b.track_id} share fewer than 2 frames"
        )

    def slice_track(track: Track, picks: list[int]) -> Track:
        return Track(
            track_id=track.track_id,
            samples=[track.samples[i] for i in picks],
            smoothed=[track.smoothed[i] for i in picks],
            positions=[track.positions[i] for i in picks] if track.positions else None,
        )

    return PairSegment(
        aggressor=slice_track(track_a, [ia for _, ia, _ in rows]),
        victim=slice_track(track_b, [ib for _, _, ib in rows]),
        start_time=rows[0][0],
        end_time=rows[-1][0],
        fps=fps,
    )


def _mean_torsos(pair: PairSegment) -> list[Value]:
    torsos_a = _torsos(pair.aggressor)
    torsos_b = _torsos(pair.victim)
    return [
        None if ta is None or tb is None else (ta + tb) / 2.0
        for ta, tb in zip(torsos_a, torsos_b)
    ]


@dataclass
class InteractionDistance:
    distance: FeatureSeries
    distance_rate: FeatureSeries
    iou: FeatureSeries
    iou_peak: Value
    iou_drop_0p2s: Value


def interaction_distance(pair: PairSegment) -> InteractionDistance:
    """Normalized center distance, its rate, and bbox IoU over the segment."""
    times = pair.aggressor.timestamps
    centers_a = _centers(pair.aggressor)
    centers_b = _centers(pair.victim)
    mean_th = _mean_torsos(pair)

    distance: list[Value] = [None] * len(times)
    for i in range(len(times)):
        ca, cb, th = centers_a[i], centers_b[i], mean_th[i]
        if ca is not None and cb is not None and th is not None:
            distance[i] = _dist(ca[0], ca[1], cb[0], cb[1]) / th
    rate = _backward_diff(times, distance)

    ious: list[Value] = [
        iou(sa.bbox, sb.bbox)
        for sa, sb in zip(_skels(pair.aggressor), _skels(pair.victim))
    ]
    peak = _first_argmax(ious)
    drop: Value = None
    if peak is not None:
        target = peak + _frames_for(0.2, pair.fps)
        if target < len(ious):
            drop = ious[peak] - ious[target]
    return InteractionDistance(
        distance=FeatureSeries("distance", times, distance),
        distance_rate=FeatureSeries("distanceRate", times, rate),
        iou=FeatureSeries("iou", times, ious),
        iou_peak=None if peak is None else ious[peak],
        iou_drop_0p2s=drop,
    )


@dataclass
class RelativeMotion:
    relative_speed: FeatureSeries
    hand_toward_cos: FeatureSeries
    hand_toward_pct: Value


def relative_motion(pair: PairSegment, params: FeatureParams = FeatureParams()) -> RelativeMotion:
    """Relative center speed plus the hand-toward-victim direction cosine.

    The cosine compares the velocity of A's faster wrist with the vector
    from that wrist to B's torso center; frames without wrist motion yield
    a missing value.
    """
    times = pair.aggressor.timestamps
    centers_a = _centers(pair.aggressor)
    centers_b = _centers(pair.victim)
    mean_th = _mean_torsos(pair)
    skels_a = _skels(pair.aggressor)
    velocities = wrist_velocities(pair.aggressor)

    rel_speed: list[Value] = [None] * len(times)
    for i in range(1, len(times)):
        ca, cb = centers_a[i], centers_b[i]
        pa, pb = centers_a[i - 1], centers_b[i - 1]
        th = mean_th[i]
        dt = times[i] - times[i - 1]
        if None in (ca, cb, pa, pb, th) or dt <= 0:
            continue
        rx = (ca[0] - cb[0]) - (pa[0] - pb[0])
        ry = (ca[1] - cb[1]) - (pa[1] - pb[1])
        rel_speed[i] = math.sqrt(rx**2 + ry**2) / dt / th

    toward: list[Value] = [None] * len(times)
    for i in range(1, len(times)):
        cb = centers_b[i]
        if cb is None or not velocities[i]:
            continue
        best_wrist = None
        best_speed = -math.inf
        for wrist in (LEFT_WRIST, RIGHT_WRIST):
            v = velocities[i].get(wrist)
            if v is not None and v[2] > best_speed:
                best_wrist, best_speed = wrist, v[2]
        vx, vy, _ = velocities[i][best_wrist]
        wpos = _valid_pos(skels_a[i], best_wrist)
        nv = math.sqrt(vx**2 + vy**2)
        if wpos is None or nv == 0.0:
            continue
        dx = cb[0] - wpos[0]
        dy = cb[1] - wpos[1]
        nd = math.sqrt(dx**2 + dy**2)
        if nd == 0.0:
            continue
        c = (vx * dx + vy * dy) / (nv * nd)
        toward[i] = min(1.0, max(-1.0, c))

    thr = params.hand_toward_threshold
    pct = _pct([None if c is None else c > thr for c in toward])
    return RelativeMotion(
        relative_speed=FeatureSeries("relativeSpeed", times, rel_speed),
        hand_toward_cos=FeatureSeries("handTowardCos", times, toward),
        hand_toward_pct=pct,
    )


@dataclass
class Reaching:
    hand_to_torso: FeatureSeries
    hand_to_hip: FeatureSeries
    close_hand_pct: Value
    fast_and_close_pct: Value
    fast_and_close_longest: Value
    post_contact_sep_mean: Value


def reaching(pair: PairSegment, params: FeatureParams = FeatureParams()) -> Reaching:
    """A-wrist to B-torso/hip distances and the fast-and-close conjunction."""
    times = pair.aggressor.timestamps
    skels_a = _skels(pair.aggressor)
    skels_b = _skels(pair.victim)
    centers_b = _centers(pair.victim)
    torsos_b = _torsos(pair.victim)

    hand_to_torso: list[Value] = [None] * len(times)
    hand_to_hip: list[Value] = [None] * len(times)
    for i in range(len(times)):
        th = torsos_b[i]
        if th is None:
            continue
        wrists = [
            p
            for p in (_valid_pos(skels_a[i], LEFT_WRIST), _valid_pos(skels_a[i], RIGHT_WRIST))
            if p is not None
        ]
        if not wrists:
            continue
        cb = centers_b[i]
        if cb is not None:
            hand_to_torso[i] = min(_dist(w[0], w[1], cb[0], cb[1]) / th for w in wrists)
        hip_l = _valid_pos(skels_b[i], LEFT_HIP)
        hip_r = _valid_pos(skels_b[i], RIGHT_HIP)
        if hip_l is not None and hip_r is not None:
            hip = ((hip_l[0] + hip_r[0]) / 2.0, (hip_l[1] + hip_r[1]) / 2.0)
        else:
            hip = hip_l if hip_l is not None else hip_r
        if hip is not None:
            hand_to_hip[i] = min(_dist(w[0], w[1], hip[0], hip[1]) / th for w in wrists)

    if not any(v is not None for v in hand_to_torso) and not any(
        v is not None for v in hand_to_hip
    ):
        raise NoValidJointPairs("no frame pairs A's wrists with B's torso or hips")

    close_flags = [
        None if d is None else d < params.close_hand_threshold for d in hand_to_torso
    ]
    fast_flags = hand_motion(pair.aggressor, params).fast_flags
    both: list[Optional[bool]] = [
        None if f is None or c is None else (f and c) for f, c in zip(fast_flags, close_flags)
    ]

    contact = _first_argmin(hand_to_torso)
    post_mean: Value = None
    if contact is not None:
        distance = interaction_distance(pair).distance.values
        stop = min(contact + _frames_for(0.4, pair.fps), len(times) - 1)
        window = [distance[i] for i in range(contact, stop + 1) if distance[i] is not None]
        if window:
            post_mean = sum(window) / len(window)

    return Reaching(
        hand_to_torso=FeatureSeries("handToTorso", times, hand_to_torso),
        hand_to_hip=FeatureSeries("handToHip", times, hand_to_hip),
        close_hand_pct=_pct(close_flags),
        fast_and_close_pct=_pct(both),
        fast_and_close_longest=_longest_run(both),
        post_contact_sep_mean=post_mean,
    )


def facing_direction(skel: Skeleton) -> Optional[tuple[float, float]]:
    """Unit 2D facing vector from head geometry.

    Prefers ear-midpoint to nose; falls back to the shoulder-line normal
    signed toward the nose. None when neither construction has valid joints.
    """
    nose = _valid_pos(skel, NOSE)
    if nose is None:
        return None
    ear_l = _valid_pos(skel, LEFT_EAR)
    ear_r = _valid_pos(skel, RIGHT_EAR)
    if ear_l is not None and ear_r is not None:
        mid = ((ear_l[0] + ear_r[0]) / 2.0, (ear_l[1] + ear_r[1]) / 2.0)
        fx, fy = nose[0] - mid[0], nose[1] - mid[1]
    else:
        sh_l = _valid_pos(skel, LEFT_SHOULDER)
        sh_r = _valid_pos(skel, RIGHT_SHOULDER)
        if sh_l is None or sh_r is None:
            return None
        lx, ly = sh_r[0] - sh_l[0], sh_r[1] - sh_l[1]
        nx, ny = -ly, lx
        mid = ((sh_l[0] + sh_r[0]) / 2.0, (sh_l[1] + sh_r[1]) / 2.0)
        side = nx * (nose[0] - mid[0]) + ny * (nose[1] - mid[1])
        if side == 0.0:
            return None
        if side < 0.0:
            nx, ny = -nx, -ny
        fx, fy = nx, ny
    norm = math.sqrt(fx**2 + fy**2)
    if norm == 0.0:
        return None
    return (fx / norm, fy / norm)


@dataclass
class Facing:
    a_facing_to_b: FeatureSeries
    b_facing_to_a: FeatureSeries
    facing_rate: FeatureSeries


def facing(pair: PairSegment) -> Facing:
    """Facing cosines for both roles plus the victim's facing angular speed.

    Both cosines are taken against the A-to-B direction, so +1 means A
    faces B and -1 means B faces A.
    """
    times = pair.aggressor.timestamps
    centers_a = _centers(pair.aggressor)
    centers_b = _centers(pair.victim)
    face_a = [facing_direction(s) for s in _skels(pair.aggressor)]
    face_b = [facing_direction(s) for s in _skels(pair.victim)]

    a_to_b: list[Value] = [None] * len(times)
    b_to_a: list[Value] = [None] * len(times)
    for i in range(len(times)):
        ca, cb = centers_a[i], centers_b[i]
        if ca is None or cb is None:
            continue
        ux, uy = cb[0] - ca[0], cb[1] - ca[1]
        nu = math.sqrt(ux**2 + uy**2)
        if nu == 0.0:
            continue
        if face_a[i] is not None:
            c = (face_a[i][0] * ux + face_a[i][1] * uy) / nu
            a_to_b[i] = min(1.0, max(-1.0, c))
        if face_b[i] is not None:
            c = (face_b[i][0] * ux + face_b[i][1] * uy) / nu
            b_to_a[i] = min(1.0, max(-1.0, c))

    rate: list[Value] = [None] * len(times)
    tau = 2.0 * math.pi
    for i in range(1, len(times)):
        fa, fb = face_b[i - 1], face_b[i]
        dt = times[i] - times[i - 1]
        if fa is None or fb is None or dt <= 0:
            continue
        d = math.atan2(fb[1], fb[0]) - math.atan2(fa[1], fa[0])
        d = (d + math.pi) % tau - math.pi
        rate[i] = abs(d) / dt

    return Facing(
        a_facing_to_b=FeatureSeries("AfacingToB", times, a_to_b),
        b_facing_to_a=FeatureSeries("BfacingToA", times, b_to_a),
        facing_rate=FeatureSeries("facingRate", times, rate),
    )


# ---------------------------------------------------------------------------
# segment-level assembly


def _individual_features(
    track: Track, fps: float, params: FeatureParams, prefix: str, aggressor: bool
) -> dict[str, Value]:
    out: dict[str, Value] = {}

    def put_series(base: str, series: FeatureSeries) -> None:
        agg = aggregate(series, STATS)
        for stat in STATS:
            out[f"{prefix}{base}_{stat}"] = agg[stat]

    velocity, acceleration = center_kinematics(track)
    put_series("velocity", velocity)
    put_series("acceleration", acceleration)

    hands = hand_motion(track, params)
    put_series("handVelocity", hands.hand_velocity)
    out[f"{prefix}fastHandPct"] = hands.fast_hand_pct
    out[f"{prefix}timeToPeakHandVel"] = hands.time_to_peak_hand_vel
    if aggressor:
        put_series("handAcceleration", hands.hand_acceleration)
        out[f"{prefix}handJerkMin"] = hands.hand_jerk_min

    arms = arm_posture(track, fps, params)
    put_series("armExtension", arms.arm_extension)
    if aggressor:
        out[f"{prefix}timeToPeakArmExt"] = arms.time_to_peak_arm_ext
        out[f"{prefix}armRetraction0p2s"] = arms.arm_retraction_0p2s
    out[f"{prefix}elbowFlexPctL"] = arms.elbow_flex_pct_l
    out[f"{prefix}elbowFlexPctR"] = arms.elbow_flex_pct_r
    put_series("elbowAngleL", arms.elbow_angle_l)
    put_series("elbowAngleR", arms.elbow_angle_r)

    put_series("bboxAreaRate", bbox_area_rate(track))
    return out


def extract_segment(
    pair: PairSegment,
    schema: Optional[FeatureSchema] = None,
    params: FeatureParams = FeatureParams(),
) -> FeatureVector:
    """Compute the complete feature vector of a pair segment.

    Missing aggregates are materialized with the kind-specific sentinel so
    the classifier always sees a finite value for every schema name.
    """
    if schema is None:
        schema = full_schema()
    if len(pair) < params.min_segment_frames:
        raise SegmentTooShort(
            f"segment has {len(pair)} frames, need {params.min_segment_frames}"
        )

    raw: dict[str, Value] = {}
    raw.update(_individual_features(pair.aggressor, pair.fps, params, "A_", aggressor=True))
    raw.update(_individual_features(pair.victim, pair.fps, params, "B_", aggressor=False))

    inter = interaction_distance(pair)
    rel = relative_motion(pair, params)
    fac = facing(pair)
    for base, series in (
        ("distance", inter.distance),
        ("distanceRate", inter.distance_rate),
        ("iou", inter.iou),
        ("relativeSpeed", rel.relative_speed),
        ("handTowardCos", rel.hand_toward_cos),
        ("AfacingToB", fac.a_facing_to_b),
        ("BfacingToA", fac.b_facing_to_a),
        ("facingRate", fac.facing_rate),
    ):
        agg = aggregate(series, STATS)
        for stat in STATS:
            raw[f"{base}_{stat}"] = agg[stat]
    raw["iouPeak"] = inter.iou_peak
    raw["iouDrop0p2s"] = inter.iou_drop_0p2s
    raw["handTowardGt07Pct"] = rel.hand_toward_pct

    try:
        reach = reaching(pair, params)
        for base, series in (("handToTorso", reach.hand_to_torso), ("handToHip", reach.hand_to_hip)):
            agg = aggregate(series, STATS)
            for stat in STATS:
                raw[f"{base}_{stat}"] = agg[stat]
        raw["closeHandPct"] = reach.close_hand_pct
        raw["fastAndClosePct"] = reach.fast_and_close_pct
        raw["fastAndCloseLongest"] = reach.fast_and_close_longest
        raw["postContactSepMean"] = reach.post_contact_sep_mean
    except NoValidJointPairs:
        pass  # sentinels below stand in for "no interaction observed"

    values: dict[str, float] = {}
    for name in schema.names:
        v = raw.get(name)
        values[name] = float(v) if v is not None else missing_sentinel(name)
    return FeatureVector(
        values=values,
        start_time=pair.start_time,
        end_time=pair.end_time,
        roles=(pair.aggressor.track_id, pair.victim.track_id),
    )


def extract_segment_both_orders(
    pair: PairSegment,
    schema: Optional[FeatureSchema] = None,
    params: FeatureParams = FeatureParams(),
) -> tuple[FeatureVector, FeatureVector]:
    """The segment's features under (A, B) and under the swapped roles."""
    return (
        extract_segment(pair, schema, params),
        extract_segment(pair.swapped(), schema, params),
    )


# ---------------------------------------------------------------------------
# CSV interchange

PathOrFile = Union[str, IO[str]]


def write_feature_csv(
    dest: PathOrFile, rows: Iterable[tuple[str, FeatureVector]], schema: FeatureSchema
) -> None:
    """Feature matrix CSV: segment_id column then schema columns, full precision."""
    if isinstance(dest, str):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_feature_csv(fh, rows, schema)
        return
    writer = csv.writer(dest)
    writer.writerow(["segment_id", *schema.names])
    for segment_id, vector in rows:
        writer.writerow([segment_id, *(repr(vector.values[n]) for n in schema.names)])


def read_feature_csv(source: PathOrFile) -> tuple[list[str], list[tuple[str, dict[str, float]]]]:
    """Parse a feature CSV back into (schema names, [(segment_id, values)])."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_feature_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if not header or header[0] != "segment_id":
        raise ValueError("feature CSV must start with a segment_id header column")
    names = [canonical_name(n) for n in header[1:]]
    rows = []
    for line in reader:
        if not line:
            continue
        rows.append((line[0], {n: float(v) for n, v in zip(names, line[1:])}))
    return names, rows
