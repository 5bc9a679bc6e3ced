"""Trajectory smoothing, scale normalization and aggressor/victim roles.

Joint trajectories are denoised with an exponential moving average
(x_smooth = alpha * x + (1 - alpha) * x_prev, initialized at the first
sample). All distances downstream are expressed in torso heights, the
shoulder-midpoint to hip-midpoint distance, so features are insensitive to
subject-camera distance. The aggressor role probability of each track comes
from its mean body-center translation, softmax-normalized over the tracks
in view: the person who moves more abruptly is the more likely aggressor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .types import (
    LEFT_HIP,
    LEFT_SHOULDER,
    RIGHT_HIP,
    RIGHT_SHOULDER,
    Keypoint,
    Skeleton,
    Track,
)

# Effective torso height never drops below this fraction of the bbox height,
# which keeps normalization finite for near-degenerate poses.
SCALE_FLOOR_FRACTION = 0.05

DEFAULT_ALPHA = 0.6


class InvalidAlpha(ValueError):
    """EMA coefficient outside the open interval (0, 1)."""


class EmptyTrack(ValueError):
    """Smoothing was asked for a track with no samples."""


class InsufficientHistory(ValueError):
    """No track has the two samples needed to estimate translation."""


@dataclass(frozen=True)
class SmoothingConfig:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise InvalidAlpha(f"alpha must be in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class RoleAssignment:
    track_id: str
    p_aggressor: float
    mean_translation: float  # torso-heights per second


def ema_step(prev: float, raw: float, alpha: float) -> float:
    """One update of the exponential moving average.

    An unchanged sample returns the state untouched; that is the exact
    fixed point of the recursion, which plain float arithmetic would miss
    by an ulp.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must be in (0, 1), got {alpha}")
    if raw == prev:
        return prev
    return alpha * raw + (1.0 - alpha) * prev


class SkeletonSmoother:
    """Streaming EMA over every joint coordinate and the bbox corners.

    Invalid keypoints (confidence below the validity threshold) do not
    update the filter state: the last smoothed position is carried forward
    and the output keypoint keeps its low confidence, so it stays flagged
    invalid. Until a joint has seen one valid sample its raw position is
    passed through unchanged.
    """

    def __init__(self, cfg: SmoothingConfig = SmoothingConfig()):
        self.alpha = cfg.alpha
        self._joints: list[Optional[tuple[float, float]]] = [None] * 17
        self._bbox: Optional[tuple[float, float, float, float]] = None

    def step(self, skel: Skeleton) -> Skeleton:
        a = self.alpha

        def update(prev: float, raw: float) -> float:
            if raw == prev:
                return prev
            return a * raw + (1.0 - a) * prev

        out = []
        for j, kp in enumerate(skel.keypoints):
            state = self._joints[j]
            if kp.is_valid():
                if state is None:
                    state = (kp.x, kp.y)
                else:
                    state = (update(state[0], kp.x), update(state[1], kp.y))
                self._joints[j] = state
                out.append(Keypoint(state[0], state[1], kp.confidence))
            else:
                pos = state if state is not None else (kp.x, kp.y)
                out.append(Keypoint(pos[0], pos[1], kp.confidence))
        if self._bbox is None:
            self._bbox = skel.bbox
        else:
            self._bbox = tuple(
                update(prev, raw) for raw, prev in zip(skel.bbox, self._bbox)
            )
        return Skeleton(tuple(out), self._bbox)


def smooth_track(track: Track, cfg: SmoothingConfig = SmoothingConfig()) -> Track:
    """Return a copy of the track with the smoothed skeleton sequence filled."""
    if len(track) == 0:
        raise EmptyTrack(f"track {track.track_id} has no samples")
    smoother = SkeletonSmoother(cfg)
    smoothed = [smoother.step(skel) for _, skel in track.samples]
    return Track(
        track_id=track.track_id,
        samples=list(track.samples),
        smoothed=smoothed,
        positions=list(track.positions) if track.positions is not None else None,
    )


def _valid_midpoint(skel: Skeleton, left: int, right: int) -> Optional[tuple[float, float]]:
    a, b = skel.keypoints[left], skel.keypoints[right]
    a_ok, b_ok = a.is_valid(), b.is_valid()
    if a_ok and b_ok:
        return ((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
    if a_ok:
        return (a.x, a.y)
    if b_ok:
        return (b.x, b.y)
    return None


def torso_height(skel: Skeleton) -> Optional[float]:
    """Shoulder-midpoint to hip-midpoint distance, or None if unobservable.

    With exactly one valid shoulder (or hip) that point substitutes its
    midpoint.
    """
    shoulders = _valid_midpoint(skel, LEFT_SHOULDER, RIGHT_SHOULDER)
    hips = _valid_midpoint(skel, LEFT_HIP, RIGHT_HIP)
    if shoulders is None or hips is None:
        return None
    return math.sqrt((shoulders[0] - hips[0]) ** 2 + (shoulders[1] - hips[1]) ** 2)


def effective_torso_height(skel: Skeleton) -> Optional[float]:
    """Torso height clamped from below by the bbox-height scale floor."""
    th = torso_height(skel)
    if th is None:
        return None
    eff = max(th, SCALE_FLOOR_FRACTION * skel.bbox_height)
    if eff <= 0.0:
        return None
    return eff


def body_center(skel: Skeleton) -> Optional[tuple[float, float]]:
    """Mean of the valid shoulder and hip midpoints."""
    shoulders = _valid_midpoint(skel, LEFT_SHOULDER, RIGHT_SHOULDER)
    hips = _valid_midpoint(skel, LEFT_HIP, RIGHT_HIP)
    if shoulders is not None and hips is not None:
        return ((shoulders[0] + hips[0]) / 2.0, (shoulders[1] + hips[1]) / 2.0)
    if shoulders is not None:
        return shoulders
    if hips is not None:
        return hips
    return None


def mean_center_translation(track: Track, start: float, end: float) -> float:
    """Mean body-center speed (torso-heights/second) over [start, end].

    Uses the smoothed skeletons; sample pairs where the center or the
    torso scale is unobservable are skipped. Returns 0.0 when nothing is
    measurable.
    """
    skels = track.smoothed if track.smoothed is not None else [s for _, s in track.samples]
    times = track.timestamps
    speeds = []
    prev_center = None
    prev_t = None
    for t, skel in zip(times, skels):
        if t < start or t > end:
            continue
        center = body_center(skel)
        th = effective_torso_height(skel)
        if center is None:
            prev_center, prev_t = None, None
            continue
        if prev_center is not None and th is not None and t > prev_t:
            d = math.sqrt((center[0] - prev_center[0]) ** 2 + (center[1] - prev_center[1]) ** 2)
            speeds.append(d / (t - prev_t) / th)
        prev_center, prev_t = center, t
    if not speeds:
        return 0.0
    return sum(speeds) / len(speeds)


def softmax(scores: Sequence[float]) -> list[float]:
    """Temperature-1 softmax, stabilized by subtracting the max score."""
    m = max(scores)
    exps = [math.exp(s - m) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


def aggressor_probabilities(
    tracks: Sequence[Track], window: float, end_time: Optional[float] = None
) -> list[RoleAssignment]:
    """Softmax role scores over the candidate tracks (temperature 1).

    ``window`` is the span of history (seconds) considered, ending at
    ``end_time`` (defaults to the latest timestamp across the tracks).
    """
    if not tracks:
        raise InsufficientHistory("no tracks given")
    if end_time is None:
        end_time = max(t.samples[-1][0] for t in tracks if len(t) > 0)
    start_time = end_time - window

    usable = [
        sum(1 for t in track.timestamps if start_time <= t <= end_time) >= 2 for track in tracks
    ]
    if not any(usable):
        raise InsufficientHistory("no track has two samples inside the window")

    scores = [
        mean_center_translation(track, start_time, end_time) if ok else 0.0
        for track, ok in zip(tracks, usable)
    ]
    probs = softmax(scores)
    return [
        RoleAssignment(track_id=track.track_id, p_aggressor=p, mean_translation=s)
        for track, p, s in zip(tracks, probs, scores)
    ]


def choose_aggressor(assignments: Sequence[RoleAssignment]) -> str:
    """Track id with the highest aggressor probability; ties go to the lower id."""

    def order_key(a: RoleAssignment) -> tuple:
        try:
            tid_key: tuple = tuple(int(p) for p in a.track_id.split("."))
        except ValueError:
            tid_key = (float("inf"), a.track_id)
        return (-a.p_aggressor, tid_key)

    return min(assignments, key=order_key).track_id
