"""Skeleton, frame and track data model shared by the whole pipeline.

A skeleton is the standard 17-keypoint COCO layout:
nose=0, eyes=1,2, ears=3,4, shoulders=5,6, elbows=7,8, wrists=9,10,
hips=11,12, knees=13,14, ankles=15,16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

NUM_KEYPOINTS = 17

# COCO joint indices used downstream.
NOSE = 0
LEFT_EYE, RIGHT_EYE = 1, 2
LEFT_EAR, RIGHT_EAR = 3, 4
LEFT_SHOULDER, RIGHT_SHOULDER = 5, 6
LEFT_ELBOW, RIGHT_ELBOW = 7, 8
LEFT_WRIST, RIGHT_WRIST = 9, 10
LEFT_HIP, RIGHT_HIP = 11, 12
LEFT_KNEE, RIGHT_KNEE = 13, 14
LEFT_ANKLE, RIGHT_ANKLE = 15, 16

# A keypoint below this confidence carries no positional meaning.
VALID_CONFIDENCE = 0.3

# Confidences this close to [0, 1] are clamped instead of rejected.
_CONF_SLACK = 1e-9


class MalformedRecord(ValueError):
    """Raised when a raw frame record violates the data model."""


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    confidence: float

    def is_valid(self, threshold: float = VALID_CONFIDENCE) -> bool:
        return self.confidence >= threshold

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Skeleton:
    """One person's pose for one frame: 17 keypoints plus a bounding box."""

    keypoints: tuple[Keypoint, ...]
    bbox: tuple[float, float, float, float]  # x1, y1, x2, y2

    def __post_init__(self) -> None:
        if len(self.keypoints) != NUM_KEYPOINTS:
            raise MalformedRecord(
                f"skeleton must have {NUM_KEYPOINTS} keypoints, got {len(self.keypoints)}"
            )

    def keypoint(self, index: int) -> Keypoint:
        return self.keypoints[index]

    @property
    def bbox_height(self) -> float:
        return self.bbox[3] - self.bbox[1]

    @property
    def bbox_area(self) -> float:
        return (self.bbox[2] - self.bbox[0]) * (self.bbox[3] - self.bbox[1])


@dataclass(frozen=True)
class FrameRecord:
    """All detected persons of one video frame."""

    frame_index: int
    timestamp: float
    persons: tuple[tuple[int, Skeleton], ...]

    def track_ids(self) -> list[int]:
        return [tid for tid, _ in self.persons]


@dataclass
class Track:
    """Time-ordered samples of one person identity.

    ``smoothed`` is filled by the preprocess stage and runs parallel to
    ``samples``. ``positions`` records each sample's frame position in the
    source stream (used for window slicing).
    """

    track_id: str
    samples: list[tuple[float, Skeleton]] = field(default_factory=list)
    smoothed: Optional[list[Skeleton]] = None
    positions: Optional[list[int]] = None

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def timestamps(self) -> list[float]:
        return [t for t, _ in self.samples]

    def sort_key(self) -> tuple:
        # "1.2" sorts after "1" but before "2"; plain numeric ids sort numerically.
        try:
            return tuple(int(p) for p in self.track_id.split("."))
        except ValueError:
            return (float("inf"), self.track_id)


@dataclass(frozen=True)
class PairSegment:
    """A pair of time-aligned track slices for one classification window.

    ``aggressor`` plays role A and ``victim`` role B in all interaction
    features; both slices hold samples at identical timestamps.
    """

    aggressor: Track
    victim: Track
    start_time: float
    end_time: float
    fps: float

    def __post_init__(self) -> None:
        if self.end_time <= self.start_time:
            raise ValueError("segment end must be after start")
        if self.aggressor.timestamps != self.victim.timestamps:
            raise ValueError("pair tracks must be aligned on identical timestamps")

    def __len__(self) -> int:
        return len(self.aggressor)

    def swapped(self) -> "PairSegment":
        return PairSegment(
            aggressor=self.victim,
            victim=self.aggressor,
            start_time=self.start_time,
            end_time=self.end_time,
            fps=self.fps,
        )


def _check_finite(value: float, what: str) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise MalformedRecord(f"{what} must be a finite number, got {value!r}")


def _clamp_confidence(c: float) -> float:
    if -_CONF_SLACK <= c < 0.0:
        return 0.0
    if 1.0 < c <= 1.0 + _CONF_SLACK:
        return 1.0
    return c


def validate_frame(record: FrameRecord, prev_timestamp: Optional[float] = None) -> FrameRecord:
    """Check every invariant of a frame record.

    Returns the record (with confidences clamped when they sit within 1e-9
    of the [0, 1] bounds) or raises MalformedRecord. When ``prev_timestamp``
    is given, the record's timestamp must be strictly greater.
    """
    if not isinstance(record.frame_index, int) or record.frame_index < 0:
        raise MalformedRecord(f"frame_index must be a nonnegative integer, got {record.frame_index!r}")
    _check_finite(record.timestamp, "timestamp")
    if prev_timestamp is not None and record.timestamp <= prev_timestamp:
        raise MalformedRecord(
            f"timestamps must strictly increase ({record.timestamp} after {prev_timestamp})"
        )

    seen_ids: set[int] = set()
    new_persons = []
    changed = False
    for tid, skel in record.persons:
        if not isinstance(tid, int) or isinstance(tid, bool):
            raise MalformedRecord(f"track_id must be an integer, got {tid!r}")
        if tid in seen_ids:
            raise MalformedRecord(f"duplicate track_id {tid} within one frame")
        seen_ids.add(tid)

        if len(skel.keypoints) != NUM_KEYPOINTS:
            raise MalformedRecord(
                f"skeleton must have {NUM_KEYPOINTS} keypoints, got {len(skel.keypoints)}"
            )
        new_kps = []
        skel_changed = False
        for i, kp in enumerate(skel.keypoints):
            _check_finite(kp.x, f"keypoint {i} x")
            _check_finite(kp.y, f"keypoint {i} y")
            _check_finite(kp.confidence, f"keypoint {i} confidence")
            conf = _clamp_confidence(kp.confidence)
            if not 0.0 <= conf <= 1.0:
                raise MalformedRecord(f"keypoint {i} confidence {kp.confidence} outside [0, 1]")
            if conf != kp.confidence:
                kp = Keypoint(kp.x, kp.y, conf)
                skel_changed = True
            new_kps.append(kp)

        x1, y1, x2, y2 = skel.bbox
        for name, v in zip(("x1", "y1", "x2", "y2"), skel.bbox):
            _check_finite(v, f"bbox {name}")
        if x1 > x2 or y1 > y2:
            raise MalformedRecord(f"bbox corners out of order: {skel.bbox}")

        if skel_changed:
            skel = Skeleton(tuple(new_kps), skel.bbox)
            changed = True
        new_persons.append((tid, skel))

    if changed:
        return replace(record, persons=tuple(new_persons))
    return record


def validate_stream(frames: Iterable[FrameRecord]) -> list[FrameRecord]:
    """Validate a whole stream, enforcing strictly increasing timestamps."""
    out: list[FrameRecord] = []
    prev: Optional[float] = None
    for record in frames:
        out.append(validate_frame(record, prev_timestamp=prev))
        prev = record.timestamp
    return out


def build_tracks(frames: Sequence[FrameRecord], max_gap: int = 15) -> list[Track]:
    """Group per-frame detections into tracks by their upstream ids.

    Identity continuity is delegated to the ingestion source; this only
    splits an id when it disappears for more than ``max_gap`` frames, in
    which case the reappearance starts a fresh track named ``"<id>.<n>"``.
    """
    tracks: list[Track] = []
    # raw id -> (current track, last frame position, number of splits so far)
    active: dict[int, tuple[Track, int, int]] = {}
    for pos, record in enumerate(frames):
        for tid, skel in record.persons:
            entry = active.get(tid)
            if entry is None:
                track = Track(track_id=str(tid))
                tracks.append(track)
                splits = 0
            else:
                track, last_pos, splits = entry
                if pos - last_pos > max_gap:
                    splits += 1
                    track = Track(track_id=f"{tid}.{splits}")
                    tracks.append(track)
            track.samples.append((record.timestamp, skel))
            if track.positions is None:
                track.positions = []
            track.positions.append(pos)
            active[tid] = (track, pos, splits)
    return tracks
