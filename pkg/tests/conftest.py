"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from snatchdet.features import pair_segment
from snatchdet.preprocess import SmoothingConfig, smooth_track
from snatchdet.types import FrameRecord, Keypoint, Skeleton, Track

# Rough body-plan offsets (x, y) around the person center, in pixels.
_TEMPLATE = [
    (0.0, -75.0),   # nose
    (-4.0, -78.0), (4.0, -78.0),    # eyes
    (-8.0, -72.0), (8.0, -72.0),    # ears
    (-20.0, -50.0), (20.0, -50.0),  # shoulders
    (-26.0, -24.0), (26.0, -24.0),  # elbows
    (-28.0, 2.0), (28.0, 2.0),      # wrists
    (-13.0, 50.0), (13.0, 50.0),    # hips
    (-14.0, 95.0), (14.0, 95.0),    # knees
    (-15.0, 140.0), (15.0, 140.0),  # ankles
]


def random_skeleton(rng: np.random.Generator, center, jitter: float = 6.0, dropout: float = 0.1) -> Skeleton:
    kps = []
    for dx, dy in _TEMPLATE:
        x = center[0] + dx + float(rng.normal(0, jitter))
        y = center[1] + dy + float(rng.normal(0, jitter))
        if rng.random() < dropout:
            conf = float(rng.uniform(0.0, 0.29))
        else:
            conf = float(rng.uniform(0.35, 1.0))
        kps.append(Keypoint(x, y, conf))
    xs = [kp.x for kp in kps]
    ys = [kp.y for kp in kps]
    bbox = (min(xs) - 5.0, min(ys) - 5.0, max(xs) + 5.0, max(ys) + 5.0)
    return Skeleton(tuple(kps), bbox)


def random_track(
    rng: np.random.Generator,
    track_id: str,
    n_frames: int,
    fps: float = 10.0,
    start=(200.0, 200.0),
    step_sigma: float = 12.0,
    dropout: float = 0.1,
) -> Track:
    center = list(start)
    samples = []
    for i in range(n_frames):
        center[0] += float(rng.normal(0, step_sigma))
        center[1] += float(rng.normal(0, step_sigma))
        samples.append((i / fps, random_skeleton(rng, center, dropout=dropout)))
    return Track(track_id=track_id, samples=samples, positions=list(range(n_frames)))


def random_segment(
    rng: np.random.Generator,
    n_frames: int,
    fps: float = 10.0,
    dropout: float = 0.1,
    alpha: float = 0.6,
):
    a = smooth_track(random_track(rng, "1", n_frames, fps, (200.0, 220.0), dropout=dropout), SmoothingConfig(alpha))
    b = smooth_track(random_track(rng, "2", n_frames, fps, (340.0, 210.0), dropout=dropout), SmoothingConfig(alpha))
    return pair_segment(a, b, fps=fps)


def static_skeleton(center=(100.0, 100.0), conf: float = 0.9) -> Skeleton:
    kps = tuple(Keypoint(center[0] + dx, center[1] + dy, conf) for dx, dy in _TEMPLATE)
    xs = [kp.x for kp in kps]
    ys = [kp.y for kp in kps]
    return Skeleton(kps, (min(xs) - 5.0, min(ys) - 5.0, max(xs) + 5.0, max(ys) + 5.0))


def frame_of(index: int, t: float, persons) -> FrameRecord:
    return FrameRecord(frame_index=index, timestamp=t, persons=tuple(persons))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
