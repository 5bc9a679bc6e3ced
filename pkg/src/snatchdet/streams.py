"""JSON Lines wire format for pose frame streams.

One frame per line:

    {"frame_index": 0, "timestamp_s": 0.0,
     "persons": [{"track_id": 1,
                  "keypoints": [[x, y, confidence] * 17],
                  "bbox": [x1, y1, x2, y2]}]}

``timestamp_s`` is optional; when absent it is synthesized as
``frame_index / fps``.
"""

from __future__ import annotations

import json
from typing import IO, Iterable, Iterator, Union

from .types import FrameRecord, Keypoint, MalformedRecord, Skeleton

PathOrFile = Union[str, IO[str]]


def frame_to_obj(record: FrameRecord) -> dict:
    return {
        "frame_index": record.frame_index,
        "timestamp_s": record.timestamp,
        "persons": [
            {
                "track_id": tid,
                "keypoints": [[kp.x, kp.y, kp.confidence] for kp in skel.keypoints],
                "bbox": list(skel.bbox),
            }
            for tid, skel in record.persons
        ],
    }


def obj_to_frame(obj: dict, fps: float = 30.0) -> FrameRecord:
    try:
        frame_index = obj["frame_index"]
        timestamp = obj.get("timestamp_s")
        if timestamp is None:
            timestamp = frame_index / fps
        persons = []
        for p in obj["persons"]:
            kps = tuple(Keypoint(float(x), float(y), float(c)) for x, y, c in p["keypoints"])
            if len(kps) != 17:
                raise MalformedRecord(f"expected 17 keypoints, got {len(kps)}")
            bbox = tuple(float(v) for v in p["bbox"])
            if len(bbox) != 4:
                raise MalformedRecord(f"bbox must have 4 values, got {len(bbox)}")
            persons.append((p["track_id"], Skeleton(kps, bbox)))
    except MalformedRecord:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"bad frame object: {exc}") from exc
    return FrameRecord(frame_index=frame_index, timestamp=float(timestamp), persons=tuple(persons))


def frame_to_line(record: FrameRecord) -> str:
    return json.dumps(frame_to_obj(record), separators=(",", ":"))


def line_to_frame(line: str, fps: float = 30.0) -> FrameRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON line: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("frame line must be a JSON object")
    return obj_to_frame(obj, fps=fps)


def write_stream(dest: PathOrFile, frames: Iterable[FrameRecord]) -> None:
    if isinstance(dest, str):
        with open(dest, "w", encoding="utf-8") as fh:
            write_stream(fh, frames)
        return
    for record in frames:
        dest.write(frame_to_line(record))
        dest.write("\n")


def iter_stream(source: PathOrFile, fps: float = 30.0) -> Iterator[FrameRecord]:
    """Yield frames one by one; skips blank lines, raises MalformedRecord."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            yield from iter_stream(fh, fps=fps)
        return
    for line in source:
        line = line.strip()
        if line:
            yield line_to_frame(line, fps=fps)


def read_stream(source: PathOrFile, fps: float = 30.0, validate: bool = True) -> list[FrameRecord]:
    frames = list(iter_stream(source, fps=fps))
    if validate:
        from .types import validate_stream

        frames = validate_stream(frames)
    return frames
