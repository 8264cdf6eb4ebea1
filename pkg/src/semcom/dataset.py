"""Annotated surveillance clips and the labeled request corpus.

Ground-truth annotations stand in for pixels: the toolbox executors read them
as if they were detector outputs. Frame payloads are pseudorandom bytes of
the declared size, derived from ``(clip_id, frame_id, size_bytes)``.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, NamedTuple, Optional

from .vocab import (
    OBJECT_LABELS,
    TRAFFIC_SIGNS,
    VEHICLE_COLORS,
    VEHICLE_OBJECT_CLASS,
    VEHICLE_TYPES,
)


class ValidationError(ValueError):
    """Raised with every violation found, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class BBox(NamedTuple):
    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h


class DetectedObject(NamedTuple):
    label: str
    confidence: float
    bbox: BBox


class Vehicle(NamedTuple):
    track_id: int
    color: str
    vtype: str
    bbox: BBox


class Sign(NamedTuple):
    confidence: float
    name: str


@dataclass(frozen=True)
class FrameAnnotation:
    frame_id: int
    size_bytes: int
    objects: tuple[DetectedObject, ...] = ()
    vehicles: tuple[Vehicle, ...] = ()
    plates: tuple[tuple[str, ...], ...] = ()
    signs: tuple[Sign, ...] = ()
    lane_count: int = 0


@dataclass(frozen=True)
class AnnotatedClip:
    clip_id: str
    fps: float
    frame_count: int
    compressed_size_bytes: int
    road_area_px: float
    frames: tuple[FrameAnnotation, ...]

    @property
    def duration_s(self) -> float:
        return self.frame_count / self.fps

    @property
    def total_frame_bytes(self) -> int:
        return sum(f.size_bytes for f in self.frames)

    def frame(self, frame_id: int) -> FrameAnnotation:
        if isinstance(frame_id, bool) or not isinstance(frame_id, int) or not 0 <= frame_id < self.frame_count:
            raise KeyError(f"clip {self.clip_id!r} has no frame {frame_id!r}")
        return self.frames[frame_id]

    def payload(self, frame_id: int) -> bytes:
        return frame_payload(self.clip_id, frame_id, self.frame(frame_id).size_bytes)


@dataclass(frozen=True)
class RequestRecord:
    request_id: str
    clip_id: str
    text: str
    label: str
    expected_tool: Optional[str] = None
    # Inclusive [start, end] frame span the answer lives in, when known.
    relevant_span: Optional[tuple[int, int]] = None


def frame_payload(clip_id: str, frame_id: int, size_bytes: int) -> bytes:
    seed = f"{clip_id}:{frame_id}".encode("utf-8")
    return hashlib.shake_256(seed).digest(size_bytes)


# --- clip (de)serialization ------------------------------------------------

_VTYPES = frozenset(VEHICLE_TYPES)
_COLORS = frozenset(VEHICLE_COLORS)
_SIGNS = frozenset(TRAFFIC_SIGNS)
_OBJECTS = frozenset(OBJECT_LABELS)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_num(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _bbox(raw: Any, where: str, errors: list[str]) -> Optional[BBox]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4 or not all(_is_num(v) for v in raw):
        errors.append(f"{where}: bbox must be [x, y, w, h]")
        return None
    box = BBox(*raw)
    if box.w <= 0 or box.h <= 0:
        errors.append(f"{where}: bbox width and height must be positive")
    return box


def _confidence(raw: Any, where: str, errors: list[str]) -> None:
    if not _is_num(raw) or not 0.0 <= raw <= 1.0:
        errors.append(f"{where}: confidence {raw!r} outside [0, 1]")


def _parse_frame(i: int, raw: Any, errors: list[str]) -> Optional[FrameAnnotation]:
    where = f"frame {i}"
    if not isinstance(raw, dict):
        errors.append(f"{where}: not an object")
        return None
    missing = [name for name in ("frame_id", "size_bytes") if name not in raw]
    if missing:
        errors.extend(f"{where}: missing field {name!r}" for name in missing)
        return None
    if not _is_int(raw["frame_id"]) or raw["frame_id"] != i:
        errors.append(f"{where}: frame_id is {raw['frame_id']!r}, expected {i}")
    if not _is_int(raw["size_bytes"]) or raw["size_bytes"] <= 0:
        errors.append(f"{where}: size_bytes must be a positive integer")

    objects = []
    for j, obj in enumerate(raw.get("objects", [])):
        at = f"{where} object {j}"
        if not isinstance(obj, dict) or not {"label", "confidence", "bbox"} <= obj.keys():
            errors.append(f"{at}: needs label, confidence, bbox")
            continue
        if obj["label"] not in _OBJECTS:
            errors.append(f"{at}: unknown object label {obj['label']!r}")
        _confidence(obj["confidence"], at, errors)
        box = _bbox(obj["bbox"], at, errors)
        objects.append(DetectedObject(obj["label"], obj["confidence"], box))

    vehicles = []
    for j, veh in enumerate(raw.get("vehicles", [])):
        at = f"{where} vehicle {j}"
        if not isinstance(veh, dict) or not {"track_id", "color", "vtype", "bbox"} <= veh.keys():
            errors.append(f"{at}: needs track_id, color, vtype, bbox")
            continue
        if not _is_int(veh["track_id"]) or veh["track_id"] < 0:
            errors.append(f"{at}: track_id must be a non-negative integer")
        if veh["vtype"] not in _VTYPES:
            errors.append(f"{at}: unknown vehicle type {veh['vtype']!r}")
        if veh["color"] not in _COLORS:
            errors.append(f"{at}: unknown vehicle color {veh['color']!r}")
        box = _bbox(veh["bbox"], at, errors)
        vehicles.append(Vehicle(veh["track_id"], veh["color"], veh["vtype"], box))

    plates = []
    for j, plate in enumerate(raw.get("plates", [])):
        if not isinstance(plate, list) or not all(isinstance(c, str) and len(c) == 1 for c in plate):
            errors.append(f"{where} plate {j}: must be a list of single characters")
            continue
        plates.append(tuple(plate))

    signs = []
    for j, sign in enumerate(raw.get("signs", [])):
        at = f"{where} sign {j}"
        if not isinstance(sign, dict) or not {"confidence", "name"} <= sign.keys():
            errors.append(f"{at}: needs confidence, name")
            continue
        if sign["name"] not in _SIGNS:
            errors.append(f"{at}: unknown traffic sign {sign['name']!r}")
        _confidence(sign["confidence"], at, errors)
        signs.append(Sign(sign["confidence"], sign["name"]))

    lane_count = raw.get("lane_count", 0)
    if not _is_int(lane_count) or lane_count < 0:
        errors.append(f"{where}: lane_count must be a non-negative integer")

    return FrameAnnotation(
        frame_id=raw["frame_id"],
        size_bytes=raw["size_bytes"],
        objects=tuple(objects),
        vehicles=tuple(vehicles),
        plates=tuple(plates),
        signs=tuple(signs),
        lane_count=lane_count,
    )


def clip_from_dict(doc: Any) -> AnnotatedClip:
    """Validate a clip document, collecting every violation before raising."""
    if not isinstance(doc, dict):
        raise ValidationError(["clip document must be a JSON object"])
    errors: list[str] = []
    required = ("clip_id", "fps", "frame_count", "compressed_size_bytes", "road_area_px", "frames")
    missing = [name for name in required if name not in doc]
    if missing:
        raise ValidationError([f"missing field {name!r}" for name in missing])

    if not isinstance(doc["clip_id"], str) or not doc["clip_id"]:
        errors.append("clip_id must be a non-empty string")
    if not _is_num(doc["fps"]) or doc["fps"] <= 0:
        errors.append("fps must be positive")
    if not _is_int(doc["frame_count"]) or doc["frame_count"] <= 0:
        errors.append("frame_count must be a positive integer")
    if not _is_int(doc["compressed_size_bytes"]) or doc["compressed_size_bytes"] <= 0:
        errors.append("compressed_size_bytes must be a positive integer")
    if not _is_num(doc["road_area_px"]) or doc["road_area_px"] <= 0:
        errors.append("road_area_px must be positive")
    raw_frames = doc["frames"]
    if not isinstance(raw_frames, list):
        raise ValidationError(errors + ["frames must be a list"])
    if _is_int(doc["frame_count"]) and len(raw_frames) != doc["frame_count"]:
        errors.append(f"frame_count is {doc['frame_count']} but {len(raw_frames)} frames given")

    frames = [_parse_frame(i, raw, errors) for i, raw in enumerate(raw_frames)]

    tracks: dict[int, tuple[str, str]] = {}
    for frame in frames:
        if frame is None:
            continue
        for veh in frame.vehicles:
            identity = (veh.color, veh.vtype)
            if tracks.setdefault(veh.track_id, identity) != identity:
                errors.append(f"frame {frame.frame_id}: track {veh.track_id} changes color or type")
    if not errors:
        total = sum(f.size_bytes for f in frames)
        if total < doc["compressed_size_bytes"]:
            errors.append(
                f"sum of frame sizes {total} is below compressed_size_bytes {doc['compressed_size_bytes']}"
            )
    if errors:
        raise ValidationError(errors)
    return AnnotatedClip(
        clip_id=doc["clip_id"],
        fps=doc["fps"],
        frame_count=doc["frame_count"],
        compressed_size_bytes=doc["compressed_size_bytes"],
        road_area_px=doc["road_area_px"],
        frames=tuple(frames),
    )


def clip_to_dict(clip: AnnotatedClip) -> dict:
    frames = []
    for f in clip.frames:
        frames.append(
            {
                "frame_id": f.frame_id,
                "size_bytes": f.size_bytes,
                "objects": [
                    {"label": o.label, "confidence": o.confidence, "bbox": list(o.bbox)} for o in f.objects
                ],
                "vehicles": [
                    {"track_id": v.track_id, "color": v.color, "vtype": v.vtype, "bbox": list(v.bbox)}
                    for v in f.vehicles
                ],
                "plates": [list(p) for p in f.plates],
                "signs": [{"confidence": s.confidence, "name": s.name} for s in f.signs],
                "lane_count": f.lane_count,
            }
        )
    return {
        "clip_id": clip.clip_id,
        "fps": clip.fps,
        "frame_count": clip.frame_count,
        "compressed_size_bytes": clip.compressed_size_bytes,
        "road_area_px": clip.road_area_px,
        "frames": frames,
    }


def dump_clip(clip: AnnotatedClip) -> str:
    return json.dumps(clip_to_dict(clip), sort_keys=True, separators=(",", ":"))


def write_clip(clip: AnnotatedClip, path: str | Path) -> None:
    Path(path).write_text(dump_clip(clip) + "\n", encoding="utf-8")


def load_clip(path: str | Path) -> AnnotatedClip:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError([f"{path}: not valid JSON ({exc})"]) from exc
    return clip_from_dict(doc)


def load_dataset(directory: str | Path) -> dict[str, AnnotatedClip]:
    """Load every ``*.json`` clip under ``directory`` keyed by clip id."""
    clips = {}
    for path in sorted(Path(directory).glob("*.json")):
        clip = load_clip(path)
        if clip.clip_id in clips:
            raise ValidationError([f"{path}: duplicate clip id {clip.clip_id!r}"])
        clips[clip.clip_id] = clip
    return clips


# --- request corpus --------------------------------------------------------

def record_from_dict(obj: Any) -> RequestRecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    for name in ("request_id", "clip_id", "text", "label"):
        if not isinstance(obj.get(name), str):
            raise ValueError(f"field {name!r} missing or not a string")
    if obj["label"] not in ("Y", "N"):
        raise ValueError(f"label must be Y or N, got {obj['label']!r}")
    if not obj["text"].strip():
        raise ValueError("text is empty")
    tool = obj.get("expected_tool")
    if tool is not None and not isinstance(tool, str):
        raise ValueError("expected_tool must be a string")
    span = obj.get("relevant_span")
    if span is not None:
        if not (isinstance(span, list) and len(span) == 2 and all(_is_int(v) for v in span) and span[0] <= span[1]):
            raise ValueError("relevant_span must be [start, end]")
        span = tuple(span)
    return RequestRecord(obj["request_id"], obj["clip_id"], obj["text"], obj["label"], tool, span)


def record_to_dict(record: RequestRecord) -> dict:
    out = asdict(record)
    if record.relevant_span is not None:
        out["relevant_span"] = list(record.relevant_span)
    return {k: v for k, v in out.items() if v is not None}


def load_request_corpus(path: str | Path) -> list[RequestRecord]:
    records: list[RequestRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = record_from_dict(json.loads(line))
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValidationError([f"line {lineno}: {exc}"]) from exc
            if record.request_id in seen:
                raise ValidationError([f"line {lineno}: duplicate request_id {record.request_id!r}"])
            seen.add(record.request_id)
            records.append(record)
    return records


def write_request_corpus(records: Iterable[RequestRecord], path: str | Path) -> None:
    lines = [json.dumps(record_to_dict(r), sort_keys=True) for r in records]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


# --- synthetic clips -------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters for :func:`generate_synthetic_clip`.

    ``vehicles`` counts vehicles that drive through the scene over the clip.
    ``stopped_vehicle`` is an inclusive frame span during which one extra
    vehicle sits still after approaching the camera. ``motorcycle_spans``
    are inclusive spans in which a motorcyclist is visible.
    """

    frames: int
    vehicles: int = 0
    clip_id: str = "synthetic"
    fps: float = 30.0
    stopped_vehicle: Optional[tuple[int, int]] = None
    motorcycle_spans: tuple[tuple[int, int], ...] = ()
    congestion: bool = False
    signs: tuple[str, ...] = ()
    lane_count: int = 3
    plates: bool = True
    pedestrians: int = 0
    road_area_px: float = 400_000.0
    mean_frame_bytes: int = 24_000
    compression_ratio: float = 0.45

    def validate(self) -> None:
        problems = []
        if self.frames <= 0:
            problems.append("frames must be positive")
        if self.vehicles < 0 or self.pedestrians < 0:
            problems.append("counts must be non-negative")
        if self.fps <= 0:
            problems.append("fps must be positive")
        if not 0 < self.compression_ratio <= 1:
            problems.append("compression_ratio must be in (0, 1]")
        if self.road_area_px <= 0 or self.mean_frame_bytes <= 0:
            problems.append("road area and frame size must be positive")
        spans = list(self.motorcycle_spans)
        if self.stopped_vehicle is not None:
            spans.append(self.stopped_vehicle)
        for start, end in spans:
            if not 0 <= start <= end < self.frames:
                problems.append(f"span ({start}, {end}) outside clip")
        unknown = [s for s in self.signs if s not in _SIGNS]
        if unknown:
            problems.append(f"unknown signs {unknown}")
        if problems:
            raise ValueError("; ".join(problems))


# Per-frame area growth of a vehicle driving towards the camera. Kept well
# above the default motion threshold over a 15-frame sampling stride.
_APPROACH_GROWTH = 1.03


def _plate(rng: random.Random) -> tuple[str, ...]:
    letters = "ABCDEFGHJKLMNPQRSTUVWXYZ"
    digits = "0123456789"
    return tuple(rng.choice(letters) for _ in range(2)) + tuple(rng.choice(digits) for _ in range(5))


def _r2(value: float) -> float:
    return round(value, 2)


class _Track:
    def __init__(self, track_id, color, vtype, start, end, x, y, w, h, growth, stop_at=None, plate=None):
        self.track_id = track_id
        self.color = color
        self.vtype = vtype
        self.start = start
        self.end = end
        self.x, self.y, self.w, self.h = x, y, w, h
        self.growth = growth
        self.stop_at = stop_at
        self.plate = plate

    def bbox(self, t: int) -> Optional[BBox]:
        if not self.start <= t <= self.end:
            return None
        steps = t - self.start
        if self.stop_at is not None:
            steps = min(steps, self.stop_at - self.start)
        scale = math.sqrt(self.growth) ** steps
        w, h = self.w * scale, self.h * scale
        return BBox(_r2(self.x - (w - self.w) / 2), _r2(self.y), _r2(w), _r2(h))


def generate_synthetic_clip(seed: int, spec: ScenarioSpec) -> AnnotatedClip:
    """Build a deterministic annotated clip for ``spec``."""
    spec.validate()
    rng = random.Random(f"{seed}:{spec.clip_id}")
    n = spec.frames
    tracks: list[_Track] = []
    next_id = 1

    def new_track(start, end, growth, w, h, stop_at=None):
        nonlocal next_id
        vtype = rng.choice(VEHICLE_TYPES)
        color = rng.choice(VEHICLE_COLORS)
        track = _Track(
            next_id, color, vtype, start, end,
            x=rng.uniform(100, 1100), y=rng.uniform(150, 500), w=w, h=h,
            growth=growth, stop_at=stop_at,
            plate=_plate(rng) if spec.plates else None,
        )
        next_id += 1
        tracks.append(track)
        return track

    for _ in range(spec.vehicles):
        if spec.congestion:
            # Dense queue: large boxes crawling forward across the whole clip.
            start = 0 if rng.random() < 0.7 else rng.randrange(n)
            new_track(start, n - 1, 1.0 + rng.uniform(0.0005, 0.002), rng.uniform(160, 240), rng.uniform(110, 160))
        else:
            life = min(n, rng.randint(40, 70))
            start = rng.randrange(max(1, n - life + 1))
            growth = _APPROACH_GROWTH if rng.random() < 0.5 else 1 / _APPROACH_GROWTH
            w, h = rng.uniform(40, 70), rng.uniform(28, 45)
            if growth < 1:
                w, h = w * 3, h * 3
            new_track(start, start + life - 1, growth, w, h)

    if spec.stopped_vehicle is not None:
        stop_start, stop_end = spec.stopped_vehicle
        approach = min(stop_start, 80)
        new_track(stop_start - approach, stop_end, _APPROACH_GROWTH, 30.0, 20.0, stop_at=stop_start)

    motorcycle_boxes = [
        (start, end, BBox(_r2(rng.uniform(200, 900)), _r2(rng.uniform(200, 450)), 40.0, 60.0))
        for start, end in spec.motorcycle_spans
    ]
    walkers = []
    for _ in range(spec.pedestrians):
        start = rng.randrange(n)
        walkers.append((start, min(n - 1, start + rng.randint(30, 120)), rng.uniform(50, 1200), rng.uniform(300, 600)))
    sign_conf = {name: _r2(rng.uniform(0.8, 0.99)) for name in spec.signs}

    sizes = [max(1, int(rng.gauss(spec.mean_frame_bytes, spec.mean_frame_bytes * 0.05))) for _ in range(n)]
    frames = []
    for t in range(n):
        vehicles, objects, plates = [], [], []
        for track in tracks:
            box = track.bbox(t)
            if box is None:
                continue
            vehicles.append(Vehicle(track.track_id, track.color, track.vtype, box))
            conf = _r2(0.75 + 0.24 * ((track.track_id * 7 + t) % 10) / 9)
            objects.append(DetectedObject(VEHICLE_OBJECT_CLASS[track.vtype], conf, box))
            if track.plate is not None and box.area >= 3000:
                plates.append(track.plate)
        for start, end, box in motorcycle_boxes:
            if start <= t <= end:
                objects.append(DetectedObject("motorcycle", 0.91, box))
                objects.append(DetectedObject("person", 0.88, BBox(box.x, _r2(box.y - 30), 30.0, 50.0)))
        for start, end, x, y in walkers:
            if start <= t <= end:
                objects.append(DetectedObject("person", 0.86, BBox(_r2(x + (t - start) * 0.8), _r2(y), 20.0, 45.0)))
        signs = tuple(Sign(sign_conf[name], name) for name in spec.signs)
        frames.append(
            FrameAnnotation(
                frame_id=t,
                size_bytes=sizes[t],
                objects=tuple(objects),
                vehicles=tuple(vehicles),
                plates=tuple(plates),
                signs=signs,
                lane_count=spec.lane_count,
            )
        )
    compressed = max(1, int(sum(sizes) * spec.compression_ratio))
    return AnnotatedClip(
        clip_id=spec.clip_id,
        fps=spec.fps,
        frame_count=n,
        compressed_size_bytes=compressed,
        road_area_px=spec.road_area_px,
        frames=tuple(frames),
    )
