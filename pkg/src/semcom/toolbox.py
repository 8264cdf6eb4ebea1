"""The eight analysis tools: descriptors, label sets and executors.

Executors read clip annotations in place of running detection models. Every
executor is a pure function of ``(clip, frame_ids, params)``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Mapping, Sequence

from .dataset import AnnotatedClip
from .text import KeywordTables, default_tables, normalize_term
from .vocab import MOTION_LABELS, OBJECT_LABELS, TRAFFIC_SIGNS, VEHICLE_COLORS, VEHICLE_TYPES

OBJECT_DETECTION = "Object Detection"
VEHICLE_DETECTION = "Vehicle Detection"
LICENSE_PLATE_DETECTION = "License Plate Detection"
TRAFFIC_SIGN_DETECTION = "Traffic Sign Detection"
VEHICLE_MOTION_DETECTION = "Vehicle Motion Detection"
LANE_NUMBER_DETECTION = "Lane Number Detection"
TRAFFIC_FLOW_ESTIMATION = "Traffic Flow Estimation"
VEHICLE_DENSITY_ESTIMATION = "Vehicle Density Estimation"

DEFAULT_TAU = 1.15
MOVING = "moving"
NOT_MOVING = "not moving"


class ToolError(Exception):
    pass


class UnknownToolError(ToolError):
    pass


class UnknownFrameError(ToolError):
    pass


@dataclass(frozen=True)
class ToolDescriptor:
    index: int
    name: str
    can: tuple[str, ...]
    cannot: tuple[str, ...]
    output: str
    output_example: str
    labels: frozenset[str] = frozenset()
    keywords: frozenset[str] = frozenset()
    limitations: frozenset[str] = frozenset()
    # Labels that only hint at where to look (motion labels name events the
    # tool cannot itself recognise).
    proxy_labels: bool = False

    def describe(self) -> str:
        """Three-part text block (can / cannot / output) embedded in prompts."""
        lines = [f"Tool {self.index}: {self.name}"]
        can = "; ".join(f"{chr(97 + i)}) {s}" for i, s in enumerate(self.can))
        lines.append(f"1. The tool can {can}.")
        if self.cannot:
            cannot = "; ".join(f"{chr(97 + i)}) {s}" for i, s in enumerate(self.cannot))
            lines.append(f"2. The tool cannot {cannot}.")
        else:
            lines.append("2. No specific limitations are listed for this tool.")
        lines.append(f"3. Output: {self.output} Example output: {self.output_example}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "name": self.name,
            "can": list(self.can),
            "cannot": list(self.cannot),
            "output": self.output,
            "output_example": self.output_example,
            "labels": sorted(self.labels),
        }


_CLASS_LIST = ", ".join(OBJECT_LABELS)
_SIGN_LIST = ", ".join(TRAFFIC_SIGNS)

_DESCRIPTIONS: tuple[dict[str, Any], ...] = (
    dict(
        name=OBJECT_DETECTION,
        can=(
            f"find objects of 80 classes in individual frames: {_CLASS_LIST}",
            "analyse each frame on its own, without following objects from frame to frame",
        ),
        cannot=(
            "restrict detection to a named place in the scene, such as a crossroad or a stretch of road",
            "restrict detection to frames around an event, such as after an accident or a collision",
        ),
        output="For each frame, the detected object names with their confidence.",
        output_example="[(0.98, 'car'), (0.95, 'traffic light'), (0.89, 'traffic light'), (0.87, 'car'), (0.83, 'fire hydrant')]",
        labels=frozenset(OBJECT_LABELS),
    ),
    dict(
        name=VEHICLE_DETECTION,
        can=(
            f"classify vehicles into the types {', '.join(VEHICLE_TYPES)}",
            f"report vehicle colors among {', '.join(VEHICLE_COLORS)}",
            "analyse each frame on its own",
        ),
        cannot=(
            "follow vehicles over time or report what happens while they move",
            "restrict detection to a named place in the scene, such as a crossroad or a stretch of road",
            "restrict detection to frames around an event, such as after an accident or a collision",
        ),
        output="For each frame, the color and type of every detected vehicle.",
        output_example="1: [('Color: blue', 'Type: sedan'), ('Color: blue', 'Type: hatchback')], 2: [('Color: blue', 'Type: sedan')]",
        labels=frozenset(VEHICLE_TYPES),
    ),
    dict(
        name=LICENSE_PLATE_DETECTION,
        can=("read the license plates of vehicles, frame by frame",),
        cannot=(),
        output="For each frame, the characters of every readable plate.",
        output_example="1: ['C', 'J', 'X', 'S', 'G']",
    ),
    dict(
        name=TRAFFIC_SIGN_DETECTION,
        can=(f"recognise these traffic signs: {_SIGN_LIST}",),
        cannot=("recognise any other kind of sign", "tell where a sign is located"),
        output="For each frame, the recognised sign names with their confidence.",
        output_example="(0.95, 'Speed Limit 70'), (0.86, 'No Trucks')",
        labels=frozenset({"Traffic Sign"}),
    ),
    dict(
        name=VEHICLE_MOTION_DETECTION,
        can=(
            "decide whether each vehicle is moving: the box area of the same vehicle is measured in two "
            "selected frames and the vehicle counts as moving when the larger area exceeds the smaller by "
            "more than a fixed threshold ratio",
        ),
        cannot=(
            "restrict detection to a named place in the scene, such as a crossroad or a stretch of road",
            "restrict detection to frames around an event, such as after an accident or a collision",
        ),
        output="The motion state of every vehicle, either moving or not moving.",
        output_example="[not moving, moving, moving, not moving, moving]",
        labels=frozenset(MOTION_LABELS),
        proxy_labels=True,
    ),
    dict(
        name=LANE_NUMBER_DETECTION,
        can=("count the road lanes visible in the selected frames",),
        cannot=("distinguish lane marking styles such as solid lines, dashed lines or arrows",),
        output="The number of lanes.",
        output_example="number of lanes : [3]",
    ),
    dict(
        name=TRAFFIC_FLOW_ESTIMATION,
        can=("count how many distinct vehicles appear during a period of the video",),
        cannot=(
            "report the path or motion of vehicles",
            "restrict counting to a named place in the scene, such as a crossroad or a stretch of road",
        ),
        output="The total number of distinct vehicles.",
        output_example="Total vehicle number: 8",
    ),
    dict(
        name=VEHICLE_DENSITY_ESTIMATION,
        can=(
            "measure vehicle density in a frame as the share of the road area covered by vehicles",
            "indicate the traffic state, since high density means congestion or heavy traffic",
        ),
        cannot=("restrict measurement to a named place in the scene, such as a crossroad or a stretch of road",),
        output="A density between 0 and 1 per frame; higher means heavier traffic.",
        output_example="0.23",
    ),
)


def _joined(terms) -> frozenset[str]:
    return frozenset(" ".join(t) for t in terms if t)


def build_registry(tables: KeywordTables | None = None) -> tuple[ToolDescriptor, ...]:
    tables = default_tables() if tables is None else tables
    tools = []
    for index, desc in enumerate(_DESCRIPTIONS, 1):
        name = desc["name"]
        labels = desc.get("labels", frozenset())
        terms = set(tables.keywords.get(name, ()))
        if not desc.get("proxy_labels", False):
            terms |= {normalize_term(label, tables.aliases) for label in labels}
        tools.append(
            ToolDescriptor(
                index=index,
                keywords=_joined(terms),
                limitations=_joined(tables.cannot.get(name, ())),
                **desc,
            )
        )
    return tuple(tools)


@lru_cache(maxsize=None)
def _default_registry() -> tuple[ToolDescriptor, ...]:
    return build_registry()


def registry() -> list[ToolDescriptor]:
    """The bundled eight-tool registry in table order."""
    return list(_default_registry())


def tool_names(tools: Sequence[ToolDescriptor] | None = None) -> list[str]:
    return [t.name for t in (registry() if tools is None else tools)]


def get_tool(name: str, tools: Sequence[ToolDescriptor] | None = None) -> ToolDescriptor:
    for tool in registry() if tools is None else tools:
        if tool.name == name:
            return tool
    raise UnknownToolError(f"unknown tool {name!r}")


def render_toolbox(tools: Sequence[ToolDescriptor]) -> str:
    return "\n\n".join(t.describe() for t in tools)


# --- execution results -----------------------------------------------------

@dataclass(frozen=True)
class ExecutionResult:
    tool: str
    per_frame: Mapping[int, Any]
    summary: str
    details: Mapping[str, Any] = field(default_factory=dict)

    def matched_frame_ids(self, label: str) -> set[int]:
        """Frames whose findings contain ``label`` under this tool's semantics."""
        key = " ".join(normalize_term(label))
        if self.tool == OBJECT_DETECTION:
            return {
                fid for fid, found in self.per_frame.items()
                if any(" ".join(normalize_term(name)) == key for _, name in found)
            }
        if self.tool == VEHICLE_DETECTION:
            return {
                fid for fid, found in self.per_frame.items()
                if any(key in (" ".join(normalize_term(c)), " ".join(normalize_term(v))) for c, v in found)
            }
        if self.tool == TRAFFIC_SIGN_DETECTION:
            if key == "traffic sign":
                return {fid for fid, found in self.per_frame.items() if found}
            return {
                fid for fid, found in self.per_frame.items()
                if any(" ".join(normalize_term(name)) == key for _, name in found)
            }
        if self.tool == VEHICLE_MOTION_DETECTION and key in MOTION_LABELS:
            return {
                fid for fid, states in self.per_frame.items()
                if any(state == NOT_MOVING for state in states.values())
            }
        return set()


def _check_frames(clip: AnnotatedClip, frame_ids: Sequence[int]) -> list[int]:
    ids = sorted(set(frame_ids))
    for fid in ids:
        if isinstance(fid, bool) or not isinstance(fid, int) or not 0 <= fid < clip.frame_count:
            raise UnknownFrameError(f"clip {clip.clip_id!r} has no frame {fid!r}")
    return ids


def _lines(per_frame: Mapping[int, Any], render: Callable[[Any], str]) -> str:
    return "\n".join(f"{fid}: {render(found)}" for fid, found in per_frame.items())


def _pair(conf: float, name: str) -> str:
    return f"({conf}, {name!r})"


def run_object_detection(clip: AnnotatedClip, frame_ids: Sequence[int]) -> ExecutionResult:
    per_frame = {}
    for fid in _check_frames(clip, frame_ids):
        found = [(o.confidence, o.label) for o in clip.frames[fid].objects]
        found.sort(key=lambda item: -item[0])
        per_frame[fid] = found
    summary = _lines(per_frame, lambda found: "[" + ", ".join(_pair(c, n) for c, n in found) + "]")
    return ExecutionResult(OBJECT_DETECTION, per_frame, summary)


def _vehicle_detection(clip, ids):
    per_frame = {fid: [(v.color, v.vtype) for v in clip.frames[fid].vehicles] for fid in ids}

    def render(found):
        return "[" + ", ".join(f"({'Color: ' + c!r}, {'Type: ' + t!r})" for c, t in found) + "]"

    return ExecutionResult(VEHICLE_DETECTION, per_frame, _lines(per_frame, render))


def _plate_detection(clip, ids):
    per_frame = {fid: [list(p) for p in clip.frames[fid].plates] for fid in ids}

    def render(plates):
        return ", ".join(repr(p) for p in plates) if plates else "[]"

    return ExecutionResult(LICENSE_PLATE_DETECTION, per_frame, _lines(per_frame, render))


def _sign_detection(clip, ids):
    per_frame = {}
    for fid in ids:
        found = [(s.confidence, s.name) for s in clip.frames[fid].signs]
        found.sort(key=lambda item: -item[0])
        per_frame[fid] = found

    def render(found):
        return ", ".join(_pair(c, n) for c, n in found) if found else "[]"

    return ExecutionResult(TRAFFIC_SIGN_DETECTION, per_frame, _lines(per_frame, render))


def _lane_detection(clip, ids):
    per_frame = {fid: clip.frames[fid].lane_count for fid in ids}
    distinct = list(dict.fromkeys(per_frame.values()))
    summary = f"number of lanes : [{', '.join(str(c) for c in distinct)}]"
    return ExecutionResult(LANE_NUMBER_DETECTION, per_frame, summary, {"lane_counts": distinct})


_LOOKUPS = {
    VEHICLE_DETECTION: _vehicle_detection,
    LICENSE_PLATE_DETECTION: _plate_detection,
    TRAFFIC_SIGN_DETECTION: _sign_detection,
    LANE_NUMBER_DETECTION: _lane_detection,
}


def run_annotation_lookup(tool: str, clip: AnnotatedClip, frame_ids: Sequence[int]) -> ExecutionResult:
    try:
        runner = _LOOKUPS[tool]
    except KeyError:
        raise UnknownToolError(f"{tool!r} is not an annotation lookup tool") from None
    return runner(clip, _check_frames(clip, frame_ids))


def motion_state(area_a: float, area_b: float, tau: float = DEFAULT_TAU) -> str:
    ratio = max(area_a, area_b) / min(area_a, area_b)
    return MOVING if ratio > tau else NOT_MOVING


def run_vehicle_motion_detection(
    clip: AnnotatedClip, frame_ids: Sequence[int], tau: float = DEFAULT_TAU
) -> ExecutionResult:
    """Classify tracks as moving from the change in their box area.

    The summary compares each track's area in the first and last selected
    frames; tracks missing from either endpoint entered or left the scene
    and count as moving. Per-frame findings compare each track with its
    nearest earlier selected frame (or the next one, for its first sighting)
    so frames can be searched for stationary vehicles.
    """
    if tau <= 1:
        raise ToolError(f"motion threshold must exceed 1, got {tau}")
    ids = _check_frames(clip, frame_ids)
    if len(ids) < 2:
        raise ToolError("vehicle motion detection needs at least two frames")

    areas: dict[int, dict[int, float]] = {}
    for fid in ids:
        for v in clip.frames[fid].vehicles:
            areas.setdefault(v.track_id, {})[fid] = v.bbox.area

    first, last = ids[0], ids[-1]
    track_states = {}
    for track_id in sorted(areas):
        seen = areas[track_id]
        if first in seen and last in seen:
            track_states[track_id] = motion_state(seen[first], seen[last], tau)
        else:
            track_states[track_id] = MOVING

    per_frame: dict[int, dict[int, str]] = {}
    for fid in ids:
        states = {}
        for v in clip.frames[fid].vehicles:
            sightings = sorted(areas[v.track_id])
            pos = sightings.index(fid)
            if pos > 0:
                other = sightings[pos - 1]
            elif len(sightings) > 1:
                other = sightings[1]
            else:
                states[v.track_id] = MOVING
                continue
            states[v.track_id] = motion_state(areas[v.track_id][other], v.bbox.area, tau)
        per_frame[fid] = states
    summary = "[" + ", ".join(track_states.values()) + "]"
    return ExecutionResult(VEHICLE_MOTION_DETECTION, per_frame, summary, {"track_states": track_states})


def run_traffic_flow_estimation(clip: AnnotatedClip, frame_ids: Sequence[int]) -> ExecutionResult:
    ids = _check_frames(clip, frame_ids)
    if not ids:
        raise ToolError("traffic flow estimation needs at least one frame")
    per_frame = {fid: sorted({v.track_id for v in clip.frames[fid].vehicles}) for fid in ids}
    total = len(set().union(*map(set, per_frame.values())))
    return ExecutionResult(
        TRAFFIC_FLOW_ESTIMATION, per_frame, f"Total vehicle number: {total}", {"total": total}
    )


def vehicle_density(clip: AnnotatedClip, frame_id: int) -> float:
    covered = sum(v.bbox.area for v in clip.frames[frame_id].vehicles)
    return round(min(1.0, covered / clip.road_area_px), 2)


def run_vehicle_density_estimation(clip: AnnotatedClip, frame_ids: Sequence[int]) -> ExecutionResult:
    per_frame = {fid: vehicle_density(clip, fid) for fid in _check_frames(clip, frame_ids)}
    return ExecutionResult(VEHICLE_DENSITY_ESTIMATION, per_frame, _lines(per_frame, str))


def execute(
    tool: str, clip: AnnotatedClip, frame_ids: Sequence[int], tau: float = DEFAULT_TAU
) -> ExecutionResult:
    """Run the named tool over ``frame_ids`` of ``clip``."""
    if tool == OBJECT_DETECTION:
        return run_object_detection(clip, frame_ids)
    if tool == VEHICLE_MOTION_DETECTION:
        return run_vehicle_motion_detection(clip, frame_ids, tau)
    if tool == TRAFFIC_FLOW_ESTIMATION:
        return run_traffic_flow_estimation(clip, frame_ids)
    if tool == VEHICLE_DENSITY_ESTIMATION:
        return run_vehicle_density_estimation(clip, frame_ids)
    return run_annotation_lookup(tool, clip, frame_ids)


def label_index(tools: Sequence[ToolDescriptor]) -> dict[tuple[str, ...], tuple[str, str]]:
    """Normalized label -> (tool name, label), first tool in table order wins."""
    index: dict[tuple[str, ...], tuple[str, str]] = {}
    for tool in sorted(tools, key=lambda t: t.index):
        for label in sorted(tool.labels):
            index.setdefault(normalize_term(label), (tool.name, label))
    return index


def label_counts(per_frame: Mapping[int, Sequence[tuple[float, str]]]) -> Counter:
    return Counter(name for found in per_frame.values() for _, name in found)
