"""Three-step task planning: Video Sampler -> Tool Selection -> Analysis."""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from string import Template
from typing import Optional, Protocol, Sequence

from . import toolbox as tb
from .llm_backend import Backend
from .text import find_terms, load_template, normalize_term, tokenize
from .toolbox import ExecutionResult, ToolDescriptor

logger = logging.getLogger(__name__)

VIDEO_SAMPLER = "Video Sampler"
ANALYSIS = "Analysis"
PLAN_EXAMPLE = "Video Sampler | Vehicle Density Estimation | Analysis"
DEFAULT_SAMPLES_PER_SECOND = 2.0
DEFAULT_JAM_THRESHOLD = 0.5
FULFILL_PREFIX = "I can fulfill your request on the semantic information directly."


class PlanError(Exception):
    pass


class PlanParseError(PlanError):
    pass


class UnknownToolInPlan(PlanParseError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"plan names unregistered tool {name!r}")


class ExcludedToolError(PlanError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"plan reuses excluded tool {name!r}")


class ToolboxExhausted(PlanError):
    pass


class ClipMeta(Protocol):
    fps: float
    frame_count: int


@dataclass(frozen=True)
class VideoInfo:
    fps: float
    frame_count: int


@dataclass(frozen=True)
class TaskPlan:
    tool: str
    sampled_frames: Optional[tuple[int, ...]] = None

    @property
    def steps(self) -> tuple[str, str, str]:
        return (VIDEO_SAMPLER, self.tool, ANALYSIS)

    @property
    def raw(self) -> str:
        return " | ".join(self.steps)


@dataclass(frozen=True)
class PlannerContext:
    request: str
    clip_meta: ClipMeta
    excluded_tools: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "excluded_tools", frozenset(self.excluded_tools))

    def validate(self, tools: Sequence[ToolDescriptor]) -> None:
        unknown = self.excluded_tools - {t.name for t in tools}
        if unknown:
            raise PlanError(f"excluded tools not in toolbox: {sorted(unknown)}")

    def available(self, tools: Sequence[ToolDescriptor]) -> list[ToolDescriptor]:
        return [t for t in sorted(tools, key=lambda t: t.index) if t.name not in self.excluded_tools]


# --- Video Sampler -----------------------------------------------------------

_NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6, "seven": 7,
    "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12, "fifteen": 15,
    "twenty": 20, "thirty": 30,
}
_NUM = r"(\d+(?:\.\d+)?|" + "|".join(_NUMBER_WORDS) + r")"
_EDGE = re.compile(r"\b(first|last|final|opening|beginning)\s+(?:" + _NUM + r"\s+)?seconds?\b")
_AT = re.compile(r"\bat\s+(?:the\s+)?(?:second\s+(\d+)|(\d+)(?:st|nd|rd|th)?\s+seconds?)\b")
_RANGE = re.compile(r"\b(?:between|from)\s+(?:second\s+)?" + _NUM + r"\s*(?:s|seconds?)?\s+(?:and|to)\s+" + _NUM + r"\s*(?:s|seconds?)\b")


def _number(text: Optional[str]) -> float:
    if text is None:
        return 1.0
    return float(_NUMBER_WORDS.get(text, text))


@dataclass(frozen=True)
class TemporalWindow:
    start: int
    end: int  # exclusive
    fallback: bool = False


def temporal_window(request: str, clip_meta: ClipMeta) -> TemporalWindow:
    """Frame window named by a temporal cue in ``request`` (whole clip if none).

    A cue reaching outside the clip falls back to the whole clip with
    ``fallback`` set.
    """
    n, fps = clip_meta.frame_count, clip_meta.fps
    text = request.lower()
    window = None
    if m := _RANGE.search(text):
        a, b = sorted((_number(m.group(1)), _number(m.group(2))))
        window = (int(math.floor(a * fps)), int(math.ceil(b * fps)))
    elif m := _AT.search(text):
        s = float(m.group(1) or m.group(2))
        window = (int(math.floor(s * fps)), int(math.ceil((s + 1) * fps)))
    elif m := _EDGE.search(text):
        span = int(math.ceil(_number(m.group(2)) * fps))
        window = (0, span) if m.group(1) in ("first", "opening", "beginning") else (n - span, n)
    if window is None:
        return TemporalWindow(0, n)
    start, end = window
    if start < 0 or end > n or start >= end:
        logger.warning("temporal cue in %r falls outside the %d-frame clip; using the whole clip", request, n)
        return TemporalWindow(0, n, fallback=True)
    return TemporalWindow(start, end)


def sample_frames(
    request: str, clip_meta: ClipMeta, samples_per_second: float = DEFAULT_SAMPLES_PER_SECOND
) -> list[int]:
    window = temporal_window(request, clip_meta)
    stride = max(1, math.floor(clip_meta.fps / samples_per_second))
    return list(range(window.start, window.end, stride))


# --- planning ------------------------------------------------------------------

def render_planning_prompt(ctx: PlannerContext, tools: Sequence[ToolDescriptor]) -> str:
    available = ctx.available(tools)
    if not available:
        raise ToolboxExhausted("every tool in the toolbox has already been tried")
    meta = ctx.clip_meta
    return Template(load_template("planning_prompt.txt")).substitute(
        request=ctx.request,
        frame_count=meta.frame_count,
        fps=f"{meta.fps:g}",
        duration=f"{meta.frame_count / meta.fps:.1f}",
        toolbox=tb.render_toolbox(available),
    )


def parse_plan(text: str, tools: Sequence[ToolDescriptor] | None = None) -> TaskPlan:
    steps = [s.strip() for s in text.strip().split("|")]
    if len(steps) != 3:
        raise PlanParseError(f"plan needs 3 steps, got {len(steps)}: {text!r}")
    first, tool, last = steps
    if first != VIDEO_SAMPLER:
        raise PlanParseError(f"first step must be {VIDEO_SAMPLER!r}, got {first!r}")
    if last != ANALYSIS:
        raise PlanParseError(f"last step must be {ANALYSIS!r}, got {last!r}")
    if tool not in tb.tool_names(tools):
        raise UnknownToolInPlan(tool)
    return TaskPlan(tool)


def _plan_line(completion: str) -> str:
    for line in completion.splitlines():
        if "|" in line:
            line = line.strip().strip("`*\"'").strip()
            start = line.find(VIDEO_SAMPLER)
            if start > 0:
                line = line[start:]
            line = re.sub(r"^(?:plan|task plan)\s*:\s*", "", line, flags=re.I)
            return line.rstrip(".").strip("\"'")
    return completion.strip()


def keyword_score(request: str, tool: ToolDescriptor) -> int:
    tokens = tokenize(request)
    return len(find_terms(tokens, (tuple(k.split()) for k in tool.keywords)))


def select_tool_deterministic(ctx: PlannerContext, tools: Sequence[ToolDescriptor]) -> str:
    available = ctx.available(tools)
    if not available:
        raise ToolboxExhausted("every tool in the toolbox has already been tried")
    best = available[0]
    best_score = keyword_score(ctx.request, best)
    for tool in available[1:]:
        score = keyword_score(ctx.request, tool)
        if score > best_score:
            best, best_score = tool, score
    return best.name


FORMAT_REMINDER = (
    "\n\nYour previous reply could not be read as a plan. Reply with one line only, "
    'exactly in the form "Video Sampler | <tool name> | Analysis", using a tool name from the toolbox.'
)


def generate_plan(ctx: PlannerContext, tools: Sequence[ToolDescriptor], backend: Backend) -> TaskPlan:
    """Plan with the rule engine or by prompting ``backend``.

    A completion that does not parse is re-asked once with a format
    reminder. Plans naming an excluded tool are rejected.
    """
    ctx.validate(tools)
    if backend.deterministic:
        return TaskPlan(select_tool_deterministic(ctx, tools))
    prompt = render_planning_prompt(ctx, tools)
    try:
        plan = parse_plan(_plan_line(backend.complete(prompt)), tools)
    except PlanParseError as exc:
        logger.info("plan did not parse (%s); asking again", exc)
        plan = parse_plan(_plan_line(backend.complete(prompt + FORMAT_REMINDER)), tools)
    if plan.tool in ctx.excluded_tools:
        raise ExcludedToolError(plan.tool)
    return plan


# --- Analysis --------------------------------------------------------------

def _frames_phrase(ids: Sequence[int]) -> str:
    return ", ".join(str(i) for i in ids)


def _analysis_body(request: str, result: ExecutionResult, jam_threshold: float) -> str:
    per_frame = result.per_frame
    n = len(per_frame)
    tool = result.tool
    if tool == tb.VEHICLE_DENSITY_ESTIMATION:
        values = list(per_frame.values())
        peak = max(values)
        typical = min(Counter(values).most_common(), key=lambda kv: (-kv[1], kv[0]))[0]
        if peak >= jam_threshold:
            jam_frames = [fid for fid, d in per_frame.items() if d >= jam_threshold]
            return (
                f"Based on the analysis of the video, a traffic jam is detected. The vehicle density reaches {peak}, "
                f"at or above the congestion level of {jam_threshold}, in {len(jam_frames)} of {n} analysed frames "
                f"(frames {_frames_phrase(jam_frames)})."
            )
        return (
            f"Based on the analysis of the video, there is no traffic jam detected. The vehicle density is {typical} "
            f"for most of the video and peaks at {peak}, which still indicates light traffic."
        )
    if tool == tb.VEHICLE_MOTION_DETECTION:
        states = result.details.get("track_states", {})
        if not states:
            return f"No vehicles were detected in the {n} analysed frames, so no motion could be assessed."
        moving = sum(1 for s in states.values() if s == tb.MOVING)
        return (
            f"{len(states)} vehicles were observed: {moving} moving and {len(states) - moving} not moving "
            f"between the first and last analysed frames."
        )
    if tool == tb.TRAFFIC_FLOW_ESTIMATION:
        total = result.details.get("total", 0)
        if not total:
            return f"No vehicles were detected in the {n} analysed frames."
        return f"A total of {total} different vehicles appear in the analysed part of the video."
    if tool == tb.LANE_NUMBER_DETECTION:
        counts = result.details.get("lane_counts", [])
        if not any(counts):
            return f"No lanes were detected in the {n} analysed frames."
        lanes = max(Counter(per_frame.values()).most_common(), key=lambda kv: (kv[1], kv[0]))[0]
        return f"The road in the video has {lanes} lanes."
    if tool == tb.LICENSE_PLATE_DETECTION:
        plates = list(dict.fromkeys("".join(p) for found in per_frame.values() for p in found))
        if not plates:
            return f"No license plates were detected in the {n} analysed frames."
        return f"The license plates read in the video are: {', '.join(plates)}."
    if tool == tb.TRAFFIC_SIGN_DETECTION:
        signs = list(dict.fromkeys(name for found in per_frame.values() for _, name in found))
        if not signs:
            return f"No traffic signs were detected in the {n} analysed frames."
        return f"The traffic signs detected in the video are: {', '.join(signs)}."
    if tool == tb.VEHICLE_DETECTION:
        combos = Counter()
        for found in per_frame.values():
            combos.update(set(found))
        if not combos:
            return f"No vehicles were detected in the {n} analysed frames."
        parts = [f"{color} {vtype} (in {k} frames)" for (color, vtype), k in sorted(combos.items(), key=lambda kv: (-kv[1], kv[0]))]
        return f"Vehicles detected in the video: {', '.join(parts)}."
    if tool == tb.OBJECT_DETECTION:
        frames_with = Counter()
        most = Counter()
        for found in per_frame.values():
            per = Counter(name for _, name in found)
            frames_with.update(per.keys())
            for name, k in per.items():
                most[name] = max(most[name], k)
        if not frames_with:
            return f"No objects were detected in the {n} analysed frames."
        asked = {label for label in frames_with if find_terms(tokenize(request), [normalize_term(label)])}
        parts = [
            f"{name} in {k} of {n} frames (up to {most[name]} at once)"
            for name, k in sorted(frames_with.items(), key=lambda kv: (-kv[1], kv[0]))
        ]
        lead = ""
        if asked:
            lead = f"Yes, {', '.join(sorted(asked))} {'was' if len(asked) == 1 else 'were'} detected. "
        return f"{lead}Objects detected: {'; '.join(parts)}."
    return f"The {tool} tool returned: {result.summary}"


def analyze(
    request: str,
    plan: TaskPlan,
    result: ExecutionResult,
    backend: Backend | None = None,
    jam_threshold: float = DEFAULT_JAM_THRESHOLD,
) -> str:
    """Answer ``request`` from the tool results of ``plan``."""
    if backend is not None and not backend.deterministic:
        prompt = Template(load_template("analysis_prompt.txt")).substitute(
            request=request, plan=plan.raw, tool=plan.tool, summary=result.summary
        )
        answer = backend.complete(prompt).strip()
        if answer:
            return answer
    return f"{FULFILL_PREFIX} {_analysis_body(request, result, jam_threshold)}\n{plan.tool} output:\n{result.summary}"
