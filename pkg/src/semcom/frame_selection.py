"""Fallback path: pick the raw frames most relevant to an unanswerable request.

Video Sampler -> key-term tool selection -> frame selection. The key term is
a tool label found in the request; the matching tool's findings decide which
sampled frames are sent.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from string import Template
from typing import Optional, Sequence

from . import toolbox as tb
from .dataset import AnnotatedClip
from .llm_backend import Backend, BackendError
from .planning import DEFAULT_SAMPLES_PER_SECOND, sample_frames
from .text import find_terms, load_template, normalize_term, tokenize
from .toolbox import ExecutionResult, ToolDescriptor, ToolError

logger = logging.getLogger(__name__)

NO_OPTION_TEXT = "No option"
DEFAULT_MAX_FRAMES = 5
DEFAULT_MIN_GAP_SECONDS = 1.0
CANNOT_FULFILL = "I cannot fulfill your request on the semantic information directly."


@dataclass(frozen=True)
class KeyTermMatch:
    key_term: Optional[str] = None
    tool: Optional[str] = None

    @property
    def matched(self) -> bool:
        return self.tool is not None

    def __str__(self) -> str:
        return f"{self.key_term} -> {self.tool}" if self.matched else NO_OPTION_TEXT


NO_OPTION = KeyTermMatch()


@dataclass(frozen=True)
class Limits:
    max_frames: int = DEFAULT_MAX_FRAMES
    min_gap_seconds: float = DEFAULT_MIN_GAP_SECONDS

    def __post_init__(self) -> None:
        if self.max_frames < 1:
            raise ValueError("max_frames must be at least 1")
        if self.min_gap_seconds < 0:
            raise ValueError("min_gap_seconds must be non-negative")

    def min_gap_frames(self, fps: float) -> int:
        return round(self.min_gap_seconds * fps)


def extract_key_term_deterministic(request: str, tools: Sequence[ToolDescriptor]) -> KeyTermMatch:
    """First label (in reading order) mentioned by the request.

    At each position the longest label wins; a label shared by several tools
    maps to the earliest tool in table order.
    """
    index = tb.label_index(tools)
    hits = find_terms(tokenize(request), index.keys())
    if not hits:
        return NO_OPTION
    _, term = min(hits, key=lambda h: (h[0], -len(h[1])))
    tool, label = index[term]
    return KeyTermMatch(label, tool)


def _label_listing(tools: Sequence[ToolDescriptor]) -> str:
    lines = []
    for tool in sorted(tools, key=lambda t: t.index):
        if tool.labels:
            lines.append(f"- {tool.name}: {', '.join(sorted(tool.labels, key=str.lower))}")
    return "\n".join(lines)


def extract_key_term(request: str, tools: Sequence[ToolDescriptor], backend: Backend) -> KeyTermMatch:
    if backend.deterministic:
        return extract_key_term_deterministic(request, tools)
    prompt = Template(load_template("key_term_prompt.txt")).substitute(
        request=request, labels=_label_listing(tools)
    )
    reply = backend.complete(prompt).strip().strip("\"'`.").strip()
    if reply.casefold() == NO_OPTION_TEXT.casefold():
        return NO_OPTION
    index = tb.label_index(tools)
    found = index.get(normalize_term(reply))
    if found is None:
        logger.warning("key-term reply %r is not a toolbox label; treating it as no option", reply)
        return NO_OPTION
    tool, label = found
    return KeyTermMatch(label, tool)


def deduplicate(candidates: Sequence[int], min_gap: int, max_frames: int) -> list[int]:
    """Greedy ascending pass keeping frames at least ``min_gap`` apart, capped."""
    kept: list[int] = []
    for fid in sorted(set(candidates)):
        if len(kept) == max_frames:
            break
        if not kept or fid - kept[-1] >= min_gap:
            kept.append(fid)
    return kept


_INT = re.compile(r"\d+")


def _remote_choice(request: str, result: ExecutionResult, backend: Backend) -> list[int]:
    lines = []
    for fid, found in result.per_frame.items():
        lines.append(f"{fid}: {found}")
    prompt = Template(load_template("frame_selection_prompt.txt")).substitute(
        request=request, tool=result.tool, results="\n".join(lines)
    )
    reply = backend.complete(prompt)
    return [int(x) for x in _INT.findall(reply) if int(x) in result.per_frame]


def select_relevant_frames(
    request: str,
    key: KeyTermMatch,
    result: ExecutionResult,
    max_frames: int = DEFAULT_MAX_FRAMES,
    min_gap: int = 30,
    backend: Backend | None = None,
) -> list[int]:
    """Frame ids worth sending for ``key``, de-duplicated in time and capped.

    With a prompting backend the model picks among the tool's frames; an
    empty or unusable pick falls back to the rule-based candidates.
    """
    if not key.matched:
        return []
    candidates = sorted(result.matched_frame_ids(key.key_term))
    if backend is not None and not backend.deterministic:
        try:
            picked = _remote_choice(request, result, backend)
        except BackendError as exc:
            logger.warning("frame selection prompt failed (%s); using tool matches", exc)
            picked = []
        if picked:
            candidates = sorted(set(picked))
    return deduplicate(candidates, min_gap, max_frames)


def uniform_subset(frame_ids: Sequence[int], k: int) -> list[int]:
    n = len(frame_ids)
    k = min(k, n)
    return [frame_ids[(i * n) // k] for i in range(k)]


@dataclass(frozen=True)
class FrameSelection:
    frame_ids: tuple[int, ...]
    explanation: str
    key: KeyTermMatch
    degraded: bool


def _explain(ids: Sequence[int], key: KeyTermMatch, degraded: bool) -> str:
    listed = ", ".join(str(i) for i in ids)
    if degraded:
        how = (
            f"However, I send a uniform sample of video frames to you (frame IDs: {listed}), since none of my "
            f"tools could single out frames for this request."
        )
    else:
        how = (
            f"However, I send the most relevant video frames to you (frame IDs: {listed}), chosen with "
            f'{key.tool} for the key term "{key.key_term}".'
        )
    return f"{CANNOT_FULFILL} {how} You may get the required semantic information from the attached video frames."


def frame_selection_pipeline(
    request: str,
    clip: AnnotatedClip,
    tools: Sequence[ToolDescriptor],
    backend: Backend,
    limits: Limits = Limits(),
    samples_per_second: float = DEFAULT_SAMPLES_PER_SECOND,
    tau: float = tb.DEFAULT_TAU,
) -> FrameSelection:
    sampled = sample_frames(request, clip, samples_per_second)
    try:
        key = extract_key_term(request, tools, backend)
    except BackendError as exc:
        logger.warning("key-term extraction failed (%s); no option", exc)
        key = NO_OPTION
    ids: list[int] = []
    if key.matched:
        try:
            result = tb.execute(key.tool, clip, sampled, tau)
        except ToolError as exc:
            logger.warning("%s failed during frame selection: %s", key.tool, exc)
        else:
            ids = select_relevant_frames(
                request, key, result, limits.max_frames, limits.min_gap_frames(clip.fps), backend
            )
    degraded = not ids
    if degraded:
        ids = uniform_subset(sampled, limits.max_frames)
    return FrameSelection(tuple(ids), _explain(ids, key, degraded), key, degraded)
