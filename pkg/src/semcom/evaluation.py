"""Corpus evaluation: reflection accuracy, receiver success and bandwidth savings.

Rows are built from the feedback messages alone, so the same code scores an
in-process transmitter and one reached over the network.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .dataset import AnnotatedClip, RequestRecord, load_request_corpus
from .planning import PlanParseError, parse_plan
from .protocol import ErrorReply, FeedbackFrames, FeedbackText, Message, Request

logger = logging.getLogger(__name__)

TEXT = "text"
FRAMES = "frames"
ERROR = "error"


@dataclass(frozen=True)
class RequestRow:
    request_id: str
    clip_id: str
    label: str
    path: str
    plan_trace: tuple[str, ...]
    first_tool: Optional[str]
    expected_tool: Optional[str]
    tool_used: Optional[str]
    frame_ids: tuple[int, ...]
    frames_sent: int
    bytes_sent: int
    correct: bool
    success: bool
    error: Optional[str] = None


@dataclass(frozen=True)
class MetricsReport:
    accurate_ratio_Y: Optional[float]
    accurate_ratio_N: Optional[float]
    accurate_ratio_YN: Optional[float]
    success_rate: Optional[float]
    frame_count_reduction_ratio: Optional[float]
    data_size_reduction_ratio: Optional[float]
    first_choice_tool_accuracy: Optional[float]
    nbar: Optional[int]
    counts: Mapping[str, int]
    rows: tuple[RequestRow, ...]
    failures: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rows"] = [asdict(r) for r in self.rows]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def accurate_ratios(
    correct_y: int, total_y: int, correct_n: int, total_n: int
) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """Per-label and pooled accuracy; pooled is over all requests, not a mean of the two."""
    return (
        _ratio(correct_y, total_y),
        _ratio(correct_n, total_n),
        _ratio(correct_y + correct_n, total_y + total_n),
    )


def reduction_ratio(transmitted: float, baseline: float) -> float:
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    return 1.0 - transmitted / baseline


def _first_tool(trace: Sequence[str]) -> Optional[str]:
    if not trace:
        return None
    try:
        return parse_plan(trace[0]).tool
    except PlanParseError:
        return None


def score_reply(record: RequestRecord, reply: Message) -> RequestRow:
    """Turn one feedback message into an evaluation row.

    A Y request is handled correctly when the text path was taken and an N
    request when every plan was rejected (frames path). Success additionally
    needs non-empty frames on the frames path, with at least one inside the
    record's relevant span when it has one.
    """
    if isinstance(reply, FeedbackText):
        path, trace, frame_ids = TEXT, reply.plan_trace, ()
        frames_sent, bytes_sent, tool_used, error = 0, len(reply.answer.encode("utf-8")), reply.tool_used, None
    elif isinstance(reply, FeedbackFrames):
        path, trace, frame_ids = FRAMES, reply.plan_trace, reply.frame_ids
        frames_sent, bytes_sent, tool_used, error = len(reply.frame_ids), reply.payload_bytes, None, None
    elif isinstance(reply, ErrorReply):
        path, trace, frame_ids = ERROR, (), ()
        frames_sent, bytes_sent, tool_used, error = 0, 0, None, f"{reply.code}: {reply.detail}"
    else:
        raise TypeError(f"not a feedback message: {type(reply).__name__}")

    if record.label == "Y":
        correct = success = path == TEXT
    else:
        correct = path == FRAMES
        success = correct and bool(frame_ids)
        if success and record.relevant_span is not None:
            lo, hi = record.relevant_span
            success = any(lo <= fid <= hi for fid in frame_ids)
    return RequestRow(
        request_id=record.request_id,
        clip_id=record.clip_id,
        label=record.label,
        path=path,
        plan_trace=tuple(trace),
        first_tool=_first_tool(trace),
        expected_tool=record.expected_tool,
        tool_used=tool_used,
        frame_ids=tuple(frame_ids),
        frames_sent=frames_sent,
        bytes_sent=bytes_sent,
        correct=correct,
        success=success,
        error=error,
    )


def run_requests(
    records: Sequence[RequestRecord],
    send: Callable[[Request], Message],
    workers: int = 1,
) -> list[RequestRow]:
    """Send every record through ``send`` and score the replies, in corpus order."""

    def one(record: RequestRecord) -> RequestRow:
        reply = send(Request(f"eval-{record.request_id}", record.clip_id, record.text))
        return score_reply(record, reply)

    if workers <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, records))


def reflection_ratios(rows: Sequence[RequestRow]) -> tuple[Optional[float], Optional[float], Optional[float]]:
    ys = [r for r in rows if r.label == "Y"]
    ns = [r for r in rows if r.label == "N"]
    return accurate_ratios(sum(r.correct for r in ys), len(ys), sum(r.correct for r in ns), len(ns))


def evaluate_reflection_accuracy(
    records: Sequence[RequestRecord], send: Callable[[Request], Message]
) -> tuple[Optional[float], Optional[float], Optional[float]]:
    return reflection_ratios(run_requests(records, send))


def evaluate_reduction(rows: Sequence[RequestRow], clips: Mapping[str, AnnotatedClip]) -> tuple[float, float]:
    """Frame-count and data-size reduction against sending each requested clip whole.

    The baseline counts a clip once per request. Text replies count their
    answer bytes and no frames; rows that ended in an error are left out.
    """
    base_frames = base_bytes = sent_frames = sent_bytes = 0
    for row in rows:
        if row.path == ERROR:
            continue
        clip = clips[row.clip_id]
        base_frames += clip.frame_count
        base_bytes += clip.compressed_size_bytes
        sent_frames += row.frames_sent
        sent_bytes += row.bytes_sent
    if base_frames == 0 or base_bytes == 0:
        raise ValueError("reduction baseline is zero; no scored requests")
    return reduction_ratio(sent_frames, base_frames), reduction_ratio(sent_bytes, base_bytes)


def build_report(
    rows: Sequence[RequestRow], clips: Mapping[str, AnnotatedClip], nbar: Optional[int] = None
) -> MetricsReport:
    if not rows:
        raise ValueError("cannot build a report from an empty corpus")
    acc_y, acc_n, acc_yn = reflection_ratios(rows)
    try:
        frame_ratio, size_ratio = evaluate_reduction(rows, clips)
    except ValueError:
        frame_ratio = size_ratio = None
    with_tool = [r for r in rows if r.label == "Y" and r.expected_tool]
    first_choice = _ratio(sum(r.first_tool == r.expected_tool for r in with_tool), len(with_tool))
    counts = {
        "Y": sum(r.label == "Y" for r in rows),
        "N": sum(r.label == "N" for r in rows),
        TEXT: sum(r.path == TEXT for r in rows),
        FRAMES: sum(r.path == FRAMES for r in rows),
        ERROR: sum(r.path == ERROR for r in rows),
    }
    failures = tuple(f"{r.request_id}: {r.error}" for r in rows if r.path == ERROR)
    return MetricsReport(
        accurate_ratio_Y=acc_y,
        accurate_ratio_N=acc_n,
        accurate_ratio_YN=acc_yn,
        success_rate=_ratio(sum(r.success for r in rows), len(rows)),
        frame_count_reduction_ratio=frame_ratio,
        data_size_reduction_ratio=size_ratio,
        first_choice_tool_accuracy=first_choice,
        nbar=nbar,
        counts=counts,
        rows=tuple(rows),
        failures=failures,
    )


def run_corpus(
    corpus: str | Path | Sequence[RequestRecord],
    send: Callable[[Request], Message],
    clips: Mapping[str, AnnotatedClip],
    report_out: str | Path | None = None,
    nbar: Optional[int] = None,
    workers: int = 1,
) -> MetricsReport:
    records = load_request_corpus(corpus) if isinstance(corpus, (str, Path)) else list(corpus)
    if not records:
        raise ValueError("corpus is empty")
    rows = run_requests(records, send, workers)
    report = build_report(rows, clips, nbar)
    for failure in report.failures:
        logger.warning("request failed: %s", failure)
    if report_out is not None:
        Path(report_out).write_text(report.to_json(), encoding="utf-8")
    return report
