"""Length-prefixed JSON wire format between receiver and transmitter.

Each message is a 4-byte big-endian unsigned payload length followed by a
canonical UTF-8 JSON object (sorted keys, no insignificant whitespace). The
``type`` field carries the variant tag; frame payloads travel as base64.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import struct
from dataclasses import dataclass
from typing import BinaryIO, Union

MAX_PAYLOAD = 2**31 - 1
HEADER = struct.Struct("!I")

REQUEST = "REQUEST"
FEEDBACK_TEXT = "FEEDBACK_TEXT"
FEEDBACK_FRAMES = "FEEDBACK_FRAMES"
ERROR_REPLY = "ERROR_REPLY"


class ProtocolError(Exception):
    """Base class for wire-format failures."""


class EncodeError(ProtocolError):
    pass


class TruncatedError(ProtocolError):
    pass


class MalformedError(ProtocolError):
    """Payload is not a JSON object or a field has the wrong shape."""


class UnknownTypeError(ProtocolError):
    pass


class InvariantError(ProtocolError):
    pass


def _check_str(name: str, value: object) -> None:
    if not isinstance(value, str):
        raise InvariantError(f"{name} must be a string")


def _check_session(session_id: object) -> None:
    _check_str("session_id", session_id)
    if not session_id:
        raise InvariantError("session_id must be non-empty")


@dataclass(frozen=True)
class Request:
    session_id: str
    clip_id: str
    text: str

    type = REQUEST

    def validate(self) -> None:
        _check_session(self.session_id)
        _check_str("clip_id", self.clip_id)
        _check_str("text", self.text)
        if not self.text.strip():
            raise InvariantError("request text is empty")


@dataclass(frozen=True)
class FeedbackText:
    session_id: str
    answer: str
    plan_trace: tuple[str, ...] = ()
    tool_used: str = ""

    type = FEEDBACK_TEXT

    def __post_init__(self) -> None:
        object.__setattr__(self, "plan_trace", tuple(self.plan_trace))

    def validate(self) -> None:
        _check_session(self.session_id)
        _check_str("answer", self.answer)
        _check_str("tool_used", self.tool_used)
        for plan in self.plan_trace:
            _check_str("plan_trace entry", plan)


@dataclass(frozen=True)
class FeedbackFrames:
    session_id: str
    frame_ids: tuple[int, ...]
    frames: tuple[tuple[int, bytes], ...]
    explanation: str
    plan_trace: tuple[str, ...] = ()

    type = FEEDBACK_FRAMES

    def __post_init__(self) -> None:
        object.__setattr__(self, "frame_ids", tuple(self.frame_ids))
        object.__setattr__(self, "frames", tuple((fid, data) for fid, data in self.frames))
        object.__setattr__(self, "plan_trace", tuple(self.plan_trace))

    @property
    def payload_bytes(self) -> int:
        return sum(len(data) for _, data in self.frames)

    def validate(self) -> None:
        _check_session(self.session_id)
        _check_str("explanation", self.explanation)
        for plan in self.plan_trace:
            _check_str("plan_trace entry", plan)
        for fid in self.frame_ids:
            if isinstance(fid, bool) or not isinstance(fid, int) or fid < 0:
                raise InvariantError(f"frame id {fid!r} is not a non-negative integer")
        if any(b <= a for a, b in zip(self.frame_ids, self.frame_ids[1:])):
            raise InvariantError("frame_ids must be strictly increasing")
        if tuple(fid for fid, _ in self.frames) != self.frame_ids:
            raise InvariantError("frames must match frame_ids in length and order")
        for _, data in self.frames:
            if not isinstance(data, (bytes, bytearray)):
                raise InvariantError("frame payload must be bytes")


@dataclass(frozen=True)
class ErrorReply:
    session_id: str
    code: str
    detail: str = ""

    type = ERROR_REPLY

    def validate(self) -> None:
        _check_session(self.session_id)
        _check_str("code", self.code)
        _check_str("detail", self.detail)


Message = Union[Request, FeedbackText, FeedbackFrames, ErrorReply]


def _to_dict(msg: Message) -> dict:
    if isinstance(msg, Request):
        body = {"clip_id": msg.clip_id, "text": msg.text}
    elif isinstance(msg, FeedbackText):
        body = {"answer": msg.answer, "plan_trace": list(msg.plan_trace), "tool_used": msg.tool_used}
    elif isinstance(msg, FeedbackFrames):
        body = {
            "frame_ids": list(msg.frame_ids),
            "frames": [
                {"frame_id": fid, "payload": base64.b64encode(bytes(data)).decode("ascii")}
                for fid, data in msg.frames
            ],
            "explanation": msg.explanation,
            "plan_trace": list(msg.plan_trace),
        }
    elif isinstance(msg, ErrorReply):
        body = {"code": msg.code, "detail": msg.detail}
    else:
        raise EncodeError(f"not a message: {type(msg).__name__}")
    body["type"] = msg.type
    body["session_id"] = msg.session_id
    return body


def encode_message(msg: Message, max_payload: int = MAX_PAYLOAD) -> bytes:
    """Serialize ``msg`` into a length-prefixed canonical JSON frame."""
    if not hasattr(msg, "validate"):
        raise EncodeError(f"not a message: {type(msg).__name__}")
    msg.validate()
    payload = json.dumps(
        _to_dict(msg), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    limit = min(max_payload, MAX_PAYLOAD)
    if len(payload) > limit:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds the {limit}-byte limit")
    return HEADER.pack(len(payload)) + payload


def _field(obj: dict, name: str, kind: type):
    if name not in obj:
        raise MalformedError(f"missing field {name!r}")
    value = obj[name]
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise MalformedError(f"field {name!r} must be {kind.__name__}")
    return value


def _str_list(obj: dict, name: str) -> tuple[str, ...]:
    items = _field(obj, name, list)
    if not all(isinstance(item, str) for item in items):
        raise MalformedError(f"field {name!r} must hold strings")
    return tuple(items)


def _from_dict(obj: dict) -> Message:
    kind = _field(obj, "type", str)
    session_id = _field(obj, "session_id", str)
    if kind == REQUEST:
        msg = Request(session_id, _field(obj, "clip_id", str), _field(obj, "text", str))
    elif kind == FEEDBACK_TEXT:
        msg = FeedbackText(
            session_id,
            _field(obj, "answer", str),
            _str_list(obj, "plan_trace"),
            _field(obj, "tool_used", str),
        )
    elif kind == FEEDBACK_FRAMES:
        frame_ids = _field(obj, "frame_ids", list)
        frames = []
        for entry in _field(obj, "frames", list):
            if not isinstance(entry, dict):
                raise MalformedError("frame entries must be objects")
            try:
                data = base64.b64decode(_field(entry, "payload", str), validate=True)
            except binascii.Error as exc:
                raise MalformedError(f"bad base64 frame payload: {exc}") from exc
            frames.append((_field(entry, "frame_id", int), data))
        msg = FeedbackFrames(
            session_id,
            tuple(frame_ids),
            tuple(frames),
            _field(obj, "explanation", str),
            _str_list(obj, "plan_trace"),
        )
    elif kind == ERROR_REPLY:
        msg = ErrorReply(session_id, _field(obj, "code", str), _field(obj, "detail", str))
    else:
        raise UnknownTypeError(f"unknown message type {kind!r}")
    msg.validate()
    return msg


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def decode_message(stream: BinaryIO | bytes | bytearray | memoryview) -> Message:
    """Read exactly one message from ``stream``.

    ``stream`` is a binary file-like object (a socket ``makefile('rb')``
    works) or a bytes-like buffer. Only the prefix and the declared payload
    are consumed.
    """
    if isinstance(stream, (bytes, bytearray, memoryview)):
        stream = io.BytesIO(bytes(stream))
    header = _read_exact(stream, HEADER.size)
    if len(header) < HEADER.size:
        raise TruncatedError(f"expected {HEADER.size}-byte length prefix, got {len(header)}")
    (length,) = HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise MalformedError(f"declared payload {length} exceeds the {MAX_PAYLOAD}-byte limit")
    payload = _read_exact(stream, length)
    if len(payload) < length:
        raise TruncatedError(f"prefix declared {length} bytes but only {len(payload)} arrived")
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedError(f"payload is not UTF-8 JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedError("payload must be a JSON object")
    return _from_dict(obj)


def frame_bytes(obj: dict) -> bytes:
    """Frame an arbitrary JSON object; used to craft raw test traffic."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return HEADER.pack(len(payload)) + payload
