import io
import json
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcom.protocol import (
    EncodeError,
    ErrorReply,
    FeedbackFrames,
    FeedbackText,
    InvariantError,
    MalformedError,
    Request,
    TruncatedError,
    UnknownTypeError,
    decode_message,
    encode_message,
    frame_bytes,
)


def test_smallest_variant_layout():
    data = encode_message(ErrorReply("s1", "NO_CLIP", ""))
    (length,) = struct.unpack("!I", data[:4])
    assert length == len(data) - 4
    body = json.loads(data[4:])
    assert body == {"type": "ERROR_REPLY", "session_id": "s1", "code": "NO_CLIP", "detail": ""}
    # canonical: sorted keys, no whitespace
    assert data[4:] == json.dumps(body, sort_keys=True, separators=(",", ":")).encode()


def test_traffic_jam_request_round_trips():
    msg = Request("s1", "c01", "Is there a traffic jam in the video?")
    assert decode_message(encode_message(msg)) == msg


def test_frames_are_base64_inline():
    msg = FeedbackFrames("s", (3, 9), ((3, b"\x00\xff"), (9, b"abc")), "here", ("Video Sampler | Object Detection | Analysis",))
    body = json.loads(encode_message(msg)[4:])
    assert body["frames"] == [{"frame_id": 3, "payload": "AP8="}, {"frame_id": 9, "payload": "YWJj"}]
    assert decode_message(encode_message(msg)) == msg


def test_truncated_payload():
    stream = struct.pack("!I", 10) + b"abcd"
    with pytest.raises(TruncatedError):
        decode_message(stream)


def test_truncated_prefix():
    with pytest.raises(TruncatedError):
        decode_message(b"\x00\x00")


def test_unknown_type():
    with pytest.raises(UnknownTypeError):
        decode_message(frame_bytes({"type": "BOGUS", "session_id": "s"}))


def test_malformed_json():
    payload = b"{not json"
    with pytest.raises(MalformedError):
        decode_message(struct.pack("!I", len(payload)) + payload)


def test_non_object_payload():
    with pytest.raises(MalformedError):
        decode_message(frame_bytes([1, 2]))


@pytest.mark.parametrize(
    "obj",
    [
        {"type": "REQUEST", "session_id": "", "clip_id": "c", "text": "hi"},
        {"type": "REQUEST", "session_id": "s", "clip_id": "c", "text": "   "},
        {"type": "FEEDBACK_FRAMES", "session_id": "s", "frame_ids": [5, 2], "explanation": "",
         "plan_trace": [], "frames": [{"frame_id": 5, "payload": ""}, {"frame_id": 2, "payload": ""}]},
        {"type": "FEEDBACK_FRAMES", "session_id": "s", "frame_ids": [1, 2], "explanation": "",
         "plan_trace": [], "frames": [{"frame_id": 1, "payload": ""}]},
    ],
)
def test_invariant_violations(obj):
    with pytest.raises(InvariantError):
        decode_message(frame_bytes(obj))


def test_error_kinds_are_distinct():
    kinds = {TruncatedError, MalformedError, UnknownTypeError, InvariantError}
    assert len(kinds) == 4
    for a in kinds:
        for b in kinds - {a}:
            assert not issubclass(a, b)


def test_encode_rejects_invalid_message():
    with pytest.raises(InvariantError):
        encode_message(Request("s", "c", ""))


def test_oversize_payload_names_limit():
    msg = FeedbackText("s", "x" * 200)
    with pytest.raises(EncodeError, match="100-byte limit"):
        encode_message(msg, max_payload=100)


def test_trailing_bytes_untouched():
    first = encode_message(Request("a", "c01", "one"))
    second = encode_message(Request("b", "c01", "two"))
    stream = io.BytesIO(first + second + b"tail")
    assert decode_message(stream).session_id == "a"
    assert stream.tell() == len(first)
    assert decode_message(stream).session_id == "b"
    assert stream.read() == b"tail"


def test_equal_frames_messages_encode_identically():
    a = FeedbackFrames("s", [1, 4], [(1, b"x"), (4, b"y")], "e", ["p"])
    b = FeedbackFrames("s", (1, 4), ((1, b"x"), (4, b"y")), "e", ("p",))
    assert a == b
    assert encode_message(a) == encode_message(b)


# --- generated messages ------------------------------------------------------

_text = st.text(max_size=40)
_sid = st.text(min_size=1, max_size=12)


@st.composite
def messages(draw):
    kind = draw(st.sampled_from(["REQUEST", "FEEDBACK_TEXT", "FEEDBACK_FRAMES", "ERROR_REPLY"]))
    sid = draw(_sid)
    if kind == "REQUEST":
        text = draw(_text.filter(lambda t: t.strip()))
        return Request(sid, draw(_text), text)
    if kind == "FEEDBACK_TEXT":
        return FeedbackText(sid, draw(_text), draw(st.lists(_text, max_size=4)), draw(_text))
    if kind == "FEEDBACK_FRAMES":
        ids = sorted(draw(st.sets(st.integers(0, 10_000), max_size=5)))
        frames = [(i, draw(st.binary(max_size=64))) for i in ids]
        return FeedbackFrames(sid, ids, frames, draw(_text), draw(st.lists(_text, max_size=3)))
    return ErrorReply(sid, draw(_text), draw(_text))


@given(messages())
@settings(max_examples=300)
def test_round_trip_property(msg):
    data = encode_message(msg)
    assert decode_message(data) == msg
    assert encode_message(decode_message(data)) == data


def random_message(rng: random.Random):
    """Independent pseudorandom generator used by the 1000-message check."""
    alphabet = "abcxyz ÄÖü漢字🚗\"\\\n\t"

    def text(lo=0, hi=30):
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(lo, hi)))

    sid = "s" + text(0, 8)
    kind = rng.randrange(4)
    if kind == 0:
        return Request(sid, text(), "q" + text())
    if kind == 1:
        return FeedbackText(sid, text(), [text() for _ in range(rng.randint(0, 3))], text())
    if kind == 2:
        ids = sorted(rng.sample(range(5000), rng.randint(0, 6)))
        frames = [(i, rng.randbytes(rng.randint(0, 50))) for i in ids]
        return FeedbackFrames(sid, ids, frames, text(), [text()])
    return ErrorReply(sid, text(1, 10), text())


def test_thousand_generated_messages_round_trip():
    rng = random.Random(2024)
    msgs = [random_message(rng) for _ in range(1000)]
    blob = b"".join(encode_message(m) for m in msgs)
    stream = io.BytesIO(blob)
    decoded = [decode_message(stream) for _ in msgs]
    assert decoded == msgs
    assert stream.read() == b""
    assert b"".join(encode_message(m) for m in decoded) == blob
