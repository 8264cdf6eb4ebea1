"""Receiver side: send requests, render feedback, run corpus evaluations."""

from __future__ import annotations

import argparse
import logging
import socket
import sys
import threading
import uuid
from pathlib import Path
from typing import Sequence

from .dataset import load_dataset
from .evaluation import run_corpus
from .orchestrator import DEFAULT_PORT, add_transmitter_args, transmitter_from_args
from .protocol import ErrorReply, FeedbackFrames, FeedbackText, Message, Request, decode_message, encode_message


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host:
        return endpoint or "127.0.0.1", DEFAULT_PORT
    return host, int(port)


class ReceiverClient:
    """One TCP connection to a transmitter; requests are sent one at a time."""

    def __init__(self, endpoint: str, timeout: float | None = 60.0):
        self._sock = socket.create_connection(parse_endpoint(endpoint), timeout=timeout)
        self._stream = self._sock.makefile("rb")
        self._lock = threading.Lock()

    def send(self, request: Request) -> Message:
        with self._lock:
            self._sock.sendall(encode_message(request))
            return decode_message(self._stream)

    def ask(self, clip_id: str, text: str) -> Message:
        return self.send(Request(uuid.uuid4().hex, clip_id, text))

    def close(self) -> None:
        self._stream.close()
        self._sock.close()

    def __enter__(self) -> "ReceiverClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def render_feedback(reply: Message, out_dir: str | Path | None = None) -> str:
    """Human-readable rendering; frame payloads are written to ``out_dir``."""
    if isinstance(reply, FeedbackText):
        return reply.answer
    if isinstance(reply, FeedbackFrames):
        lines = [reply.explanation]
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            for fid, data in reply.frames:
                path = out / f"frame_{fid:04d}.bin"
                path.write_bytes(data)
                lines.append(f"wrote {path} ({len(data)} bytes)")
        else:
            lines.append("frames: " + ", ".join(str(fid) for fid in reply.frame_ids))
        return "\n".join(lines)
    if isinstance(reply, ErrorReply):
        return f"error {reply.code}: {reply.detail}"
    return repr(reply)


def submit_request(endpoint: str, clip_id: str, text: str, out_dir: str | Path | None = None) -> str:
    with ReceiverClient(endpoint) as client:
        return render_feedback(client.ask(clip_id, text), out_dir)


def _ask(args: argparse.Namespace) -> int:
    try:
        with ReceiverClient(args.endpoint) as client:
            reply = client.ask(args.clip, args.text)
    except OSError as exc:
        print(f"semcom-client: cannot reach {args.endpoint}: {exc}", file=sys.stderr)
        return 2
    print(render_feedback(reply, args.out_dir))
    return 1 if isinstance(reply, ErrorReply) else 0


def _eval(args: argparse.Namespace) -> int:
    clips = load_dataset(args.data_dir)
    if args.transmitter:
        client = ReceiverClient(args.transmitter)
        send = client.send
    else:
        send = transmitter_from_args(args).handle_request
    report = run_corpus(args.corpus, send, clips, args.report_out, nbar=args.nbar, workers=args.workers)
    for name in (
        "accurate_ratio_Y",
        "accurate_ratio_N",
        "accurate_ratio_YN",
        "success_rate",
        "frame_count_reduction_ratio",
        "data_size_reduction_ratio",
        "first_choice_tool_accuracy",
    ):
        value = getattr(report, name)
        print(f"{name:30s} {'n/a' if value is None else f'{value:.4f}'}")
    if report.failures:
        print(f"{len(report.failures)} requests failed", file=sys.stderr)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="semcom-client", description="Receiver client and evaluation harness.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask", help="send one request to a transmitter")
    ask.add_argument("--endpoint", default=f"127.0.0.1:{DEFAULT_PORT}", help="transmitter host:port")
    ask.add_argument("--clip", required=True)
    ask.add_argument("--text", required=True)
    ask.add_argument("--out-dir", type=Path, default=Path("received_frames"), help="where received frames are written")
    ask.set_defaults(func=_ask)

    ev = sub.add_parser("eval", help="score a labeled request corpus")
    ev.add_argument("--corpus", type=Path, required=True)
    ev.add_argument("--report-out", type=Path, required=True)
    ev.add_argument("--transmitter", help="host:port of a running transmitter (default: run one in-process)")
    ev.add_argument("--workers", type=int, default=1)
    add_transmitter_args(ev)
    ev.set_defaults(func=_eval)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
