"""The transmitter: plan, reflect, execute or fall back to frame selection.

Each REQUEST runs as an isolated session. Up to ``nbar`` plans are tried,
each with a tool not tried before in that session; the first plan the
reflector approves is executed and answered in text. When none is
approved the most relevant raw frames are sent instead.
"""

from __future__ import annotations

import argparse
import enum
import json
import logging
import select
import signal
import socket
import socketserver
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import toolbox as tb
from .dataset import AnnotatedClip, load_dataset
from .frame_selection import Limits, frame_selection_pipeline
from .llm_backend import (
    KINDS,
    Backend,
    BackendConfig,
    BackendError,
    DeterministicBackend,
    StubBackend,
    make_backend,
)
from .planning import (
    DEFAULT_JAM_THRESHOLD,
    DEFAULT_SAMPLES_PER_SECOND,
    PlanError,
    PlannerContext,
    ToolboxExhausted,
    analyze,
    generate_plan,
    sample_frames,
)
from .protocol import (
    ErrorReply,
    FeedbackFrames,
    FeedbackText,
    Message,
    ProtocolError,
    Request,
    TruncatedError,
    decode_message,
    encode_message,
)
from .reflection import NO, VerdictParseError, reflect
from .toolbox import ToolDescriptor, ToolError

logger = logging.getLogger(__name__)

DEFAULT_PORT = 7077
DEFAULT_NBAR = 3
FIXTURE_DIR = Path(__file__).parent / "fixtures"


class Phase(enum.Enum):
    PLANNING = "PLANNING"
    REFLECTING = "REFLECTING"
    EXECUTING = "EXECUTING"
    FRAME_SELECTION = "FRAME_SELECTION"
    DONE = "DONE"


_TRANSITIONS = {
    Phase.PLANNING: {Phase.REFLECTING, Phase.PLANNING, Phase.FRAME_SELECTION},
    Phase.REFLECTING: {Phase.EXECUTING, Phase.PLANNING, Phase.FRAME_SELECTION},
    Phase.EXECUTING: {Phase.DONE, Phase.PLANNING, Phase.FRAME_SELECTION},
    Phase.FRAME_SELECTION: {Phase.DONE},
    Phase.DONE: set(),
}


@dataclass
class SessionState:
    session_id: str
    request: str
    clip_id: str
    nbar: int
    n: int = 1
    excluded_tools: set[str] = field(default_factory=set)
    attempted_plans: list[str] = field(default_factory=list)
    phase: Phase = Phase.PLANNING
    failures: list[str] = field(default_factory=list)

    def enter(self, phase: Phase) -> None:
        if phase not in _TRANSITIONS[self.phase]:
            raise RuntimeError(f"illegal transition {self.phase.value} -> {phase.value}")
        self.phase = phase
        logger.info("session=%s phase=%s n=%d excluded=%d", self.session_id, phase.value, self.n, len(self.excluded_tools))


@dataclass(frozen=True)
class TransmitterConfig:
    nbar: int = DEFAULT_NBAR
    limits: Limits = Limits()
    backend: Backend = field(default_factory=DeterministicBackend)
    # Overrides ``backend`` for the reflection step only.
    reflection_backend: Optional[Backend] = None
    samples_per_second: float = DEFAULT_SAMPLES_PER_SECOND
    tau: float = tb.DEFAULT_TAU
    jam_threshold: float = DEFAULT_JAM_THRESHOLD


class Transmitter:
    def __init__(
        self,
        clips: Mapping[str, AnnotatedClip],
        config: TransmitterConfig = TransmitterConfig(),
        tools: Sequence[ToolDescriptor] | None = None,
    ):
        self.clips = dict(clips)
        self.config = config
        self.tools = tuple(tb.registry() if tools is None else tools)
        if not 1 <= config.nbar <= len(self.tools):
            raise ValueError(f"nbar must be between 1 and {len(self.tools)}, got {config.nbar}")

    def handle_request(self, request: Request) -> Message:
        reply, _ = self.run_session(request)
        return reply

    def run_session(self, request: Request) -> tuple[Message, Optional[SessionState]]:
        clip = self.clips.get(request.clip_id)
        if clip is None:
            return ErrorReply(request.session_id, "NO_CLIP", f"unknown clip {request.clip_id!r}"), None
        state = SessionState(request.session_id, request.text, request.clip_id, self.config.nbar)
        logger.info("session=%s phase=%s clip=%s", state.session_id, state.phase.value, clip.clip_id)
        try:
            return self._run(state, clip), state
        except Exception as exc:  # one reply per request, whatever happens
            logger.exception("session=%s failed", state.session_id)
            return ErrorReply(request.session_id, "INTERNAL", str(exc)), state

    def _run(self, state: SessionState, clip: AnnotatedClip) -> Message:
        cfg = self.config
        reflector = cfg.reflection_backend or cfg.backend
        while state.n <= state.nbar:
            if state.phase is not Phase.PLANNING:
                state.enter(Phase.PLANNING)
            ctx = PlannerContext(state.request, clip, frozenset(state.excluded_tools))
            try:
                plan = generate_plan(ctx, self.tools, cfg.backend)
            except ToolboxExhausted:
                break
            except (PlanError, BackendError) as exc:
                logger.warning("session=%s planning failed at n=%d: %s", state.session_id, state.n, exc)
                state.failures.append(f"planning: {exc}")
                state.n += 1
                continue
            state.attempted_plans.append(plan.raw)
            state.excluded_tools.add(plan.tool)

            state.enter(Phase.REFLECTING)
            try:
                verdict = reflect(state.request, plan, self.tools, reflector).verdict
            except (VerdictParseError, BackendError) as exc:
                logger.warning("session=%s reflection failed, counting as No: %s", state.session_id, exc)
                state.failures.append(f"reflection: {exc}")
                verdict = NO
            if verdict == NO:
                state.n += 1
                continue

            state.enter(Phase.EXECUTING)
            try:
                frames = sample_frames(state.request, clip, cfg.samples_per_second)
                result = tb.execute(plan.tool, clip, frames, cfg.tau)
                answer = analyze(state.request, plan, result, cfg.backend, cfg.jam_threshold)
            except (ToolError, BackendError) as exc:
                logger.warning("session=%s execution of %s failed, counting as No: %s", state.session_id, plan.tool, exc)
                state.failures.append(f"execution: {exc}")
                state.n += 1
                continue
            state.enter(Phase.DONE)
            return FeedbackText(state.session_id, answer, tuple(state.attempted_plans), plan.tool)

        state.enter(Phase.FRAME_SELECTION)
        selection = frame_selection_pipeline(
            state.request, clip, self.tools, cfg.backend, cfg.limits, cfg.samples_per_second, cfg.tau
        )
        frames = tuple((fid, clip.payload(fid)) for fid in selection.frame_ids)
        state.enter(Phase.DONE)
        return FeedbackFrames(
            state.session_id, selection.frame_ids, frames, selection.explanation, tuple(state.attempted_plans)
        )


# --- network service ------------------------------------------------------

class _SessionHandler(socketserver.BaseRequestHandler):
    server: "TransmitterServer"

    def handle(self) -> None:
        sock: socket.socket = self.request
        stream = sock.makefile("rb", buffering=0)
        try:
            while not self.server.stopping.is_set():
                ready, _, _ = select.select([sock], [], [], self.server.poll_interval)
                if not ready:
                    continue
                if not sock.recv(1, socket.MSG_PEEK):
                    break
                try:
                    msg = decode_message(stream)
                except TruncatedError:
                    break
                except ProtocolError as exc:
                    reply: Message = ErrorReply("unknown", "BAD_MESSAGE", str(exc))
                else:
                    if isinstance(msg, Request):
                        reply = self.server.transmitter.handle_request(msg)
                    else:
                        reply = ErrorReply(msg.session_id, "BAD_MESSAGE", f"transmitter only accepts REQUEST, got {msg.type}")
                sock.sendall(encode_message(reply))
        except OSError as exc:
            logger.info("connection from %s closed: %s", self.client_address, exc)
        finally:
            stream.close()


class TransmitterServer(socketserver.ThreadingTCPServer):
    """Threaded TCP front end; one thread per connection, one session per REQUEST."""

    allow_reuse_address = True
    daemon_threads = False
    block_on_close = True

    def __init__(self, transmitter: Transmitter, host: str = "127.0.0.1", port: int = DEFAULT_PORT, poll_interval: float = 0.2):
        self.transmitter = transmitter
        self.stopping = threading.Event()
        self.poll_interval = poll_interval
        super().__init__((host, port), _SessionHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, kwargs={"poll_interval": self.poll_interval}, daemon=True)
        thread.start()
        return thread

    def stop(self) -> None:
        """Stop accepting, let in-flight sessions finish, close idle connections."""
        self.stopping.set()
        self.shutdown()
        self.server_close()


def serve(transmitter: Transmitter, host: str = "0.0.0.0", port: int = DEFAULT_PORT) -> None:
    server = TransmitterServer(transmitter, host, port)
    stop = threading.Event()

    def _signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, _signal)
    signal.signal(signal.SIGTERM, _signal)
    server.start_background()
    logger.info("transmitter listening on %s:%d", host, server.port)
    try:
        stop.wait()
    finally:
        logger.info("shutting down")
        server.stop()


def build_backend(args: argparse.Namespace) -> Backend:
    config = BackendConfig.from_env(
        kind=args.backend,
        endpoint=args.endpoint,
        api_key=args.api_key,
        model=args.model,
        timeout=args.timeout,
        max_retries=args.max_retries,
    )
    if config.kind == "stub":
        script = json.loads(Path(args.stub_script).read_text()) if args.stub_script else []
        return StubBackend(script)
    return make_backend(config)


def add_transmitter_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data-dir", type=Path, default=FIXTURE_DIR, help="directory of clip JSON files")
    parser.add_argument("--nbar", type=int, default=DEFAULT_NBAR, choices=range(1, 9), metavar="{1..8}")
    parser.add_argument("--backend", choices=KINDS, default="deterministic")
    parser.add_argument("--max-frames", type=int, default=Limits().max_frames)
    parser.add_argument("--min-gap-seconds", type=float, default=Limits().min_gap_seconds)
    parser.add_argument("--endpoint", help="chat-completion URL (env SEMCOM_LLM_ENDPOINT)")
    parser.add_argument("--api-key", help="API key (env SEMCOM_LLM_KEY)")
    parser.add_argument("--model", help="model name (env SEMCOM_LLM_MODEL)")
    parser.add_argument("--timeout", type=float, default=None)
    parser.add_argument("--max-retries", type=int, default=None)
    parser.add_argument("--stub-script", help="JSON list of scripted completions for --backend stub")


def transmitter_from_args(args: argparse.Namespace) -> Transmitter:
    config = TransmitterConfig(
        nbar=args.nbar,
        limits=Limits(args.max_frames, args.min_gap_seconds),
        backend=build_backend(args),
    )
    return Transmitter(load_dataset(args.data_dir), config)


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="semcom-server", description="Run the transmitter service.")
    parser.add_argument("--host", default="0.0.0.0")
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    parser.add_argument("-v", "--verbose", action="store_true")
    add_transmitter_args(parser)
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    try:
        transmitter = transmitter_from_args(args)
        serve(transmitter, args.host, args.port)
    except OSError as exc:
        print(f"semcom-server: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
