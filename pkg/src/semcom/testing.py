"""Local chat-completion server for exercising the remote backend offline."""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterable, Optional, Union

# A reply is either completion text or an (HTTP status, body) pair.
Reply = Union[str, tuple[int, str]]


class ChatStubServer:
    """Serves canned chat-completion responses on 127.0.0.1.

    ``replies`` is consumed in order; once empty, ``responder`` (if given)
    computes a reply from the user prompt, else the server answers 503.
    ``delay`` seconds are slept before every reply.

    Usage::

        with ChatStubServer(["Video Sampler | Lane Number Detection | Analysis"]) as srv:
            backend = RemoteBackend(BackendConfig(kind="remote", endpoint=srv.url, api_key="k"))
    """

    def __init__(
        self,
        replies: Iterable[Reply] = (),
        responder: Optional[Callable[[str], Reply]] = None,
        delay: float = 0.0,
    ):
        self._replies = deque(replies)
        self._responder = responder
        self.delay = delay
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler_class())
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def _next_reply(self, body: dict) -> Reply:
        with self._lock:
            self.requests.append(body)
            if self._replies:
                return self._replies.popleft()
        if self._responder is not None:
            messages = body.get("messages") or [{}]
            return self._responder(messages[-1].get("content", ""))
        return (503, "no scripted reply left")

    def _handler_class(self):
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    body = {}
                body["_authorization"] = self.headers.get("Authorization")
                reply = outer._next_reply(body)
                if outer.delay:
                    time.sleep(outer.delay)
                if isinstance(reply, tuple):
                    status, text = reply
                    payload = json.dumps({"error": {"message": text}}).encode()
                else:
                    status = 200
                    payload = json.dumps(
                        {
                            "id": "stub",
                            "object": "chat.completion",
                            "model": body.get("model", ""),
                            "choices": [
                                {"index": 0, "finish_reason": "stop", "message": {"role": "assistant", "content": reply}}
                            ],
                        }
                    ).encode()
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        return Handler

    def start(self) -> "ChatStubServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "ChatStubServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
