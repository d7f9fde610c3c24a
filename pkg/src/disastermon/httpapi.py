"""Operator-facing HTTP API over the engine.

Plain stdlib threading server: read endpoints serve engine snapshots,
triage POSTs go through the engine's single-writer path, /events streams
lifecycle notifications as Server-Sent Events with sequence numbers, and
/fragments serves the Triple Pattern Fragments interface with content
negotiation (turtle-like text by default, JSON records on request).
"""

from __future__ import annotations

import json
import logging
import queue
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .candidates import InvalidTransition, UnknownCandidate
from .engine import MonitorEngine
from .rdf import TriplePattern, parse_pattern_param, render_fragment

log = logging.getLogger(__name__)

_CANDIDATE_PATH = re.compile(r"^/candidates/(\d+)$")
_TRIAGE_PATH = re.compile(r"^/candidates/(\d+)/(confirm|dismiss)$")
_CAP_PATH = re.compile(r"^/alerts/(\d+)/cap$")
_GALLERY_PATH = re.compile(r"^/galleries/(\d+)$")


def _json_bytes(payload) -> bytes:
    return (json.dumps(payload, ensure_ascii=False, sort_keys=True,
                       separators=(",", ":")) + "\n").encode()


class ApiHandler(BaseHTTPRequestHandler):
    engine: MonitorEngine  # injected by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        log.debug("%s - %s", self.address_string(), fmt % args)

    # --- helpers ------------------------------------------------------------

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, payload, status: int = 200) -> None:
        self._send(status, _json_bytes(payload), "application/json; charset=utf-8")

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status=status)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            parsed = json.loads(raw.decode("utf-8"))
            return parsed if isinstance(parsed, dict) else {}
        except (UnicodeDecodeError, json.JSONDecodeError):
            return {}

    # --- routing ---------------------------------------------------------------

    def do_GET(self) -> None:
        url = urlparse(self.path)
        path = url.path.rstrip("/") or "/"
        try:
            if path == "/healthz":
                self._send_json({"status": "ok"})
            elif path == "/candidates":
                self._send_json(self.engine.candidates_view())
            elif match := _CANDIDATE_PATH.match(path):
                self._send_json(self.engine.candidate_view(int(match.group(1))))
            elif path == "/alerts":
                self._send_json(self.engine.alerts_view())
            elif match := _CAP_PATH.match(path):
                xml = self.engine.cap_xml(int(match.group(1)))
                if xml is None:
                    self._send_error_json(404, "no CAP document for that id")
                else:
                    self._send(200, xml, "application/xml; charset=utf-8")
            elif match := _GALLERY_PATH.match(path):
                gallery = self.engine.gallery_view(int(match.group(1)))
                if gallery is None:
                    self._send_error_json(404, "no gallery for that candidate")
                else:
                    self._send_json(gallery)
            elif path == "/fragments":
                self._serve_fragment(url.query)
            elif path == "/events":
                self._serve_events()
            else:
                self._send_error_json(404, f"unknown path {path}")
        except UnknownCandidate as exc:
            self._send_error_json(404, str(exc))
        except ValueError as exc:
            self._send_error_json(400, str(exc))
        except (BrokenPipeError, ConnectionResetError):
            pass

    def do_POST(self) -> None:
        match = _TRIAGE_PATH.match(urlparse(self.path).path.rstrip("/"))
        if not match:
            self._send_error_json(404, f"unknown path {self.path}")
            return
        candidate_id = int(match.group(1))
        action = match.group(2)
        operator = self._read_body().get("operator")
        try:
            if action == "confirm":
                self.engine.confirm(candidate_id, operator)
            else:
                self.engine.dismiss(candidate_id, operator)
            self._send_json(self.engine.candidate_view(candidate_id))
        except UnknownCandidate as exc:
            self._send_error_json(404, str(exc))
        except InvalidTransition as exc:
            self._send_error_json(409, str(exc))

    # --- fragments -----------------------------------------------------------------

    def _serve_fragment(self, raw_query: str) -> None:
        params = parse_qs(raw_query, keep_blank_values=True)

        def param(name: str) -> str:
            values = params.get(name, [])
            return values[0] if values else ""

        pattern = TriplePattern(
            subject=parse_pattern_param(param("subject")),
            predicate=parse_pattern_param(param("predicate")),
            object=parse_pattern_param(param("object")),
        )
        page = int(param("page") or "1")
        fragment = self.engine.fragment(pattern, page)
        accept = self.headers.get("Accept", "")
        if "application/json" in accept:
            body = render_fragment(fragment, "records")
            self._send(200, body, "application/json; charset=utf-8")
        else:
            body = render_fragment(fragment, "turtle")
            self._send(200, body, "text/turtle; charset=utf-8")

    # --- SSE --------------------------------------------------------------------------

    def _serve_events(self) -> None:
        subscriber = self.engine.subscribe()
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(b": connected\n\n")
            self.wfile.flush()
            while not self.engine.closed.is_set():
                try:
                    message = subscriber.get(timeout=1.0)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                frame = (
                    f"id: {message['seq']}\n"
                    f"event: {message['event']}\n"
                    f"data: {json.dumps(message['data'], ensure_ascii=False, sort_keys=True)}\n\n"
                )
                self.wfile.write(frame.encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            self.engine.unsubscribe(subscriber)


def make_server(engine: MonitorEngine, host: str, port: int) -> ThreadingHTTPServer:
    handler = type("BoundApiHandler", (ApiHandler,), {"engine": engine})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve_in_background(engine: MonitorEngine, host: str, port: int) -> ThreadingHTTPServer:
    """Bind and serve on a daemon thread; bind failures raise immediately."""
    server = make_server(engine, host, port)
    thread = threading.Thread(target=server.serve_forever, name="http", daemon=True)
    thread.start()
    return server
