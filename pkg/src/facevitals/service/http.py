"""JSON-over-HTTP front end for :class:`StreamService`.

    POST   /v1/sessions                 201 {"session_id": ...}
    POST   /v1/sessions/{id}/frames     200 ack | 400 | 404 | 429
    GET    /v1/sessions/{id}/results    200 snapshot | 404
    DELETE /v1/sessions/{id}            200 summary | 404

Errors are returned as ``{"error": <type>, "message": ..., "field": ...}``.
"""

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import MalformedBatch, QueueFull, TooManySessions, UnknownSession
from .core import FrameBatch

log = logging.getLogger(__name__)

MAX_BODY = 64 * 1024 * 1024
_SESSION = re.compile(r"^/v1/sessions/([^/]+)$")
_FRAMES = re.compile(r"^/v1/sessions/([^/]+)/frames$")
_RESULTS = re.compile(r"^/v1/sessions/([^/]+)/results$")


class Handler(BaseHTTPRequestHandler):
    server_version = "facevitals/0.1"
    protocol_version = "HTTP/1.1"

    @property
    def service(self):
        return self.server.service

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status, body):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _error(self, status, exc, field=None):
        body = {"error": type(exc).__name__, "message": str(exc)}
        if field is not None:
            body["field"] = field
        self._send(status, body)

    def _body(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY:
            raise MalformedBatch("body", f"larger than {MAX_BODY} bytes")
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedBatch("body", f"invalid JSON: {exc}") from None

    def _dispatch(self, fn):
        try:
            fn()
        except MalformedBatch as exc:
            self._error(400, exc, exc.field)
        except UnknownSession as exc:
            self._error(404, exc)
        except QueueFull as exc:
            self._error(429, exc)
        except TooManySessions as exc:
            self._error(503, exc)
        except (ValueError, TypeError) as exc:
            self._error(400, exc)
        except Exception as exc:
            log.exception("request failed")
            self._error(500, exc)

    def do_POST(self):
        def run():
            if self.path == "/v1/sessions":
                body = self._body()
                if not isinstance(body, dict):
                    raise ValueError("session options must be a JSON object")
                sid = self.service.create_session(body)
                self._send(201, {"session_id": sid})
                return
            m = _FRAMES.match(self.path)
            if m:
                body = self._body()
                self.service._record(m.group(1))
                batch = FrameBatch.from_json(body, session_id=m.group(1))
                self._send(200, self.service.submit_batch(batch))
                return
            self._send(404, {"error": "NotFound", "message": self.path})
        self._dispatch(run)

    def do_GET(self):
        def run():
            m = _RESULTS.match(self.path)
            if m:
                self._send(200, self.service.poll_results(m.group(1)))
                return
            self._send(404, {"error": "NotFound", "message": self.path})
        self._dispatch(run)

    def do_DELETE(self):
        def run():
            m = _SESSION.match(self.path)
            if m:
                self._send(200, self.service.close_session(m.group(1)))
                return
            self._send(404, {"error": "NotFound", "message": self.path})
        self._dispatch(run)


class ServiceHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, service):
        super().__init__(address, Handler)
        self.service = service


def serve(service, host="127.0.0.1", port=8080, workers=1):
    """Start consumers and an HTTP server on a background thread.

    Returns the server; call ``shutdown_server(server)`` to stop both.
    """
    server = ServiceHTTPServer((host, port), service)
    service.start(workers)
    thread = threading.Thread(target=server.serve_forever, name="http", daemon=True)
    thread.start()
    server.thread = thread
    return server


def shutdown_server(server):
    server.shutdown()
    server.server_close()
    server.service.stop()
