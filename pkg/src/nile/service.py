"""Stateless HTTP JSON service around the grader.

Endpoints:
    GET  /healthz      liveness probe
    GET  /v1/corpus    built-in exercise corpus
    POST /v1/parse     syntax + static checks only
    POST /v1/grade     full grading (GradeRequest -> GradeResponse)

Every response is JSON; requests are independent, no state is kept between
them.  Optionally appends one JSONL record per request to a log file.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .corpus import corpus_entries
from .grader import GradeRequest, grade
from .parser import ParseError, parse, render
from .syntax import Alphabet, validate


def handle_request(method: str, path: str, body: bytes | None) -> tuple[int, dict]:
    """Pure request handler; the HTTP layer is a thin shell around this."""
    if method == "GET" and path == "/healthz":
        return 200, {"status": "ok"}
    if method == "GET" and path == "/v1/corpus":
        return 200, {"entries": [
            {"id": e.id, "alphabet": e.alphabet, "format": e.format,
             "nileText": e.nile_text, "regexText": e.regex_text,
             "english": e.english, "german": e.german}
            for e in corpus_entries()]}
    if method == "POST" and path in ("/v1/parse", "/v1/grade"):
        try:
            data = json.loads((body or b"").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return 400, {"status": "error",
                         "diagnostics": [{"where": "body",
                                          "message": f"invalid JSON: {exc}"}]}
        if not isinstance(data, dict):
            return 400, {"status": "error",
                         "diagnostics": [{"where": "body",
                                          "message": "expected a JSON object"}]}
        if path == "/v1/parse":
            return 200, _parse_only(data)
        return 200, grade(GradeRequest.from_dict(data))
    return 404, {"status": "error",
                 "diagnostics": [{"where": "path",
                                  "message": f"no route {method} {path}"}]}


def _parse_only(data: dict) -> dict:
    text = data.get("text") or ""
    symbols = data.get("alphabet") or []
    try:
        alphabet = Alphabet(tuple(symbols))
    except ValueError as exc:
        return {"ok": False,
                "diagnostics": [{"where": "alphabet", "message": str(exc)}]}
    try:
        tree = parse(text, alphabet)
    except ParseError as exc:
        return {"ok": False,
                "diagnostics": [{"where": "text", "message": exc.message,
                                 "span": {"start": exc.span.start,
                                          "end": exc.span.end},
                                 "expected": exc.expected}]}
    diags = validate(tree, alphabet)
    if diags:
        return {"ok": False,
                "diagnostics": [{"where": "text", "message": d.message,
                                 "path": list(d.path)} for d in diags]}
    return {"ok": True, "canonical": render(tree), "diagnostics": []}


class _Handler(BaseHTTPRequestHandler):
    server_version = "nile-grader/0.1"
    log_path: str | None = None
    log_lock = threading.Lock()

    def _respond(self, method: str):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else None
        status, payload = handle_request(method, self.path, body)
        raw = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)
        self._log(method, status)

    def _log(self, method: str, status: int):
        if self.log_path is None:
            return
        record = {"ts": round(time.time(), 3), "method": method,
                  "path": self.path, "status": status}
        with self.log_lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")

    def do_GET(self):
        self._respond("GET")

    def do_POST(self):
        self._respond("POST")

    def log_message(self, fmt, *args):  # quiet the default stderr chatter
        pass


def make_server(port: int, log_path: str | None = None) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"log_path": log_path})
    return ThreadingHTTPServer(("0.0.0.0", port), handler)


def serve(port: int, log_path: str | None = None):
    server = make_server(port, log_path)
    try:
        server.serve_forever()
    finally:
        server.server_close()
