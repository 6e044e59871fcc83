"""JSON HTTP service over the analyzer and the cycle model.

Stateless by construction: every request parses its own prototxt and
builds request-local reports, so concurrent requests never share mutable
state. Simulation stays CLI-only; the service answers only the fast pure
queries the web UI needs (analyze, estimate, validate, presets).

Error contract: domain failures answer 400 with {"error": {code,
message, span?}}; requests without Content-Length answer 411; bodies
over 1 MiB answer 413. All payloads are UTF-8 JSON rendered by the same
serializer the CLI uses.
"""

import json
import os
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import accel, errors, ir, jsonio, perf, presets, prototxt

MAX_BODY_BYTES = 1 << 20

_CTYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".json": "application/json; charset=utf-8",
    ".map": "application/json; charset=utf-8",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


def _want_prototxt(doc):
    text = doc.get("prototxt")
    if not isinstance(text, str):
        raise ValueError('request needs a string "prototxt" field')
    return text


def _api_analyze(doc):
    graph = prototxt.parse(_want_prototxt(doc))
    return jsonio.analysis_doc(graph)


def _api_estimate(doc):
    graph = prototxt.parse(_want_prototxt(doc))
    scenario = jsonio.scenario_from_json(doc.get("scenario"))
    net = accel.compile_network(graph)
    return jsonio.estimate_doc(perf.estimate_network(net, scenario=scenario))


def _api_validate(doc):
    graph = prototxt.parse(_want_prototxt(doc))
    return {"diagnostics": [d.to_json() for d in ir.validate(graph)]}


_POST_ROUTES = {
    "/api/analyze": _api_analyze,
    "/api/estimate": _api_estimate,
    "/api/validate": _api_validate,
}


class ApiHandler(BaseHTTPRequestHandler):
    server_version = "znq/0.1"
    protocol_version = "HTTP/1.1"
    static_dir = None

    def log_message(self, fmt, *args):
        if os.environ.get("ZNQ_HTTP_LOG"):
            super().log_message(fmt, *args)

    def _send(self, status, body, ctype="application/json; charset=utf-8"):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status, doc):
        self._send(status, jsonio.dumps(doc).encode("utf-8"))

    def _send_error_doc(self, status, code, message, **extra):
        err = {"code": code, "message": message}
        err.update(extra)
        self._send_json(status, {"error": err})

    def do_OPTIONS(self):
        self._send(204, b"")

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        if path == "/api/presets":
            doc = {"presets": {name: presets.load_preset(name)
                               for name in presets.preset_names()}}
            self._send_json(200, doc)
            return
        self._serve_static(path)

    def do_POST(self):
        path = self.path.split("?", 1)[0]
        route = _POST_ROUTES.get(path)
        if route is None:
            self._send_error_doc(404, "NotFound", "no such endpoint %r" % path)
            return
        length = self.headers.get("Content-Length")
        if length is None:
            self.close_connection = True
            self._send_error_doc(411, "LengthRequired",
                                 "Content-Length header is required")
            return
        try:
            n = int(length)
        except ValueError:
            self.close_connection = True
            self._send_error_doc(400, "BadRequest", "bad Content-Length")
            return
        if n > MAX_BODY_BYTES:
            self.close_connection = True
            self._send_error_doc(413, "PayloadTooLarge",
                                 "body exceeds %d bytes" % MAX_BODY_BYTES)
            return
        body = self.rfile.read(n)
        try:
            doc = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            self._send_error_doc(400, "BadRequest", "invalid JSON: %s" % e)
            return
        if not isinstance(doc, dict):
            self._send_error_doc(400, "BadRequest",
                                 "request body must be a JSON object")
            return
        try:
            self._send_json(200, route(doc))
        except errors.ZnqError as e:
            self._send_json(400, jsonio.error_doc(e))
        except ValueError as e:
            self._send_error_doc(400, "BadRequest", str(e))

    def _serve_static(self, path):
        root = self.static_dir
        if root is None:
            if path == "/":
                doc = {"service": "znq", "endpoints": sorted(_POST_ROUTES)
                       + ["/api/presets"]}
                self._send_json(200, doc)
            else:
                self._send_error_doc(404, "NotFound", "no such path %r" % path)
            return
        rel = path.lstrip("/") or "index.html"
        root = os.path.realpath(root)
        full = os.path.realpath(os.path.join(root, rel))
        if not (full == root or full.startswith(root + os.sep)):
            self._send_error_doc(404, "NotFound", "no such path %r" % path)
            return
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            self._send_error_doc(404, "NotFound", "no such path %r" % path)
            return
        ext = os.path.splitext(full)[1].lower()
        with open(full, "rb") as f:
            data = f.read()
        self._send(200, data, _CTYPES.get(ext, "application/octet-stream"))


def make_server(bind="127.0.0.1", port=8177, static_dir=None):
    """Bound, unstarted server; call serve_forever() on it."""
    if static_dir is None:
        static_dir = os.environ.get("ZNQ_STATIC_DIR") or None
    handler = type("BoundApiHandler", (ApiHandler,),
                   {"static_dir": static_dir})

    class Server(ThreadingHTTPServer):
        daemon_threads = True

    return Server((bind, port), handler)
