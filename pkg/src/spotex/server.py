"""The DPI server: fingerprints over JSONP/JSON, rule evaluation, pages.

One small HTTP surface on one port:

    GET  /getNetworks?session=...&callback=...   fingerprint, JSONP or JSON
    POST /fingerprint?session=...                push a scanned fingerprint
    POST /sim/move?session=...                   move the simulated device
    GET  /evaluate?session=...&now=HH:MM         fired rules + snippets
    GET  /page?mode=filtered|annotated&session=  rendered content page
    GET|PUT /rules                               live rule set as DSL text
    GET  /venue                                  venue document for the UI

The live rule set is held as one (text, RuleSet) pair swapped by a single
assignment, so concurrent readers always see a complete set.
"""

from __future__ import annotations

import html as html_mod
import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from . import fingerprint as fp_mod
from . import sessions as sessions_mod
from .dsl import ParseError, parse_ruleset
from .rules import RenderMode, RuleSet, ValidationError, fire_rules, render_page
from .venue import DevicePoint, Venue, VenueFormatError, venue_to_wire

log = logging.getLogger("spotex.server")

CALLBACK_RE = re.compile(r"^[A-Za-z_$][A-Za-z0-9_$]*$")
NOW_RE = re.compile(r"^(\d{1,2}):(\d{2})$")
MAX_BODY_BYTES = 1 << 20

STATIC_FILES = {
    "/shim.js": "shim.js",
    "/console": "console.html",
    "/console.js": "console.js",
    "/console.css": "console.css",
}
STATIC_TYPES = {
    ".js": "application/javascript; charset=utf-8",
    ".html": "text/html; charset=utf-8",
    ".css": "text/css; charset=utf-8",
}


class ServerMode(Enum):
    SIM = "sim"
    PUSH = "push"


@dataclass
class ServerConfig:
    port: int = 8080
    mode: ServerMode = ServerMode.SIM
    rules_path: Path | None = None
    venue_path: Path | None = None
    session_ttl_ms: int = sessions_mod.DEFAULT_SESSION_TTL_MS
    timezone_offset_minutes: int = 0
    seed: int = 0
    static_dir: Path | None = None


def parse_now_param(text: str) -> int:
    """HH:MM → minutes of day; ValueError if malformed or out of range."""
    m = NOW_RE.match(text)
    if not m:
        raise ValueError(f"now must be HH:MM, got {text!r}")
    hours, minutes = int(m.group(1)), int(m.group(2))
    if hours > 23 or minutes > 59:
        raise ValueError(f"time of day out of range: {text}")
    return hours * 60 + minutes


class DpiServer:
    """Owns the live state; the HTTP handler delegates everything here."""

    def __init__(self, config: ServerConfig, ruleset_text: str, venue: Venue | None = None):
        if config.mode is ServerMode.SIM and venue is None:
            raise ValueError("SIM mode requires a venue")
        self.config = config
        self.venue = venue
        self._live: tuple[str, RuleSet] = (ruleset_text, parse_ruleset(ruleset_text))
        self.store = sessions_mod.SessionStore(session_ttl_ms=config.session_ttl_ms)
        self.httpd = ThreadingHTTPServer(("127.0.0.1", config.port), _Handler)
        self.httpd.daemon_threads = True
        self.httpd.dpi = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    # -- live state ------------------------------------------------------

    @property
    def live(self) -> tuple[str, RuleSet]:
        return self._live

    def swap_rules(self, text: str) -> RuleSet:
        """Parse, persist, then publish; raises before touching live state."""
        ruleset = parse_ruleset(text)
        if self.config.rules_path is not None:
            self.config.rules_path.write_text(text, encoding="utf-8")
        self._live = (text, ruleset)
        return ruleset

    def now_minutes(self) -> int:
        utc_minutes = int(time.time() // 60)
        return (utc_minutes + self.config.timezone_offset_minutes) % 1440

    @staticmethod
    def wall_ms() -> int:
        return int(time.time() * 1000)

    # -- lifecycle ---------------------------------------------------------

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self):
        self._thread = threading.Thread(
            target=lambda: self.httpd.serve_forever(poll_interval=0.05), daemon=True
        )
        self._thread.start()

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def serve_forever(self):
        self.httpd.serve_forever()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "spotex-dpi"

    @property
    def dpi(self) -> DpiServer:
        return self.server.dpi  # type: ignore[attr-defined]

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        log.debug("%s - %s", self.address_string(), format % args)

    # -- response helpers --------------------------------------------------

    def _send_bytes(self, status: int, body: bytes, content_type: str):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, obj):
        body = json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
        self._send_bytes(status, body, "application/json")

    def _send_error_json(self, status: int, message: str):
        self._send_json(status, {"error": message})

    def _read_body(self) -> bytes | None:
        length_text = self.headers.get("Content-Length")
        if length_text is None:
            self._send_error_json(411, "Content-Length required")
            return None
        try:
            length = int(length_text)
        except ValueError:
            self._send_error_json(400, "bad Content-Length")
            return None
        if length < 0 or length > MAX_BODY_BYTES:
            self._send_error_json(413, "body too large")
            return None
        return self.rfile.read(length)

    def _query(self) -> dict[str, str]:
        parsed = parse_qs(urlsplit(self.path).query, keep_blank_values=True)
        return {k: v[0] for k, v in parsed.items()}

    def _route(self) -> str:
        return urlsplit(self.path).path

    # -- HTTP methods --------------------------------------------------------

    def do_GET(self):
        route = self._route()
        params = self._query()
        if route == "/getNetworks":
            self.get_networks(params)
        elif route == "/evaluate":
            self.get_evaluate(params)
        elif route == "/page":
            self.get_page(params)
        elif route == "/rules":
            text, _ = self.dpi.live
            self._send_bytes(200, text.encode("utf-8"), "text/plain; charset=utf-8")
        elif route == "/venue":
            if self.dpi.venue is None:
                self._send_error_json(404, "no venue configured")
            else:
                self._send_json(200, venue_to_wire(self.dpi.venue))
        elif route in STATIC_FILES:
            self.get_static(route)
        else:
            self._send_error_json(404, f"no such resource: {route}")

    def do_POST(self):
        route = self._route()
        params = self._query()
        if route == "/fingerprint":
            self.post_fingerprint(params)
        elif route == "/sim/move":
            self.post_sim_move(params)
        else:
            self._send_error_json(404, f"no such resource: {route}")

    def do_PUT(self):
        if self._route() == "/rules":
            self.put_rules()
        else:
            self._send_error_json(404, f"no such resource: {self._route()}")

    # -- endpoints -------------------------------------------------------

    def get_networks(self, params: dict[str, str]):
        callback = params.get("callback")
        if callback is not None and not CALLBACK_RE.match(callback):
            self._send_error_json(400, "callback is not a valid identifier")
            return
        fp = self.dpi.store.fingerprint_for(params.get("session"), self.dpi.wall_ms())
        payload = fp_mod.to_canonical_json(fp)
        if callback is not None:
            body = f"{callback}({payload});".encode("utf-8")
            self._send_bytes(200, body, "application/javascript")
        else:
            self._send_bytes(200, payload.encode("utf-8"), "application/json")

    def post_fingerprint(self, params: dict[str, str]):
        if self.dpi.config.mode is not ServerMode.PUSH:
            self._send_error_json(409, "fingerprint push requires push mode")
            return
        token = params.get("session")
        if not sessions_mod.valid_token(token):
            self._send_error_json(400, "invalid session token")
            return
        body = self._read_body()
        if body is None:
            return
        now = self.dpi.wall_ms()
        try:
            data = json.loads(body.decode("utf-8"))
            if not isinstance(data, list):
                raise ValueError("fingerprint body must be a JSON array")
            observations = [fp_mod.observation_from_wire(entry, default_ts=now) for entry in data]
        except (ValueError, UnicodeDecodeError) as exc:
            self._send_error_json(400, f"malformed fingerprint: {exc}")
            return
        merged = self.dpi.store.merge(token, observations, now)
        self._send_json(200, {"merged": merged})

    def post_sim_move(self, params: dict[str, str]):
        if self.dpi.config.mode is not ServerMode.SIM:
            self._send_error_json(409, "sim move requires sim mode")
            return
        token = params.get("session")
        if not sessions_mod.valid_token(token):
            self._send_error_json(400, "invalid session token")
            return
        body = self._read_body()
        if body is None:
            return
        try:
            data = json.loads(body.decode("utf-8"))
            if not isinstance(data, dict):
                raise ValueError("move body must be a JSON object")
            x, y, floor = data.get("x"), data.get("y"), data.get("floor", 0)
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (x, y)):
                raise ValueError("x and y must be numbers")
            if not isinstance(floor, int) or isinstance(floor, bool):
                raise ValueError("floor must be an integer")
            point = DevicePoint(x=float(x), y=float(y), floor=floor)
        except (ValueError, UnicodeDecodeError, VenueFormatError) as exc:
            self._send_error_json(400, f"malformed point: {exc}")
            return
        fp = self.dpi.store.move(token, point, self.dpi.venue, self.dpi.config.seed, self.dpi.wall_ms())
        self._send_bytes(200, fp_mod.to_canonical_json(fp).encode("utf-8"), "application/json")

    def _session_now(self, params: dict[str, str]) -> tuple | None:
        now_text = params.get("now")
        if now_text is not None:
            try:
                now = parse_now_param(now_text)
            except ValueError as exc:
                self._send_error_json(400, str(exc))
                return None
        else:
            now = self.dpi.now_minutes()
        fp = self.dpi.store.fingerprint_for(params.get("session"), self.dpi.wall_ms())
        return fp, now

    def get_evaluate(self, params: dict[str, str]):
        pair = self._session_now(params)
        if pair is None:
            return
        fp, now = pair
        _, ruleset = self.dpi.live
        result = fire_rules(ruleset, fp, now)
        self._send_json(
            200,
            {
                "fired": list(result.fired_rule_ids),
                "snippets": [{"id": s.id, "title": s.title, "html": s.html} for s in result.snippets],
            },
        )

    def get_page(self, params: dict[str, str]):
        mode_text = params.get("mode", "filtered")
        try:
            mode = RenderMode(mode_text)
        except ValueError:
            self._send_error_json(400, f"mode must be filtered or annotated, got {mode_text!r}")
            return
        pair = self._session_now(params)
        if pair is None:
            return
        fp, now = pair
        _, ruleset = self.dpi.live
        result = fire_rules(ruleset, fp, now)
        content = render_page(ruleset, result, mode)
        session = params.get("session", "")
        title = self.dpi.venue.name if self.dpi.venue is not None else "spotex"
        head = [
            '<meta charset="utf-8">',
            f"<title>{html_mod.escape(title)}</title>",
        ]
        if mode is RenderMode.ANNOTATED:
            head.append(f'<meta name="spotex-session" content="{html_mod.escape(session, quote=True)}">')
            head.append('<script src="/shim.js" defer></script>')
        document = (
            "<!doctype html>\n<html>\n<head>\n"
            + "\n".join(head)
            + '\n</head>\n<body>\n<main id="content">\n'
            + content
            + "\n</main>\n</body>\n</html>\n"
        )
        self._send_bytes(200, document.encode("utf-8"), "text/html; charset=utf-8")

    def put_rules(self):
        body = self._read_body()
        if body is None:
            return
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError as exc:
            self._send_error_json(400, f"rules must be UTF-8 text: {exc}")
            return
        try:
            ruleset = self.dpi.swap_rules(text)
        except ParseError as exc:
            self._send_json(
                422, {"error": exc.message, "line": exc.line, "column": exc.column}
            )
            return
        except ValidationError as exc:
            self._send_json(422, {"error": str(exc)})
            return
        self._send_json(200, {"rules": len(ruleset.rules), "snippets": len(ruleset.snippets)})

    def get_static(self, route: str):
        static_dir = self.dpi.config.static_dir
        if static_dir is not None:
            target = static_dir / STATIC_FILES[route]
            if target.is_file():
                body = target.read_bytes()
                self._send_bytes(200, body, STATIC_TYPES[target.suffix])
                return
        self._send_error_json(404, f"static asset not available: {route}")
