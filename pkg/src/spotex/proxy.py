"""Forward HTTP proxy that tags outgoing requests with the session fingerprint.

A request carrying an X-Spotex-Session header gets one extra header,
X-Network-Fingerprint: base64 of the canonical fingerprint JSON fetched
from the DPI server. Everything else passes through untouched (modulo
hop-by-hop headers). A DPI outage only drops the extra header; it never
blocks traffic.
"""

from __future__ import annotations

import base64
import http.client
import json
import logging
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlsplit

from .fingerprint import Fingerprint, from_wire, to_canonical_json
from .sessions import valid_token

log = logging.getLogger("spotex.proxy")

FINGERPRINT_HEADER = "X-Network-Fingerprint"
SESSION_HEADER = "X-Spotex-Session"
MAX_HEADER_BYTES = 8 * 1024
DPI_TIMEOUT_S = 3.0
UPSTREAM_TIMEOUT_S = 30.0

# RFC 7230 hop-by-hop set, plus the de facto Proxy-Connection.
HOP_BY_HOP = {
    "connection",
    "keep-alive",
    "proxy-authenticate",
    "proxy-authorization",
    "proxy-connection",
    "te",
    "trailers",
    "trailer",
    "transfer-encoding",
    "upgrade",
}


def encode_fingerprint_header(fp: Fingerprint) -> str:
    """Base64 of the canonical JSON, truncated to the strongest observations.

    When the encoded value would exceed 8 KiB, observations are dropped
    weakest-first until it fits; ties break on (kind, MAC) so truncation
    stays deterministic.
    """
    value = base64.b64encode(to_canonical_json(fp).encode("utf-8")).decode("ascii")
    if len(value) <= MAX_HEADER_BYTES:
        return value
    ranked = sorted(fp, key=lambda o: (-o.rssi, o.kind.value, o.id.mac))
    keep = len(ranked) - 1
    while keep > 0:
        candidate = Fingerprint(tuple(ranked[:keep]))
        value = base64.b64encode(to_canonical_json(candidate).encode("utf-8")).decode("ascii")
        if len(value) <= MAX_HEADER_BYTES:
            return value
        keep -= 1
    return base64.b64encode(b"[]").decode("ascii")


def decode_fingerprint_header(value: str) -> Fingerprint:
    return from_wire(json.loads(base64.b64decode(value, validate=True).decode("utf-8")))


@dataclass
class ProxyConfig:
    listen_port: int = 8888
    dpi_url: str = "http://127.0.0.1:8080"
    cache_ttl_ms: int = 0


class ProxyServer:
    def __init__(self, config: ProxyConfig):
        self.config = config
        self._cache_lock = threading.Lock()
        self._cache: dict[str, tuple[int, str | None]] = {}
        self.httpd = ThreadingHTTPServer(("127.0.0.1", config.listen_port), _ProxyHandler)
        self.httpd.daemon_threads = True
        self.httpd.proxy = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

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

    # -- enrichment ------------------------------------------------------

    def header_for_session(self, token: str) -> str | None:
        """Fingerprint header value for the session, or None to omit.

        Fail-open: any DPI hiccup, empty fingerprint, or bad payload means
        no header, never an error for the proxied request.
        """
        now = int(time.time() * 1000)
        if self.config.cache_ttl_ms > 0:
            with self._cache_lock:
                hit = self._cache.get(token)
                if hit is not None and hit[0] > now:
                    return hit[1]
        value = self._fetch_header(token)
        if self.config.cache_ttl_ms > 0:
            with self._cache_lock:
                self._cache[token] = (now + self.config.cache_ttl_ms, value)
        return value

    def _fetch_header(self, token: str) -> str | None:
        split = urlsplit(self.config.dpi_url)
        try:
            conn = http.client.HTTPConnection(split.hostname, split.port or 80, timeout=DPI_TIMEOUT_S)
            try:
                conn.request("GET", f"/getNetworks?session={token}")
                resp = conn.getresponse()
                body = resp.read()
            finally:
                conn.close()
            if resp.status != 200:
                return None
            fp = from_wire(json.loads(body.decode("utf-8")))
        except (OSError, ValueError) as exc:
            log.debug("DPI fetch failed for session %s: %s", token, exc)
            return None
        if len(fp) == 0:
            return None
        return encode_fingerprint_header(fp)


class _ProxyHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "spotex-proxy"

    @property
    def proxy(self) -> ProxyServer:
        return self.server.proxy  # type: ignore[attr-defined]

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        log.debug("%s - %s", self.address_string(), format % args)

    def _send_simple(self, status: int, obj):
        body = json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _target(self) -> tuple[str, int, str] | None:
        """Resolve (host, port, origin-form path) for the upstream hop."""
        if self.path.startswith("http://"):
            split = urlsplit(self.path)
            path = split.path or "/"
            if split.query:
                path += "?" + split.query
            return split.hostname, split.port or 80, path
        host = self.headers.get("Host")
        if host is None:
            return None
        split = urlsplit(f"//{host}")
        return split.hostname, split.port or 80, self.path

    def _forward(self):
        target = self._target()
        if target is None:
            self._send_simple(400, {"error": "absolute-form request or Host header required"})
            return
        host, port, path = target

        length_text = self.headers.get("Content-Length")
        body = b""
        if length_text is not None:
            try:
                body = self.rfile.read(int(length_text))
            except ValueError:
                self._send_simple(400, {"error": "bad Content-Length"})
                return
        elif "chunked" in self.headers.get("Transfer-Encoding", "").lower():
            self._send_simple(411, {"error": "chunked request bodies are not supported"})
            return

        dropped = {h.strip().lower() for h in self.headers.get("Connection", "").split(",") if h.strip()}
        headers: list[tuple[str, str]] = []
        for name, value in self.headers.items():
            if name.lower() in HOP_BY_HOP or name.lower() in dropped:
                continue
            headers.append((name, value))
        if not any(name.lower() == "host" for name, _ in headers):
            headers.append(("Host", f"{host}:{port}" if port != 80 else host))

        token = self.headers.get(SESSION_HEADER)
        if valid_token(token):
            enrichment = self.proxy.header_for_session(token)
            if enrichment is not None:
                headers.append((FINGERPRINT_HEADER, enrichment))

        try:
            conn = http.client.HTTPConnection(host, port, timeout=UPSTREAM_TIMEOUT_S)
            try:
                conn.putrequest(self.command, path, skip_host=True, skip_accept_encoding=True)
                for name, value in headers:
                    conn.putheader(name, value)
                if body and not any(n.lower() == "content-length" for n, _ in headers):
                    conn.putheader("Content-Length", str(len(body)))
                conn.endheaders(body if body else None)
                resp = conn.getresponse()
                resp_body = resp.read()
                resp_headers = resp.getheaders()
            finally:
                conn.close()
        except OSError as exc:
            self._send_simple(502, {"error": f"upstream unreachable: {exc}"})
            return

        resp_dropped = {
            h.strip().lower()
            for name, value in resp_headers
            if name.lower() == "connection"
            for h in value.split(",")
            if h.strip()
        }
        self.send_response(resp.status, resp.reason)
        for name, value in resp_headers:
            lower = name.lower()
            if lower in HOP_BY_HOP or lower in resp_dropped or lower == "content-length":
                continue
            self.send_header(name, value)
        self.send_header("Content-Length", str(len(resp_body)))
        self.end_headers()
        self.wfile.write(resp_body)

    do_GET = _forward
    do_POST = _forward
    do_PUT = _forward
    do_DELETE = _forward
    do_HEAD = _forward
    do_PATCH = _forward
    do_OPTIONS = _forward
