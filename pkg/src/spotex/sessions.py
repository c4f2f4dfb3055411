"""Per-device session table for the DPI server.

Sessions are keyed by an opaque URL-safe token the client brings along;
the server never mints one. Idle sessions expire after session_ttl_ms.
Simulator-bound sessions carry their own logical clock (1 s per move) so
scan timestamps, and therefore response bodies, are reproducible.
"""

from __future__ import annotations

import re
import secrets
import threading
from dataclasses import dataclass, field

from .fingerprint import DEFAULT_TTL_MS, Fingerprint, NetworkObservation, merge_observation, prune_stale
from .venue import DevicePoint, Venue, scan

SESSION_TOKEN_RE = re.compile(r"^[A-Za-z0-9_-]{16,128}$")
DEFAULT_SESSION_TTL_MS = 600_000
SIM_CLOCK_STEP_MS = 1_000


def valid_token(token: str | None) -> bool:
    return token is not None and SESSION_TOKEN_RE.match(token) is not None


def new_token() -> str:
    return secrets.token_urlsafe(16)


@dataclass
class Session:
    token: str
    fingerprint: Fingerprint = field(default_factory=Fingerprint)
    sim_position: DevicePoint | None = None
    last_seen: int = 0
    sim_clock_ms: int = 0


class SessionStore:
    """Thread-safe token → Session table with idle expiry."""

    def __init__(
        self,
        session_ttl_ms: int = DEFAULT_SESSION_TTL_MS,
        observation_ttl_ms: int = DEFAULT_TTL_MS,
    ):
        self.session_ttl_ms = session_ttl_ms
        self.observation_ttl_ms = observation_ttl_ms
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}

    def _fresh(self, token: str, now: int) -> Session:
        session = self._sessions.get(token)
        if session is not None and now - session.last_seen > self.session_ttl_ms:
            del self._sessions[token]
            session = None
        if session is None:
            session = Session(token=token, last_seen=now)
            self._sessions[token] = session
        session.last_seen = now
        return session

    def fingerprint_for(self, token: str | None, now: int) -> Fingerprint:
        """Current pruned fingerprint; empty for unknown or invalid tokens.

        Simulator sessions are pruned against their logical clock, not the
        wall clock, so their observations never age out between moves.
        """
        if not valid_token(token):
            return Fingerprint()
        with self._lock:
            session = self._sessions.get(token)
            if session is None or now - session.last_seen > self.session_ttl_ms:
                return Fingerprint()
            session.last_seen = now
            prune_now = session.sim_clock_ms if session.sim_position is not None else now
            session.fingerprint = prune_stale(session.fingerprint, prune_now, self.observation_ttl_ms)
            return session.fingerprint

    def merge(self, token: str, observations: list[NetworkObservation], now: int) -> int:
        with self._lock:
            session = self._fresh(token, now)
            fp = session.fingerprint
            for obs in observations:
                fp = merge_observation(fp, obs)
            session.fingerprint = prune_stale(fp, now, self.observation_ttl_ms)
            return len(observations)

    def move(self, token: str, point: DevicePoint, venue: Venue, seed: int, now: int) -> Fingerprint:
        """Advance the session's logical clock, rescan, replace the fingerprint."""
        with self._lock:
            session = self._fresh(token, now)
            session.sim_clock_ms += SIM_CLOCK_STEP_MS
            session.sim_position = point
            session.fingerprint = scan(venue, point, session.sim_clock_ms, seed)
            return session.fingerprint
