"""Network observations and fingerprints.

A fingerprint is the set of wireless nodes a device currently sees, keyed
by (MAC, kind). It stands in for coordinates everywhere else in the
pipeline: rules match against it, the simulator produces it, the servers
ship it around. All types here are immutable values and every operation
is a pure function, so they can be shared freely across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum

MAC_RE = re.compile(r"^[0-9A-F]{2}(:[0-9A-F]{2}){5}$")
MAX_SSID_BYTES = 32
RSSI_MIN = -120
RSSI_MAX = 0

# Session freshness default; scans on mobile OSes are periodic, so anything
# older than one missed-scan window is treated as gone.
DEFAULT_TTL_MS = 30_000


class MalformedMac(ValueError):
    """Raised when a MAC address cannot be normalized."""


class NetworkKind(Enum):
    WIFI = "wifi"
    BLUETOOTH = "bluetooth"

    @classmethod
    def from_wire(cls, value: str) -> "NetworkKind":
        for kind in cls:
            if kind.value == value:
                return kind
        raise ValueError(f"unknown network kind: {value!r}")


def normalize_mac(raw: str) -> str:
    """Return the canonical colon-separated uppercase form of a MAC.

    Accepts colon-, dash-, or dot-grouped input as well as bare 12-hex
    strings. Idempotent on its own output.
    """
    if not isinstance(raw, str) or not raw:
        raise MalformedMac(f"not a MAC address: {raw!r}")
    stripped = raw.replace(":", "").replace("-", "").replace(".", "")
    if len(stripped) != 12 or not all(c in "0123456789abcdefABCDEF" for c in stripped):
        raise MalformedMac(f"not a MAC address: {raw!r}")
    upper = stripped.upper()
    return ":".join(upper[i : i + 2] for i in range(0, 12, 2))


@dataclass(frozen=True)
class NetworkId:
    """Identity of one network node: human-readable name plus hardware address."""

    ssid: str
    mac: str

    def __post_init__(self):
        if not MAC_RE.match(self.mac):
            raise MalformedMac(f"MAC not in canonical form: {self.mac!r}")
        if len(self.ssid.encode("utf-8")) > MAX_SSID_BYTES:
            raise ValueError(f"SSID longer than {MAX_SSID_BYTES} bytes: {self.ssid!r}")


@dataclass(frozen=True)
class NetworkObservation:
    """One sighting of a network node at a point in time."""

    id: NetworkId
    kind: NetworkKind
    rssi: int
    observed_at: int  # milliseconds since epoch

    def __post_init__(self):
        if not isinstance(self.rssi, int) or isinstance(self.rssi, bool):
            raise ValueError(f"RSSI must be an integer dBm, got {self.rssi!r}")
        if not RSSI_MIN <= self.rssi <= RSSI_MAX:
            raise ValueError(f"RSSI out of range [{RSSI_MIN}, {RSSI_MAX}]: {self.rssi}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.id.mac, self.kind.value)


def _sort_key(obs: NetworkObservation) -> tuple[str, str]:
    return (obs.kind.value, obs.id.mac)


@dataclass(frozen=True)
class Fingerprint:
    """The set of currently visible nodes, at most one per (MAC, kind).

    Observations are kept sorted by (kind, MAC) so iteration and
    serialization are deterministic.
    """

    observations: tuple[NetworkObservation, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.observations, key=_sort_key))
        seen = set()
        for obs in ordered:
            if obs.key in seen:
                raise ValueError(f"duplicate observation key {obs.key}")
            seen.add(obs.key)
        object.__setattr__(self, "observations", ordered)

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)


@dataclass(frozen=True)
class NetworkSelector:
    """Matches observations either by exact SSID or by MAC.

    Matching is kind-agnostic: a selector matches Wi-Fi and Bluetooth
    observations alike. SSID comparison is exact and case-sensitive, and
    an SSID selector never matches hidden (empty-name) networks.
    """

    ssid: str | None = None
    mac: str | None = None

    def __post_init__(self):
        if (self.ssid is None) == (self.mac is None):
            raise ValueError("selector needs exactly one of ssid or mac")
        if self.mac is not None:
            object.__setattr__(self, "mac", normalize_mac(self.mac))

    @classmethod
    def by_ssid(cls, ssid: str) -> "NetworkSelector":
        return cls(ssid=ssid)

    @classmethod
    def by_mac(cls, mac: str) -> "NetworkSelector":
        return cls(mac=mac)

    def matches(self, obs: NetworkObservation) -> bool:
        if self.mac is not None:
            return obs.id.mac == self.mac
        return self.ssid != "" and obs.id.ssid == self.ssid


def merge_observation(fp: Fingerprint, obs: NetworkObservation) -> Fingerprint:
    """Fold one observation into a fingerprint, newest timestamp winning.

    An observation strictly older than the stored one for the same
    (MAC, kind) key is ignored.
    """
    kept = []
    for existing in fp.observations:
        if existing.key == obs.key:
            if existing.observed_at > obs.observed_at:
                return fp
        else:
            kept.append(existing)
    kept.append(obs)
    return Fingerprint(tuple(kept))


def prune_stale(fp: Fingerprint, now: int, ttl_ms: int) -> Fingerprint:
    """Drop observations older than ttl_ms relative to now."""
    if ttl_ms <= 0:
        raise ValueError("ttl_ms must be positive")
    fresh = tuple(o for o in fp.observations if now - o.observed_at <= ttl_ms)
    if len(fresh) == len(fp.observations):
        return fp
    return Fingerprint(fresh)


def is_visible(fp: Fingerprint, sel: NetworkSelector) -> bool:
    """True iff some observation matches the selector."""
    return any(sel.matches(o) for o in fp.observations)


def observed_rssi(fp: Fingerprint, sel: NetworkSelector) -> int | None:
    """Strongest RSSI over matching observations, or None when nothing matches.

    Several access points may share an SSID; the strongest signal is the
    most useful proximity evidence, so it wins.
    """
    values = [o.rssi for o in fp.observations if sel.matches(o)]
    return max(values) if values else None


# --- wire format ---------------------------------------------------------
#
# The canonical JSON encoding is an array of objects with fixed key order
# SSID, MAC, RSSI, kind, ts, sorted by (kind, MAC). Serializing the same
# observation set always produces byte-identical output.


def to_wire(fp: Fingerprint) -> list[dict]:
    return [
        {
            "SSID": o.id.ssid,
            "MAC": o.id.mac,
            "RSSI": o.rssi,
            "kind": o.kind.value,
            "ts": o.observed_at,
        }
        for o in fp.observations
    ]


def to_canonical_json(fp: Fingerprint) -> str:
    return json.dumps(to_wire(fp), ensure_ascii=False, separators=(",", ":"))


def observation_from_wire(entry: dict, default_ts: int = 0) -> NetworkObservation:
    """Build one observation from its wire dict, normalizing the MAC."""
    if not isinstance(entry, dict):
        raise ValueError(f"observation must be an object, got {type(entry).__name__}")
    try:
        mac = normalize_mac(entry["MAC"])
    except KeyError:
        raise ValueError("observation missing MAC") from None
    ssid = entry.get("SSID", "")
    if not isinstance(ssid, str):
        raise ValueError(f"SSID must be text, got {ssid!r}")
    rssi = entry.get("RSSI")
    if not isinstance(rssi, int) or isinstance(rssi, bool):
        raise ValueError(f"RSSI must be an integer, got {rssi!r}")
    kind = NetworkKind.from_wire(entry.get("kind", "wifi"))
    ts = entry.get("ts", default_ts)
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise ValueError(f"ts must be an integer, got {ts!r}")
    return NetworkObservation(id=NetworkId(ssid=ssid, mac=mac), kind=kind, rssi=rssi, observed_at=ts)


def from_wire(data: list, default_ts: int = 0) -> Fingerprint:
    """Parse the canonical array form, merging duplicates by timestamp."""
    if not isinstance(data, list):
        raise ValueError("fingerprint wire form must be a JSON array")
    fp = Fingerprint()
    for entry in data:
        fp = merge_observation(fp, observation_from_wire(entry, default_ts=default_ts))
    return fp
