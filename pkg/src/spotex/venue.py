"""Deterministic indoor radio model.

Log-distance path loss with per-floor attenuation:

    rssi = tx_ref - 10 * n * log10(max(d, 1m)) - faf * |floor delta|

where d is the 3-D distance, floors separated vertically by floor_height_m.
Noise, when enabled, is zero-mean gaussian seeded per (seed, venue, AP, time)
so each observation is reproducible regardless of scan order.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field

from .fingerprint import (
    RSSI_MAX,
    RSSI_MIN,
    Fingerprint,
    MalformedMac,
    NetworkId,
    NetworkKind,
    NetworkObservation,
    normalize_mac,
)

MAX_FLOOR = 63

DEFAULT_EXPONENT_N = 3.0
DEFAULT_FLOOR_ATTENUATION_DB = 15.0
DEFAULT_FLOOR_HEIGHT_M = 4.0
DEFAULT_DETECTION_THRESHOLD_DBM = -85
DEFAULT_NOISE_SIGMA_DB = 0.0
DEFAULT_TX_REF_DBM = -40


class VenueFormatError(ValueError):
    """Venue document violates the schema or a parameter range."""


class DuplicateAp(VenueFormatError):
    """Two APs share the same (MAC, kind) pair."""


class NonMonotonicPath(ValueError):
    """Walk timestamps must strictly increase."""


@dataclass(frozen=True)
class PathLossParams:
    exponent_n: float = DEFAULT_EXPONENT_N
    floor_attenuation_db: float = DEFAULT_FLOOR_ATTENUATION_DB
    floor_height_m: float = DEFAULT_FLOOR_HEIGHT_M
    detection_threshold_dbm: int = DEFAULT_DETECTION_THRESHOLD_DBM
    noise_sigma_db: float = DEFAULT_NOISE_SIGMA_DB

    def __post_init__(self):
        if not 1.5 <= self.exponent_n <= 6.0:
            raise VenueFormatError(f"exponent_n out of range [1.5, 6.0]: {self.exponent_n}")
        if not -120 <= self.detection_threshold_dbm <= -40:
            raise VenueFormatError(
                f"detection_threshold_dbm out of range [-120, -40]: {self.detection_threshold_dbm}"
            )
        if self.noise_sigma_db < 0:
            raise VenueFormatError(f"noise_sigma_db must be >= 0: {self.noise_sigma_db}")
        if self.floor_height_m <= 0:
            raise VenueFormatError(f"floor_height_m must be positive: {self.floor_height_m}")


@dataclass(frozen=True)
class AccessPointPlacement:
    id: NetworkId
    kind: NetworkKind
    x: float
    y: float
    floor: int
    tx_ref_dbm: int = DEFAULT_TX_REF_DBM

    def __post_init__(self):
        if not -60 <= self.tx_ref_dbm <= -20:
            raise VenueFormatError(f"tx_ref_dbm out of range [-60, -20]: {self.tx_ref_dbm}")
        if not 0 <= self.floor <= MAX_FLOOR:
            raise VenueFormatError(f"floor out of range [0, {MAX_FLOOR}]: {self.floor}")


@dataclass(frozen=True)
class DevicePoint:
    x: float
    y: float
    floor: int

    def __post_init__(self):
        if not 0 <= self.floor <= MAX_FLOOR:
            raise VenueFormatError(f"floor out of range [0, {MAX_FLOOR}]: {self.floor}")


@dataclass(frozen=True)
class Venue:
    name: str
    aps: tuple[AccessPointPlacement, ...]
    params: PathLossParams = field(default_factory=PathLossParams)

    def __post_init__(self):
        seen = set()
        for ap in self.aps:
            key = (ap.id.mac, ap.kind.value)
            if key in seen:
                raise DuplicateAp(f"duplicate AP {key}")
            seen.add(key)


def _require(condition: bool, message: str):
    if not condition:
        raise VenueFormatError(message)


def _number(obj: dict, key: str, default=None) -> float:
    value = obj.get(key, default)
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), f"{key} must be a number")
    return value


def load_venue(document: str) -> Venue:
    """Parse and validate the venue JSON document."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise VenueFormatError(f"venue document is not valid JSON: {exc}") from exc
    _require(isinstance(data, dict), "venue document must be a JSON object")
    name = data.get("name")
    _require(isinstance(name, str) and name != "", "venue name must be a non-empty string")

    raw_params = data.get("params", {})
    _require(isinstance(raw_params, dict), "params must be an object")
    params = PathLossParams(
        exponent_n=float(_number(raw_params, "exponent_n", DEFAULT_EXPONENT_N)),
        floor_attenuation_db=float(
            _number(raw_params, "floor_attenuation_db", DEFAULT_FLOOR_ATTENUATION_DB)
        ),
        floor_height_m=float(_number(raw_params, "floor_height_m", DEFAULT_FLOOR_HEIGHT_M)),
        detection_threshold_dbm=int(
            _number(raw_params, "detection_threshold_dbm", DEFAULT_DETECTION_THRESHOLD_DBM)
        ),
        noise_sigma_db=float(_number(raw_params, "noise_sigma_db", DEFAULT_NOISE_SIGMA_DB)),
    )

    raw_aps = data.get("aps")
    _require(isinstance(raw_aps, list), "aps must be an array")
    aps = []
    for i, raw in enumerate(raw_aps):
        _require(isinstance(raw, dict), f"aps[{i}] must be an object")
        ssid = raw.get("ssid", "")
        _require(isinstance(ssid, str), f"aps[{i}].ssid must be a string")
        mac = raw.get("mac")
        _require(isinstance(mac, str), f"aps[{i}].mac must be a string")
        kind_text = raw.get("kind", "wifi")
        _require(isinstance(kind_text, str), f"aps[{i}].kind must be a string")
        try:
            kind = NetworkKind.from_wire(kind_text)
            net_id = NetworkId(ssid=ssid, mac=normalize_mac(mac))
        except (MalformedMac, ValueError) as exc:
            raise VenueFormatError(f"aps[{i}]: {exc}") from exc
        floor = raw.get("floor", 0)
        _require(isinstance(floor, int) and not isinstance(floor, bool), f"aps[{i}].floor must be an integer")
        aps.append(
            AccessPointPlacement(
                id=net_id,
                kind=kind,
                x=float(_number(raw, "x")),
                y=float(_number(raw, "y")),
                floor=floor,
                tx_ref_dbm=int(_number(raw, "tx_ref_dbm", DEFAULT_TX_REF_DBM)),
            )
        )
    return Venue(name=name, aps=tuple(aps), params=params)


def venue_to_wire(venue: Venue) -> dict:
    return {
        "name": venue.name,
        "params": {
            "exponent_n": venue.params.exponent_n,
            "floor_attenuation_db": venue.params.floor_attenuation_db,
            "floor_height_m": venue.params.floor_height_m,
            "detection_threshold_dbm": venue.params.detection_threshold_dbm,
            "noise_sigma_db": venue.params.noise_sigma_db,
        },
        "aps": [
            {
                "ssid": ap.id.ssid,
                "mac": ap.id.mac,
                "kind": ap.kind.value,
                "x": ap.x,
                "y": ap.y,
                "floor": ap.floor,
                "tx_ref_dbm": ap.tx_ref_dbm,
            }
            for ap in venue.aps
        ],
    }


def predict_rssi(ap: AccessPointPlacement, p: DevicePoint, params: PathLossParams) -> float:
    """Noise-free received power at the device point, in dBm."""
    dz = (ap.floor - p.floor) * params.floor_height_m
    d = math.sqrt((ap.x - p.x) ** 2 + (ap.y - p.y) ** 2 + dz**2)
    d = max(d, 1.0)  # clamp below 1 m: no gain past the reference distance
    return (
        ap.tx_ref_dbm
        - 10.0 * params.exponent_n * math.log10(d)
        - params.floor_attenuation_db * abs(ap.floor - p.floor)
    )


def _noise_db(seed: int, venue_name: str, mac: str, now: int, sigma: float) -> float:
    if sigma <= 0:
        return 0.0
    material = f"{seed}|{venue_name}|{mac}|{now}".encode("utf-8")
    digest = hashlib.blake2b(material, digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big")).gauss(0.0, sigma)


def scan(venue: Venue, p: DevicePoint, now: int, seed: int) -> Fingerprint:
    """One synthetic scan: every AP whose rounded noisy RSSI clears the threshold."""
    params = venue.params
    observations = []
    for ap in venue.aps:
        noisy = predict_rssi(ap, p, params) + _noise_db(
            seed, venue.name, ap.id.mac, now, params.noise_sigma_db
        )
        rssi = round(noisy)
        if rssi < params.detection_threshold_dbm:
            continue
        rssi = min(max(rssi, RSSI_MIN), RSSI_MAX)
        observations.append(
            NetworkObservation(id=ap.id, kind=ap.kind, rssi=rssi, observed_at=now)
        )
    return Fingerprint(tuple(observations))


def walk(venue: Venue, path: list[tuple[DevicePoint, int]], seed: int) -> list[Fingerprint]:
    """Scan at each path point; timestamps must strictly increase."""
    previous = None
    for _, t in path:
        if previous is not None and t <= previous:
            raise NonMonotonicPath(f"timestamp {t} does not increase past {previous}")
        previous = t
    return [scan(venue, point, t, seed) for point, t in path]


def load_path(document: str) -> list[tuple[DevicePoint, int]]:
    """Parse the walk path file: a JSON array of {x, y, floor, t}."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise VenueFormatError(f"path document is not valid JSON: {exc}") from exc
    _require(isinstance(data, list), "path document must be a JSON array")
    path = []
    for i, raw in enumerate(data):
        _require(isinstance(raw, dict), f"path[{i}] must be an object")
        floor = raw.get("floor", 0)
        _require(isinstance(floor, int) and not isinstance(floor, bool), f"path[{i}].floor must be an integer")
        t = raw.get("t")
        _require(isinstance(t, int) and not isinstance(t, bool), f"path[{i}].t must be an integer")
        point = DevicePoint(x=float(_number(raw, "x")), y=float(_number(raw, "y")), floor=floor)
        path.append((point, t))
    return path
