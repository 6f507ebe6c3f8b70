"""Telemetry record schema shared by the gateway, broker payloads and store.

The JSON serialization is canonical: fixed key order, no whitespace,
plain decimal numbers.  Byte-stable payloads are what make replay and
golden-file comparisons possible, so every producer must go through
`to_canonical_json`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

TELEMETRY_FIELDS = ("node_id", "seq", "ts", "temp_c", "lat", "lon", "battery_mv", "rssi_dbm", "gateway_id")


class TelemetryFormatError(ValueError):
    """Payload is not a valid telemetry record."""


@dataclass(frozen=True)
class TelemetryRecord:
    node_id: int
    seq: int
    ts: float
    temp_c: float
    lat: float
    lon: float
    battery_mv: int
    rssi_dbm: float
    gateway_id: str

    def __post_init__(self) -> None:
        if not (0 <= self.node_id <= 0xFFFF):
            raise TelemetryFormatError(f"node_id out of range: {self.node_id!r}")
        if not (0 <= self.seq <= 0xFFFF):
            raise TelemetryFormatError(f"seq out of range: {self.seq!r}")
        if not math.isfinite(self.ts):
            raise TelemetryFormatError(f"ts must be finite: {self.ts!r}")
        if not (-55.0 <= self.temp_c <= 125.0):
            raise TelemetryFormatError(f"temp_c outside sensor range [-55, 125]: {self.temp_c!r}")
        if not (self.rssi_dbm <= 0):
            raise TelemetryFormatError(f"rssi_dbm must be <= 0: {self.rssi_dbm!r}")
        if not (0 <= self.battery_mv <= 0xFFFF):
            raise TelemetryFormatError(f"battery_mv out of range: {self.battery_mv!r}")
        if not self.gateway_id:
            raise TelemetryFormatError("gateway_id must be non-empty")

    def dedup_key(self) -> tuple[int, int, str]:
        return (self.node_id, self.seq, self.gateway_id)


def to_canonical_json(record: TelemetryRecord) -> bytes:
    obj = {name: getattr(record, name) for name in TELEMETRY_FIELDS}
    return json.dumps(obj, separators=(",", ":")).encode("utf-8")


def record_from_json(payload: bytes | str) -> TelemetryRecord:
    """Parse one telemetry JSON object, strictly."""
    try:
        obj = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise TelemetryFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise TelemetryFormatError(f"expected a JSON object, got {type(obj).__name__}")
    missing = [name for name in TELEMETRY_FIELDS if name not in obj]
    if missing:
        raise TelemetryFormatError(f"missing fields: {', '.join(missing)}")
    extra = [name for name in obj if name not in TELEMETRY_FIELDS]
    if extra:
        raise TelemetryFormatError(f"unexpected fields: {', '.join(extra)}")
    try:
        return TelemetryRecord(
            node_id=int(obj["node_id"]),
            seq=int(obj["seq"]),
            ts=float(obj["ts"]),
            temp_c=float(obj["temp_c"]),
            lat=float(obj["lat"]),
            lon=float(obj["lon"]),
            battery_mv=int(obj["battery_mv"]),
            rssi_dbm=float(obj["rssi_dbm"]),
            gateway_id=str(obj["gateway_id"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, TelemetryFormatError):
            raise
        raise TelemetryFormatError(f"bad field value: {exc}") from exc


def telemetry_topic(prefix: str, gateway_id: str, node_id: int) -> str:
    return f"{prefix}/{gateway_id}/{node_id}/telemetry"
