"""Radio-to-MQTT bridge: channel reception, dedup, JSON telemetry publish.

The channel step applies the path-loss model per transmission, resolves
pure-ALOHA style overlaps with a capture margin, and makes the final
sensitivity decision with per-node shadowing.  Surviving frames are
deduplicated against a bounded per-node window and published as
canonical JSON through the gateway's MQTT client session.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from . import pathloss
from .frames import LoraFrame
from .geo import LatLon, haversine_m, validate_position
from .mqtt.session import MqttClientSession, SessionActions
from .nodes import Transmission
from .pathloss import PathLossModel, RadioParams
from .telemetry import TelemetryRecord, telemetry_topic, to_canonical_json

DEDUP_WINDOW = 1024

RngSource = random.Random | Callable[[int], random.Random]


@dataclass
class GatewayConfig:
    gateway_id: str
    position: LatLon
    radio: RadioParams = field(default_factory=RadioParams)
    broker_address: tuple[str, int] | None = None
    topic_prefix: str = "marine/v1"
    qos: int = 1

    def __post_init__(self) -> None:
        if not self.gateway_id:
            raise ValueError("gateway_id must be non-empty")
        if "+" in self.topic_prefix or "#" in self.topic_prefix:
            raise ValueError(f"topic_prefix may not contain wildcards: {self.topic_prefix!r}")
        if self.qos not in (0, 1):
            raise ValueError(f"qos must be 0 or 1, got {self.qos!r}")
        validate_position(self.position, "gateway.position")


@dataclass
class ChannelOutcome:
    delivered: list[tuple[Transmission, float]] = field(default_factory=list)
    lost_rssi: int = 0
    lost_collision: int = 0


def _rng_for(rng: RngSource, node_id: int) -> random.Random:
    return rng(node_id) if callable(rng) else rng


def _overlaps(a: Transmission, b: Transmission) -> bool:
    return a.start_s < b.end_s and b.start_s < a.end_s


def channel_deliver(
    transmissions: list[Transmission],
    gateway: GatewayConfig,
    model: PathLossModel,
    rng: RngSource,
    extra_loss_db: float = 0.0,
    rivals: list[Transmission] | None = None,
) -> ChannelOutcome:
    """Decide the fate of each transmission at the gateway's antenna.

    `transmissions` must be sorted by start time.  Overlapping frames
    collide; a frame survives a collision only when its RSSI exceeds
    every overlapping rival's by at least the capture threshold.
    Collision survivors (and clean frames) still face the shadowed
    sensitivity decision.  `rng` is a single random source or a
    per-node-id factory.  `rivals`, when given, is the superset of
    in-flight transmissions to test overlaps against.
    """
    field_ = rivals if rivals is not None else transmissions
    rssi_by_id = {id(t): pathloss.rssi_at(model, haversine_m(gateway.position, t.position)) - extra_loss_db
                  for t in field_}
    for t in transmissions:
        if id(t) not in rssi_by_id:
            rssi_by_id[id(t)] = pathloss.rssi_at(model, haversine_m(gateway.position, t.position)) - extra_loss_db

    outcome = ChannelOutcome()
    capture = gateway.radio.capture_threshold_db
    for t in transmissions:
        rssi = rssi_by_id[id(t)]
        overlapping = [r for r in field_ if r is not t and _overlaps(t, r)]
        if overlapping and any(rssi - rssi_by_id[id(r)] < capture for r in overlapping):
            outcome.lost_collision += 1
            continue
        if not pathloss.receive_decision(rssi, gateway.radio, _rng_for(rng, t.frame.node_id)):
            outcome.lost_rssi += 1
            continue
        outcome.delivered.append((t, rssi))
    return outcome


class DedupState:
    """Sliding window of recently seen (node_id, seq) pairs, 1024 per node."""

    def __init__(self, window: int = DEDUP_WINDOW) -> None:
        self.window = window
        self._recent: dict[int, deque[int]] = {}
        self._seen: dict[int, set[int]] = {}

    def seen_before(self, node_id: int, seq: int) -> bool:
        """Record (node_id, seq); True when it was already in the window."""
        seen = self._seen.setdefault(node_id, set())
        if seq in seen:
            return True
        recent = self._recent.setdefault(node_id, deque())
        recent.append(seq)
        seen.add(seq)
        if len(recent) > self.window:
            seen.discard(recent.popleft())
        return False


def bridge_frame(
    frame: LoraFrame,
    rssi_dbm: float,
    now: float,
    dedup: DedupState,
    gateway_id: str,
) -> TelemetryRecord | None:
    """Convert one decoded frame to a telemetry record, or None if duplicate."""
    if dedup.seen_before(frame.node_id, frame.seq):
        return None
    return TelemetryRecord(
        node_id=frame.node_id,
        seq=frame.seq,
        ts=now,
        temp_c=frame.temp_centi_c / 100.0,
        lat=frame.lat_e7 / 1e7,
        lon=frame.lon_e7 / 1e7,
        battery_mv=frame.battery_mv,
        rssi_dbm=rssi_dbm,
        gateway_id=gateway_id,
    )


def publish_telemetry(record: TelemetryRecord, session: MqttClientSession, config: GatewayConfig, now: float = 0.0) -> SessionActions:
    """Publish one record on its per-node topic as canonical JSON bytes."""
    topic = telemetry_topic(config.topic_prefix, config.gateway_id, record.node_id)
    return session.publish_requested(topic, to_canonical_json(record), qos=config.qos, now=now)


class Gateway:
    """Stateful bridge holding dedup state and the loss/publish counters."""

    def __init__(self, config: GatewayConfig, model: PathLossModel, session: MqttClientSession) -> None:
        self.config = config
        self.model = model
        self.session = session
        self.dedup = DedupState()
        self.delivered = 0
        self.lost_rssi = 0
        self.lost_collision = 0
        self.duplicates = 0
        self._handed_to_session = 0

    def receive(
        self,
        transmissions: list[Transmission],
        rng: RngSource,
        extra_loss_db: float = 0.0,
        rivals: list[Transmission] | None = None,
    ) -> ChannelOutcome:
        outcome = channel_deliver(transmissions, self.config, self.model, rng, extra_loss_db, rivals)
        self.delivered += len(outcome.delivered)
        self.lost_rssi += outcome.lost_rssi
        self.lost_collision += outcome.lost_collision
        return outcome

    def bridge(self, frame: LoraFrame, rssi_dbm: float, now: float) -> TelemetryRecord | None:
        record = bridge_frame(frame, rssi_dbm, now, self.dedup, self.config.gateway_id)
        if record is None:
            self.duplicates += 1
        return record

    def publish(self, record: TelemetryRecord, now: float = 0.0) -> SessionActions:
        actions = publish_telemetry(record, self.session, self.config, now)
        self._handed_to_session += 1
        return actions

    def stats(self) -> dict[str, int]:
        # the session is owned by this gateway, so every overflow drop there
        # is a telemetry record lost to the bounded queue
        queue_drops = self.session.queue_overflow_drops
        return {
            "delivered": self.delivered,
            "lost_rssi": self.lost_rssi,
            "lost_collision": self.lost_collision,
            "duplicates": self.duplicates,
            "published": self._handed_to_session - queue_drops,
            "queue_drops": queue_drops,
        }
