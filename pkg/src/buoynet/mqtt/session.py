"""Client session state machine, sans I/O.

The session consumes explicit events (connect request, inbound bytes,
publish request, clock tick) and returns the bytes to write plus any
application deliveries.  The hosting component owns the socket; this
keeps the state machine synchronous and directly testable.

QoS 1 publishes are tracked until acked.  While disconnected, publish
requests land in a bounded queue (oldest dropped on overflow); the queue
and any unacked publishes are flushed after the next successful connect,
which is what gives at-least-once behavior across reconnects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import codec
from .codec import ConnAck, Connect, Disconnect, MqttPacket, PingReq, PingResp, PubAck, Publish, SubAck, Subscribe

PUBLISH_QUEUE_DEPTH = 256
ACK_TIMEOUT_FACTOR = 1.5


class SessionState(Enum):
    DISCONNECTED = "disconnected"
    CONNECTING = "connecting"
    CONNECTED = "connected"


@dataclass
class SessionActions:
    """What the host must do after an event: write bytes, hand out messages."""

    bytes_out: bytes = b""
    deliveries: list[Publish] = field(default_factory=list)
    state_change: SessionState | None = None
    refusal_code: int | None = None
    dropped_publishes: int = 0

    def _merge(self, other: "SessionActions") -> None:
        self.bytes_out += other.bytes_out
        self.deliveries.extend(other.deliveries)
        if other.state_change is not None:
            self.state_change = other.state_change
        if other.refusal_code is not None:
            self.refusal_code = other.refusal_code
        self.dropped_publishes += other.dropped_publishes


class MqttClientSession:
    def __init__(self, client_id: str, keep_alive_s: int = 30, clean_session: bool = True) -> None:
        self.client_id = client_id
        self.keep_alive_s = keep_alive_s
        self.clean_session = clean_session
        self.state = SessionState.DISCONNECTED
        self.pending_acks: dict[int, Publish] = {}
        self.queue: list[tuple[str, bytes, int]] = []
        self.queue_overflow_drops = 0
        self._buffer = bytearray()
        self._next_packet_id = 1
        self._last_send = 0.0
        self._last_recv = 0.0
        self._ping_outstanding = False

    # -- events ----------------------------------------------------------

    def connect_requested(self, now: float) -> SessionActions:
        """Open a session: emits CONNECT and moves to CONNECTING."""
        self.state = SessionState.CONNECTING
        self._buffer.clear()
        self._ping_outstanding = False
        self._last_send = self._last_recv = now
        packet = Connect(self.client_id, keep_alive_s=self.keep_alive_s, clean_session=self.clean_session)
        return SessionActions(bytes_out=self._send(packet), state_change=self.state)

    def bytes_in(self, data: bytes, now: float) -> SessionActions:
        """Feed received bytes; decodes as many whole packets as present."""
        self._buffer.extend(data)
        actions = SessionActions()
        while True:
            packet, consumed = codec.decode_packet(bytes(self._buffer))
            if packet is None:
                break
            del self._buffer[:consumed]
            self._last_recv = now
            actions._merge(self._handle(packet, now))
        return actions

    def publish_requested(self, topic: str, payload: bytes, qos: int | None = None, now: float = 0.0) -> SessionActions:
        """Publish application data, queueing while not connected."""
        if qos is None:
            qos = 1
        if self.state is not SessionState.CONNECTED:
            return self._enqueue(topic, payload, qos)
        return SessionActions(bytes_out=self._emit_publish(topic, payload, qos, now))

    def tick(self, now: float) -> SessionActions:
        """Clock tick: keep-alive pings and liveness timeouts."""
        actions = SessionActions()
        if self.state is SessionState.CONNECTING:
            if now - self._last_recv >= ACK_TIMEOUT_FACTOR * self.keep_alive_s:
                actions._merge(self._drop_connection())
            return actions
        if self.state is not SessionState.CONNECTED:
            return actions
        if now - self._last_recv >= ACK_TIMEOUT_FACTOR * self.keep_alive_s:
            actions._merge(self._drop_connection())
            return actions
        if self.keep_alive_s > 0 and now - self._last_send >= self.keep_alive_s and not self._ping_outstanding:
            self._ping_outstanding = True
            self._last_send = now
            actions.bytes_out += self._send(PingReq())
        return actions

    # -- internals -------------------------------------------------------

    def _handle(self, packet: MqttPacket, now: float) -> SessionActions:
        if isinstance(packet, ConnAck):
            if self.state is not SessionState.CONNECTING:
                return SessionActions()
            if packet.return_code != codec.CONNECT_ACCEPTED:
                self.state = SessionState.DISCONNECTED
                return SessionActions(state_change=self.state, refusal_code=packet.return_code)
            self.state = SessionState.CONNECTED
            actions = SessionActions(state_change=self.state)
            actions.bytes_out += self._flush_queue(now)
            return actions
        if isinstance(packet, Publish):
            actions = SessionActions(deliveries=[packet])
            if packet.qos == 1 and self.state is SessionState.CONNECTED:
                self._last_send = now
                actions.bytes_out += self._send(PubAck(packet_id=packet.packet_id))  # type: ignore[arg-type]
            return actions
        if isinstance(packet, PubAck):
            self.pending_acks.pop(packet.packet_id, None)
            return SessionActions()
        if isinstance(packet, PingResp):
            self._ping_outstanding = False
            return SessionActions()
        if isinstance(packet, (SubAck, PingReq, Disconnect)):
            return SessionActions()
        return SessionActions()

    def subscribe_requested(self, topic_filters: list[tuple[str, int]], now: float = 0.0) -> SessionActions:
        if self.state is not SessionState.CONNECTED:
            raise codec.ProtocolError("subscribe requires a connected session")
        packet = Subscribe(packet_id=self._take_packet_id(), topic_filters=tuple(topic_filters))
        self._last_send = now
        return SessionActions(bytes_out=self._send(packet))

    def _enqueue(self, topic: str, payload: bytes, qos: int) -> SessionActions:
        dropped = 0
        if len(self.queue) >= PUBLISH_QUEUE_DEPTH:
            self.queue.pop(0)
            self.queue_overflow_drops += 1
            dropped = 1
        self.queue.append((topic, payload, qos))
        return SessionActions(dropped_publishes=dropped)

    def _flush_queue(self, now: float) -> bytes:
        out = b""
        queued, self.queue = self.queue, []
        for topic, payload, qos in queued:
            out += self._emit_publish(topic, payload, qos, now)
        return out

    def _emit_publish(self, topic: str, payload: bytes, qos: int, now: float) -> bytes:
        packet_id = self._take_packet_id() if qos == 1 else None
        packet = Publish(topic=topic, payload=payload, qos=qos, packet_id=packet_id)
        if qos == 1:
            self.pending_acks[packet_id] = packet  # type: ignore[index]
        self._last_send = now
        return self._send(packet)

    def _drop_connection(self) -> SessionActions:
        """Lost liveness: requeue unacked publishes, fall back to DISCONNECTED."""
        self.state = SessionState.DISCONNECTED
        unacked = [(p.topic, p.payload, p.qos) for p in self.pending_acks.values()]
        self.pending_acks.clear()
        self.queue = unacked + self.queue
        overflow = len(self.queue) - PUBLISH_QUEUE_DEPTH
        dropped = 0
        if overflow > 0:
            del self.queue[:overflow]
            self.queue_overflow_drops += overflow
            dropped = overflow
        self._ping_outstanding = False
        return SessionActions(state_change=self.state, dropped_publishes=dropped)

    def _take_packet_id(self) -> int:
        for _ in range(0xFFFF):
            pid = self._next_packet_id
            self._next_packet_id = pid % 0xFFFF + 1
            if pid not in self.pending_acks:
                return pid
        raise codec.ProtocolError("no free packet ids, too many unacked publishes")

    @staticmethod
    def _send(packet: MqttPacket) -> bytes:
        return codec.encode_packet(packet)
