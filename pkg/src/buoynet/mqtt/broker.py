"""Minimal embedded MQTT 3.1.1 broker.

Routes qos 0/1 publishes to matching subscribers; no retained messages,
no persistence, no auth.  The core is transport free (bytes in, bytes
out per connection) so the pipeline can run it in process; BrokerServer
wraps the same core behind a TCP listener for external clients.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from dataclasses import dataclass, field

from . import codec
from .codec import (
    ConnAck,
    Connect,
    Disconnect,
    MqttPacket,
    PingReq,
    PingResp,
    PubAck,
    Publish,
    SubAck,
    Subscribe,
    topic_matches,
)

DEFAULT_BROKER_PORT = 1883

log = logging.getLogger(__name__)


@dataclass
class BrokerSession:
    """Broker-side view of one client connection."""

    conn_id: str
    client_id: str | None = None
    subscriptions: dict[str, int] = field(default_factory=dict)
    buffer: bytearray = field(default_factory=bytearray)
    next_packet_id: int = 1


def route_publish(
    publish: Publish, sessions: list[BrokerSession]
) -> list[tuple[BrokerSession, int]]:
    """Sessions that should receive `publish` and at which qos.

    Several matching filters on one session collapse to a single
    delivery; the delivery qos is min(publish qos, best matching
    subscription qos).
    """
    out = []
    for session in sessions:
        best_sub_qos = None
        for filter_, qos in session.subscriptions.items():
            if topic_matches(filter_, publish.topic):
                best_sub_qos = qos if best_sub_qos is None else max(best_sub_qos, qos)
        if best_sub_qos is not None:
            out.append((session, min(publish.qos, best_sub_qos)))
    return out


class EmbeddedBroker:
    """Connection-oriented broker core: feed bytes per connection, get bytes back."""

    def __init__(self) -> None:
        self._sessions: dict[str, BrokerSession] = {}

    def attach(self, conn_id: str) -> None:
        if conn_id in self._sessions:
            raise ValueError(f"connection id already attached: {conn_id!r}")
        self._sessions[conn_id] = BrokerSession(conn_id=conn_id)

    def detach(self, conn_id: str) -> None:
        self._sessions.pop(conn_id, None)

    def feed(self, conn_id: str, data: bytes) -> tuple[dict[str, bytes], list[str]]:
        """Process inbound bytes from one connection.

        Returns (outputs keyed by connection id, connections to close).
        A protocol error closes the offending connection.
        """
        session = self._sessions[conn_id]
        session.buffer.extend(data)
        outputs: dict[str, bytearray] = {}
        closed: list[str] = []
        while True:
            try:
                packet, consumed = codec.decode_packet(bytes(session.buffer))
            except codec.ProtocolError as exc:
                log.warning("closing %s on protocol error: %s", conn_id, exc)
                closed.append(conn_id)
                self.detach(conn_id)
                break
            if packet is None:
                break
            del session.buffer[:consumed]
            if not self._handle(session, packet, outputs):
                closed.append(conn_id)
                self.detach(conn_id)
                break
        return {cid: bytes(buf) for cid, buf in outputs.items()}, closed

    def _handle(self, session: BrokerSession, packet: MqttPacket, outputs: dict[str, bytearray]) -> bool:
        if isinstance(packet, Connect):
            session.client_id = packet.client_id or session.conn_id
            self._queue(outputs, session.conn_id, ConnAck(return_code=codec.CONNECT_ACCEPTED))
            return True
        if isinstance(packet, Publish):
            if packet.qos == 1:
                self._queue(outputs, session.conn_id, PubAck(packet_id=packet.packet_id))  # type: ignore[arg-type]
            for target, qos in route_publish(packet, list(self._sessions.values())):
                packet_id = None
                if qos == 1:
                    packet_id = target.next_packet_id
                    target.next_packet_id = packet_id % 0xFFFF + 1
                delivery = Publish(topic=packet.topic, payload=packet.payload, qos=qos, packet_id=packet_id)
                self._queue(outputs, target.conn_id, delivery)
            return True
        if isinstance(packet, Subscribe):
            granted = []
            for filter_, qos in packet.topic_filters:
                effective = min(qos, 1)
                session.subscriptions[filter_] = effective
                granted.append(effective)
            self._queue(outputs, session.conn_id, SubAck(packet_id=packet.packet_id, granted=tuple(granted)))
            return True
        if isinstance(packet, PingReq):
            self._queue(outputs, session.conn_id, PingResp())
            return True
        if isinstance(packet, PubAck):
            # qos 1 deliveries are not retried from broker state; ack is consumed
            return True
        if isinstance(packet, Disconnect):
            return False
        log.warning("ignoring unexpected %s from %s", type(packet).__name__, session.conn_id)
        return True

    @staticmethod
    def _queue(outputs: dict[str, bytearray], conn_id: str, packet: MqttPacket) -> None:
        outputs.setdefault(conn_id, bytearray()).extend(codec.encode_packet(packet))


class _BrokerTCPHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        server: BrokerServer = self.server.buoynet_broker_server  # type: ignore[attr-defined]
        conn_id = f"tcp:{self.client_address[0]}:{self.client_address[1]}"
        server.register(conn_id, self.request)
        try:
            while True:
                try:
                    data = self.request.recv(4096)
                except OSError:
                    break
                if not data:
                    break
                if not server.dispatch(conn_id, data):
                    break
        finally:
            server.unregister(conn_id)


class BrokerServer:
    """TCP front end for EmbeddedBroker (default port 1883)."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_BROKER_PORT) -> None:
        self.broker = EmbeddedBroker()
        self._lock = threading.Lock()
        self._conns: dict[str, socket.socket] = {}
        self._tcp = socketserver.ThreadingTCPServer((host, port), _BrokerTCPHandler, bind_and_activate=False)
        self._tcp.allow_reuse_address = True
        self._tcp.daemon_threads = True
        self._tcp.buoynet_broker_server = self  # type: ignore[attr-defined]
        self._tcp.server_bind()
        self._tcp.server_activate()
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address  # type: ignore[return-value]

    def start(self) -> "BrokerServer":
        self._thread = threading.Thread(target=self._tcp.serve_forever, name="buoynet-broker", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def register(self, conn_id: str, sock: socket.socket) -> None:
        with self._lock:
            self.broker.attach(conn_id)
            self._conns[conn_id] = sock

    def unregister(self, conn_id: str) -> None:
        with self._lock:
            self.broker.detach(conn_id)
            self._conns.pop(conn_id, None)

    def dispatch(self, conn_id: str, data: bytes) -> bool:
        """Feed bytes under the broker lock, fanning outputs to sockets."""
        with self._lock:
            outputs, closed = self.broker.feed(conn_id, data)
            for target, payload in outputs.items():
                sock = self._conns.get(target)
                if sock is None:
                    continue
                try:
                    sock.sendall(payload)
                except OSError:
                    log.warning("dropping unwritable connection %s", target)
            return conn_id not in closed
