"""MQTT subscriber feeding a monitor from a live broker over TCP.

Runs the sans-IO client session on a socket, subscribes to the telemetry
filter and ingests every delivery.  Connection loss triggers reconnect
with exponential backoff.
"""

from __future__ import annotations

import logging
import socket
import threading
import time

from ..mqtt.session import MqttClientSession, SessionState
from .service import Monitor

log = logging.getLogger(__name__)

RECONNECT_BASE_S = 0.5
RECONNECT_MAX_S = 30.0


def telemetry_filter(prefix: str) -> str:
    return f"{prefix}/+/+/telemetry"


class MqttIngestClient:
    def __init__(
        self,
        monitor: Monitor,
        broker_host: str,
        broker_port: int,
        topic_filter: str = "marine/v1/+/+/telemetry",
        client_id: str = "buoynet-monitor",
        keep_alive_s: int = 30,
    ) -> None:
        self.monitor = monitor
        self.broker_host = broker_host
        self.broker_port = broker_port
        self.topic_filter = topic_filter
        self.client_id = client_id
        self.keep_alive_s = keep_alive_s
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> "MqttIngestClient":
        self._thread = threading.Thread(target=self.run, name="buoynet-mqtt-ingest", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def run(self) -> None:
        backoff = RECONNECT_BASE_S
        while not self._stop.is_set():
            try:
                self._serve_one_connection()
                backoff = RECONNECT_BASE_S
            except OSError as exc:
                log.warning("broker connection failed: %s", exc)
            if self._stop.is_set():
                return
            log.info("reconnecting in %.1f s", backoff)
            self._stop.wait(backoff)
            backoff = min(backoff * 2, RECONNECT_MAX_S)

    def _serve_one_connection(self) -> None:
        session = MqttClientSession(self.client_id, keep_alive_s=self.keep_alive_s)
        with socket.create_connection((self.broker_host, self.broker_port), timeout=5) as sock:
            sock.settimeout(0.25)
            now = time.monotonic()
            self._apply(sock, session.connect_requested(now))
            subscribed = False
            while not self._stop.is_set():
                now = time.monotonic()
                if session.state is SessionState.CONNECTED and not subscribed:
                    self._apply(sock, session.subscribe_requested([(self.topic_filter, 1)], now))
                    subscribed = True
                try:
                    data = sock.recv(4096)
                    if not data:
                        log.info("broker closed the connection")
                        return
                    self._apply(sock, session.bytes_in(data, time.monotonic()))
                except socket.timeout:
                    pass
                self._apply(sock, session.tick(time.monotonic()))
                if session.state is SessionState.DISCONNECTED:
                    log.info("session dropped (keep-alive timeout or refusal)")
                    return

    def _apply(self, sock: socket.socket, actions) -> None:
        if actions.bytes_out:
            sock.sendall(actions.bytes_out)
        for publish in actions.deliveries:
            if not self.monitor.ingest_json(publish.payload):
                log.debug("payload on %s rejected or duplicate", publish.topic)
