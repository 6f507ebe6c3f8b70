"""HTTP query API over the monitor.

Endpoints (all GET, JSON bodies unless noted):

    /api/nodes                         node list with latest reading each
    /api/nodes/{id}/readings           series, ?from=&to=&smoothing=&window=
    /api/rssi/fit                      log-distance fit, ?unit_m=
    /api/stats                         ingestion counters
    /api/export.csv                    CSV export, ?node=
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import asdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..pathloss import PathLossFitError
from ..telemetry import TELEMETRY_FIELDS, TelemetryRecord
from .service import Monitor
from .smoothing import SMOOTHING_KINDS, SmoothingSpec
from .store import UnknownNodeError

DEFAULT_HTTP_PORT = 8080
EXPORT_CSV_FIELDS = ("ts", "node_id", "temp_c", "rssi_dbm", "battery_mv")

log = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.message = message


def _record_obj(record: TelemetryRecord) -> dict:
    return {name: getattr(record, name) for name in TELEMETRY_FIELDS}


def _one(params: dict[str, list[str]], name: str, default: str | None = None) -> str | None:
    values = params.get(name)
    if not values:
        return default
    return values[-1]


def _float_param(params: dict[str, list[str]], name: str) -> float | None:
    raw = _one(params, name)
    if raw is None or raw == "":
        return None
    try:
        return float(raw)
    except ValueError:
        raise ApiError(400, f"query parameter {name!r} must be a number, got {raw!r}")


def _smoothing_param(params: dict[str, list[str]]) -> SmoothingSpec | None:
    kind = _one(params, "smoothing", "none")
    if kind not in SMOOTHING_KINDS:
        raise ApiError(400, f"smoothing must be one of {'|'.join(SMOOTHING_KINDS)}, got {kind!r}")
    if kind == "none":
        return None
    raw_window = _one(params, "window")
    try:
        window = int(raw_window) if raw_window else 5
        return SmoothingSpec(kind=kind, window=window)
    except ValueError as exc:
        raise ApiError(400, str(exc))


class MonitorApi:
    """Request routing, transport free so tests can call it directly."""

    def __init__(self, monitor: Monitor) -> None:
        self.monitor = monitor

    def handle(self, path: str, params: dict[str, list[str]]) -> tuple[int, str, bytes]:
        """Returns (status, content type, body)."""
        try:
            if path == "/api/nodes":
                return self._nodes()
            if path.startswith("/api/nodes/") and path.endswith("/readings"):
                return self._readings(path, params)
            if path == "/api/rssi/fit":
                return self._fit(params)
            if path == "/api/stats":
                return self._stats()
            if path == "/api/export.csv":
                return self._export(params)
            raise ApiError(404, f"no such endpoint: {path}")
        except ApiError as exc:
            return exc.status, "application/json", _json_body({"error": exc.message})

    def _nodes(self) -> tuple[int, str, bytes]:
        snap = self.monitor.snapshot(refresh=True)
        nodes = [
            {"node_id": node_id, "latest": _record_obj(snap.latest[node_id])}
            for node_id in sorted(snap.latest)
        ]
        body = {
            "count": len(nodes),
            "nodes": nodes,
            "fleet": {
                "reading_count": snap.reading_count,
                "temp_min_c": snap.temp_min_c,
                "temp_max_c": snap.temp_max_c,
                "temp_mean_c": snap.temp_mean_c,
                "window_s": snap.window_s,
            },
        }
        return 200, "application/json", _json_body(body)

    def _readings(self, path: str, params: dict[str, list[str]]) -> tuple[int, str, bytes]:
        raw_id = path[len("/api/nodes/") : -len("/readings")]
        try:
            node_id = int(raw_id)
        except ValueError:
            raise ApiError(400, f"node id must be an integer, got {raw_id!r}")
        from_s = _float_param(params, "from")
        to_s = _float_param(params, "to")
        spec = _smoothing_param(params)
        try:
            series = self.monitor.query_readings(node_id, from_s, to_s, spec)
        except UnknownNodeError:
            raise ApiError(404, f"unknown node {node_id}")
        except ValueError as exc:
            raise ApiError(400, str(exc))
        body = {
            "node_id": node_id,
            "smoothing": _one(params, "smoothing", "none"),
            "count": len(series),
            "readings": [{"ts": t, "temp_c": v} for t, v in series],
        }
        return 200, "application/json", _json_body(body)

    def _fit(self, params: dict[str, list[str]]) -> tuple[int, str, bytes]:
        unit_m = _float_param(params, "unit_m") or 60.0
        try:
            model, count = self.monitor.fit_observed_rssi(unit_m=unit_m)
        except (PathLossFitError, ValueError) as exc:
            raise ApiError(409, f"cannot fit: {exc}")
        body = {
            "a": model.a,
            "b": model.b,
            "r_squared": model.r_squared,
            "distance_unit_m": model.distance_unit_m,
            "samples": count,
        }
        return 200, "application/json", _json_body(body)

    def _stats(self) -> tuple[int, str, bytes]:
        return 200, "application/json", _json_body(self.monitor.stats())

    def _export(self, params: dict[str, list[str]]) -> tuple[int, str, bytes]:
        raw_node = _one(params, "node")
        if raw_node:
            try:
                node_id = int(raw_node)
            except ValueError:
                raise ApiError(400, f"node must be an integer, got {raw_node!r}")
            try:
                records = self.monitor.store.readings(node_id)
            except UnknownNodeError:
                raise ApiError(404, f"unknown node {node_id}")
        else:
            records = self.monitor.store.all_readings()
        lines = [",".join(EXPORT_CSV_FIELDS)]
        for r in records:
            lines.append(f"{r.ts!r},{r.node_id},{r.temp_c!r},{r.rssi_dbm!r},{r.battery_mv}")
        return 200, "text/csv", ("\n".join(lines) + "\n").encode("utf-8")


def _json_body(obj: object) -> bytes:
    return json.dumps(obj, separators=(",", ":")).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def do_GET(self) -> None:  # noqa: N802  (http.server naming)
        api: MonitorApi = self.server.buoynet_api  # type: ignore[attr-defined]
        parsed = urlparse(self.path)
        status, ctype, body = api.handle(parsed.path, parse_qs(parsed.query))
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, format: str, *args: object) -> None:
        log.debug("%s " + format, self.client_address[0], *args)


class MonitorHttpServer:
    def __init__(self, monitor: Monitor, host: str = "127.0.0.1", port: int = DEFAULT_HTTP_PORT) -> None:
        self.api = MonitorApi(monitor)
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.buoynet_api = self.api  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address  # type: ignore[return-value]

    def start(self) -> "MonitorHttpServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, name="buoynet-http", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
