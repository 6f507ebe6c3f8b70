"""Monitoring facade over the reading store: queries, fitting, snapshots."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from ..geo import LatLon, haversine_m
from ..pathloss import PathLossModel, RssiSample, fit_log_model
from ..telemetry import TelemetryRecord
from .smoothing import SmoothingSpec, smooth
from .store import ReadingStore, UnknownNodeError

DEFAULT_SNAPSHOT_PERIOD_S = 1.0
DEFAULT_TRAILING_WINDOW_S = 3600.0


@dataclass
class FleetSnapshot:
    """Consistent point-in-time view of the fleet."""

    latest: dict[int, TelemetryRecord]
    node_count: int
    reading_count: int
    temp_min_c: float | None
    temp_max_c: float | None
    temp_mean_c: float | None
    window_s: float


@dataclass
class Monitor:
    store: ReadingStore
    gateway_position: LatLon | None = None
    snapshot_period_s: float = DEFAULT_SNAPSHOT_PERIOD_S
    trailing_window_s: float = DEFAULT_TRAILING_WINDOW_S
    _snapshot_cache: FleetSnapshot | None = field(default=None, repr=False)
    _snapshot_taken: float = field(default=0.0, repr=False)
    _snapshot_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def ingest(self, record: TelemetryRecord) -> bool:
        return self.store.ingest(record)

    def ingest_json(self, payload: bytes | str) -> bool:
        return self.store.ingest_json(payload)

    def query_readings(
        self,
        node_id: int,
        from_s: float | None = None,
        to_s: float | None = None,
        smoothing: SmoothingSpec | None = None,
    ) -> list[tuple[float, float]]:
        """Time-ordered (ts, temp_c) series in [from_s, to_s], smoothed per spec.

        Raises UnknownNodeError for a node that never reported and
        ValueError for an inverted window.
        """
        records = self.store.readings(node_id, from_s, to_s)
        series = [(r.ts, r.temp_c) for r in records]
        if smoothing is None or smoothing.kind == "none":
            return series
        return smooth(series, smoothing)

    def fit_observed_rssi(
        self,
        unit_m: float = 60.0,
        node_positions: dict[int, LatLon] | None = None,
        gateway_position: LatLon | None = None,
    ) -> tuple[PathLossModel, int]:
        """Fit the log-distance model to every stored (distance, rssi) pair.

        Node positions default to the coordinates each record reported;
        an explicit mapping overrides them.  Returns (model, sample
        count).  Raises PathLossFitError when the data cannot pin a line
        and ValueError when no gateway position is known.
        """
        origin = gateway_position or self.gateway_position
        if origin is None:
            raise ValueError("gateway position is required to compute sample distances")
        samples = []
        for record in self.store.all_readings():
            if node_positions is not None:
                pos = node_positions.get(record.node_id)
                if pos is None:
                    continue
            else:
                pos = LatLon(record.lat, record.lon)
            samples.append(RssiSample(haversine_m(origin, pos), record.rssi_dbm))
        return fit_log_model(samples, unit_m), len(samples)

    def snapshot(self, refresh: bool = False) -> FleetSnapshot:
        """Latest reading per node plus fleet temperature stats.

        Regenerated at most once per `snapshot_period_s` unless `refresh`
        forces it; the cached view is immutable and safe to share.
        """
        with self._snapshot_lock:
            now = time.monotonic()
            if (
                not refresh
                and self._snapshot_cache is not None
                and now - self._snapshot_taken < self.snapshot_period_s
            ):
                return self._snapshot_cache
            snap = self._build_snapshot()
            self._snapshot_cache = snap
            self._snapshot_taken = now
            return snap

    def _build_snapshot(self) -> FleetSnapshot:
        latest = self.store.latest()
        readings = self.store.all_readings()
        horizon = max((r.ts for r in readings), default=0.0) - self.trailing_window_s
        trailing = [r.temp_c for r in readings if r.ts >= horizon]
        return FleetSnapshot(
            latest=latest,
            node_count=len(latest),
            reading_count=len(readings),
            temp_min_c=min(trailing) if trailing else None,
            temp_max_c=max(trailing) if trailing else None,
            temp_mean_c=sum(trailing) / len(trailing) if trailing else None,
            window_s=self.trailing_window_s,
        )

    def stats(self) -> dict[str, int]:
        return self.store.counters()
