"""Append-only telemetry store with a per-node time index.

Persistence is one canonical JSON record per line (LF delimited).  The
log replayed into an empty store reproduces the exact in-memory state,
which is the durability contract the REST layer relies on.  A single
lock serializes the writer against snapshot/query readers.
"""

from __future__ import annotations

import bisect
import threading
from os import PathLike
from pathlib import Path
from typing import IO, Iterable

from ..telemetry import TelemetryFormatError, TelemetryRecord, record_from_json, to_canonical_json


class UnknownNodeError(KeyError):
    """Queried node has never reported."""


class ReadingStore:
    def __init__(self, log_path: str | PathLike[str] | None = None) -> None:
        self._lock = threading.RLock()
        self._by_node: dict[int, list[TelemetryRecord]] = {}
        self._ts_index: dict[int, list[float]] = {}
        self._latest: dict[int, TelemetryRecord] = {}
        self._seen: set[tuple[int, int, str]] = set()
        self.ingested = 0
        self.duplicates = 0
        self.rejected = 0
        self._log: IO[bytes] | None = None
        self._log_path = Path(log_path) if log_path is not None else None
        if self._log_path is not None:
            if self._log_path.exists():
                self._replay_file(self._log_path)
            self._log = open(self._log_path, "ab")

    # -- ingestion ---------------------------------------------------------

    def ingest(self, record: TelemetryRecord) -> bool:
        """Store one record; returns False for an exact duplicate."""
        with self._lock:
            if not self._insert(record):
                return False
            if self._log is not None:
                self._log.write(to_canonical_json(record) + b"\n")
                self._log.flush()
            return True

    def ingest_json(self, payload: bytes | str) -> bool:
        """Parse and ingest one wire payload; malformed input is counted, not raised."""
        try:
            record = record_from_json(payload)
        except TelemetryFormatError:
            with self._lock:
                self.rejected += 1
            return False
        return self.ingest(record)

    def _insert(self, record: TelemetryRecord) -> bool:
        key = record.dedup_key()
        if key in self._seen:
            self.duplicates += 1
            return False
        self._seen.add(key)
        readings = self._by_node.setdefault(record.node_id, [])
        ts_list = self._ts_index.setdefault(record.node_id, [])
        pos = bisect.bisect_right(ts_list, record.ts)
        ts_list.insert(pos, record.ts)
        readings.insert(pos, record)
        latest = self._latest.get(record.node_id)
        if latest is None or record.ts > latest.ts:
            self._latest[record.node_id] = record
        self.ingested += 1
        return True

    def _replay_file(self, path: Path) -> None:
        with open(path, "rb") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    self._insert(record_from_json(line))
                except TelemetryFormatError:
                    self.rejected += 1

    @classmethod
    def replay(cls, path: str | PathLike[str]) -> "ReadingStore":
        """Rebuild an in-memory store from a persisted log, without appending."""
        store = cls()
        store._replay_file(Path(path))
        return store

    def close(self) -> None:
        with self._lock:
            if self._log is not None:
                self._log.close()
                self._log = None

    # -- queries -----------------------------------------------------------

    def node_ids(self) -> list[int]:
        with self._lock:
            return sorted(self._by_node)

    def has_node(self, node_id: int) -> bool:
        with self._lock:
            return node_id in self._by_node

    def readings(self, node_id: int, from_s: float | None = None, to_s: float | None = None) -> list[TelemetryRecord]:
        """Time-ordered readings of one node in [from_s, to_s] (inclusive)."""
        if from_s is not None and to_s is not None and from_s > to_s:
            raise ValueError(f"from_s {from_s!r} is after to_s {to_s!r}")
        with self._lock:
            if node_id not in self._by_node:
                raise UnknownNodeError(node_id)
            readings = self._by_node[node_id]
            ts_list = self._ts_index[node_id]
            lo = 0 if from_s is None else bisect.bisect_left(ts_list, from_s)
            hi = len(readings) if to_s is None else bisect.bisect_right(ts_list, to_s)
            return readings[lo:hi]

    def all_readings(self) -> list[TelemetryRecord]:
        with self._lock:
            merged = [r for readings in self._by_node.values() for r in readings]
        merged.sort(key=lambda r: (r.ts, r.node_id, r.seq))
        return merged

    def latest(self) -> dict[int, TelemetryRecord]:
        with self._lock:
            return dict(self._latest)

    def size(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._by_node.values())

    def counters(self) -> dict[str, int]:
        with self._lock:
            return {
                "ingested": self.ingested,
                "duplicates": self.duplicates,
                "rejected": self.rejected,
                "nodes": len(self._by_node),
            }
