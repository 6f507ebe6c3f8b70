"""Centered moving-window smoothing for reading series.

Measurement jitter on the radio path shows up as small fluctuations in
the stored series; a plain or weighted centered mean takes them out.
Edges fall back to the samples actually available, with the weights
renormalized, so output length always equals input length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

SMOOTHING_KINDS = ("none", "mean", "weighted")
DEFAULT_WEIGHTED_WINDOW = (0.1, 0.2, 0.4, 0.2, 0.1)


@dataclass
class SmoothingSpec:
    kind: str = "none"
    window: int = 5
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in SMOOTHING_KINDS:
            raise ValueError(f"kind must be one of {SMOOTHING_KINDS}, got {self.kind!r}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be an odd positive integer, got {self.window!r}")
        if self.kind == "weighted":
            if self.weights is None:
                if self.window == len(DEFAULT_WEIGHTED_WINDOW):
                    self.weights = DEFAULT_WEIGHTED_WINDOW
                else:
                    raise ValueError(f"weighted smoothing with window {self.window} requires explicit weights")
            self.weights = tuple(float(w) for w in self.weights)
            if len(self.weights) != self.window:
                raise ValueError(f"need {self.window} weights, got {len(self.weights)}")
            total = sum(self.weights)
            if not math.isclose(total, 1.0, abs_tol=1e-9):
                raise ValueError(f"weights must sum to 1 within 1e-9, got {total!r}")
            for i, w in enumerate(self.weights):
                if not math.isclose(w, self.weights[-1 - i], abs_tol=1e-9):
                    raise ValueError(f"weights must be symmetric, got {self.weights!r}")
        elif self.weights is not None:
            raise ValueError(f"weights only apply to the weighted kind, not {self.kind!r}")


def smooth(
    series: Sequence[tuple[float, float]], spec: SmoothingSpec
) -> list[tuple[float, float]]:
    """Apply `spec` to a time-ordered (t, value) series; timestamps pass through."""
    if spec.kind == "none":
        return [(t, v) for t, v in series]
    half = spec.window // 2
    values = [v for _, v in series]
    out: list[tuple[float, float]] = []
    for i, (t, _) in enumerate(series):
        lo = max(0, i - half)
        hi = min(len(values), i + half + 1)
        if spec.kind == "mean":
            window = values[lo:hi]
            out.append((t, sum(window) / len(window)))
        else:
            assert spec.weights is not None
            pairs = [(values[j], spec.weights[j - i + half]) for j in range(lo, hi)]
            total_w = sum(w for _, w in pairs)
            out.append((t, sum(v * w for v, w in pairs) / total_w))
    return out
