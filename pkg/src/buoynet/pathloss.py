"""Log-distance RSSI channel model: prediction, reception, and fitting.

The simulated radio link attenuates with the natural log of distance:

    rssi(d) = a * ln(d / distance_unit_m) + b        [dBm]

with ``a < 0`` for any physical channel.  Distances are normalized by
``distance_unit_m`` (default 60 m) so the coefficients stay in a sane
range at kilometer scales.  Reception is a threshold decision against
receiver sensitivity, optionally perturbed by zero-mean Gaussian
shadowing in dB.

Fitting recovers (a, b) from measured (distance, rssi) pairs by ordinary
least squares in (ln x, y) space and reports the coefficient of
determination R².
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from os import PathLike
from typing import Iterable, NamedTuple, Sequence

import numpy as np

DEFAULT_DISTANCE_UNIT_M = 60.0
DEFAULT_SENSITIVITY_DBM = -132.0


class PathLossFitError(ValueError):
    """Base class for fitting failures."""


class InsufficientDataError(PathLossFitError):
    """Fewer than two samples were supplied."""


class SingularFitError(PathLossFitError):
    """All samples share one distance, the log-distance line is underdetermined."""


class DegenerateDataError(PathLossFitError):
    """The rssi values have zero variance, R² is undefined."""


class RssiSample(NamedTuple):
    distance_m: float
    rssi_dbm: float


@dataclass
class PathLossModel:
    """Coefficients of the log-distance RSSI line, plus fit quality if fitted.

    ``a`` is dBm per natural-log unit of normalized distance, ``b`` the
    intercept in dBm at one distance unit.  ``r_squared`` is populated by
    :func:`fit_log_model` and stays ``None`` for hand-built models.
    """

    a: float
    b: float
    r_squared: float | None = None
    distance_unit_m: float = DEFAULT_DISTANCE_UNIT_M

    def __post_init__(self) -> None:
        if not (self.distance_unit_m > 0):
            raise ValueError(f"distance_unit_m must be > 0, got {self.distance_unit_m!r}")


@dataclass
class RadioParams:
    """Receiver-side link parameters used by reception decisions."""

    sensitivity_dbm: float = DEFAULT_SENSITIVITY_DBM
    shadowing_sigma_db: float = 3.0
    capture_threshold_db: float = 6.0

    def __post_init__(self) -> None:
        if not (self.sensitivity_dbm < 0):
            raise ValueError(f"sensitivity_dbm must be < 0, got {self.sensitivity_dbm!r}")
        if self.shadowing_sigma_db < 0:
            raise ValueError(f"shadowing_sigma_db must be >= 0, got {self.shadowing_sigma_db!r}")
        if self.capture_threshold_db < 0:
            raise ValueError(f"capture_threshold_db must be >= 0, got {self.capture_threshold_db!r}")


def rssi_at(model: PathLossModel, distance_m: float) -> float:
    """Predicted RSSI in dBm at `distance_m` meters, noise free."""
    if not (distance_m > 0):
        raise ValueError(f"distance_m must be > 0, got {distance_m!r}")
    return model.a * math.log(distance_m / model.distance_unit_m) + model.b


def max_range(model: PathLossModel, sensitivity_dbm: float) -> float:
    """Distance in meters at which predicted RSSI equals the given sensitivity.

    Solves rssi_at(model, d) = sensitivity for d, which requires a
    decreasing channel (a < 0) and a sensitivity at or below the
    intercept b.
    """
    if model.a >= 0:
        raise ValueError(f"no finite range for non-decreasing channel (a={model.a!r})")
    if sensitivity_dbm > model.b:
        raise ValueError(
            f"sensitivity {sensitivity_dbm!r} dBm above intercept {model.b!r} dBm, "
            "no range at or beyond one distance unit"
        )
    return model.distance_unit_m * math.exp((sensitivity_dbm - model.b) / model.a)


def fit_log_model(
    samples: Sequence[RssiSample] | Iterable[tuple[float, float]],
    unit_m: float = DEFAULT_DISTANCE_UNIT_M,
) -> PathLossModel:
    """Least-squares fit of rssi = a*ln(d/unit_m) + b over the samples.

    Uses the closed form a = cov(u, y)/var(u), b = mean(y) - a*mean(u)
    with u = ln(d/unit_m), then evaluates R² of the result.
    """
    pts = [RssiSample(float(d), float(r)) for d, r in samples]
    if len(pts) < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {len(pts)}")
    for d, r in pts:
        if not (d > 0):
            raise ValueError(f"sample distance must be > 0, got {d!r}")
        if not math.isfinite(r):
            raise ValueError(f"sample rssi must be finite, got {r!r}")
    u = np.log(np.array([d for d, _ in pts]) / unit_m)
    y = np.array([r for _, r in pts])
    var_u = float(np.mean((u - u.mean()) ** 2))
    if var_u == 0.0:
        raise SingularFitError("all samples share one distance, cannot fit a line")
    cov_uy = float(np.mean((u - u.mean()) * (y - y.mean())))
    a = cov_uy / var_u
    b = float(y.mean()) - a * float(u.mean())
    model = PathLossModel(a=a, b=b, distance_unit_m=unit_m)
    model.r_squared = r_squared(pts, model)
    return model


def r_squared(
    samples: Sequence[RssiSample] | Iterable[tuple[float, float]],
    model: PathLossModel,
) -> float:
    """Coefficient of determination 1 - SS_res/SS_tot of `model` on `samples`."""
    pts = [RssiSample(float(d), float(r)) for d, r in samples]
    if len(pts) < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {len(pts)}")
    y = np.array([r for _, r in pts])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateDataError("rssi values have zero variance, R² undefined")
    y_hat = np.array([rssi_at(model, d) for d, _ in pts])
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


def receive_decision(tx_rssi_dbm: float, params: RadioParams, rng: random.Random) -> bool:
    """Whether a transmission at `tx_rssi_dbm` is decodable.

    Adds one Gaussian shadowing draw (sigma from `params`) and compares
    against sensitivity; RSSI exactly at sensitivity counts as received.
    With sigma 0 no draw is consumed and the decision is deterministic.
    """
    rssi = tx_rssi_dbm
    if params.shadowing_sigma_db > 0:
        rssi += rng.gauss(0.0, params.shadowing_sigma_db)
    return rssi >= params.sensitivity_dbm


SAMPLES_CSV_HEADER = ("distance_m", "rssi_dbm")


def save_samples_csv(path: str | PathLike[str], samples: Iterable[RssiSample]) -> None:
    """Write samples as `distance_m,rssi_dbm` CSV, UTF-8, LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SAMPLES_CSV_HEADER)
        for d, r in samples:
            writer.writerow([repr(float(d)), repr(float(r))])


def load_samples_csv(path: str | PathLike[str]) -> list[RssiSample]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SAMPLES_CSV_HEADER:
            raise ValueError(f"expected header {','.join(SAMPLES_CSV_HEADER)!r}, got {header!r}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected 2 fields, got {len(row)}")
            out.append(RssiSample(float(row[0]), float(row[1])))
    return out


def fit_to_json(model: PathLossModel) -> str:
    """Serialize a fit result as the canonical JSON object."""
    obj = {
        "a": model.a,
        "b": model.b,
        "r_squared": model.r_squared,
        "distance_unit_m": model.distance_unit_m,
    }
    return json.dumps(obj, separators=(",", ":"))


def fit_from_json(text: str) -> PathLossModel:
    obj = json.loads(text)
    return PathLossModel(
        a=float(obj["a"]),
        b=float(obj["b"]),
        r_squared=None if obj.get("r_squared") is None else float(obj["r_squared"]),
        distance_unit_m=float(obj.get("distance_unit_m", DEFAULT_DISTANCE_UNIT_M)),
    )
