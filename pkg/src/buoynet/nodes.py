"""Sensor-buoy model: periodic sampling, battery budget, frame emission.

Each buoy is a small state machine advanced by the scenario clock.  When
a sample falls due it reads the synthetic water temperature (quantized
to the sensor's 0.0625 °C grid), builds a frame and schedules one radio
transmission.  Energy is tracked in mAh against a fixed budget: a
continuous sleep drain, a per-sample active burst, a per-frame transmit
burst, and solar income scaled by the irradiance curve.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .frames import LoraFrame
from .geo import LatLon

SENSOR_STEP_C = 0.0625  # 12-bit DS18B20 resolution
SENSOR_MIN_C = -55.0
SENSOR_MAX_C = 125.0

NOMINAL_CELL_V = 3.7
BATTERY_EMPTY_MV = 3000
BATTERY_FULL_MV = 4200


class NodeMode(Enum):
    SLEEP = "sleep"
    ACTIVE = "active"
    TRANSMITTING = "transmitting"


@dataclass
class NodeConfig:
    node_id: int
    position: LatLon
    sample_period_s: float = 60.0
    battery_capacity_mah: float = 4 * 2600.0
    solar_panel_count: int = 6
    panel_power_mw: float = 100.0
    # current draws, representative for an SX1278/ATmega class node
    sleep_current_ma: float = 0.002
    sample_current_ma: float = 10.0
    sample_duration_s: float = 1.0
    tx_current_ma: float = 120.0
    airtime_s: float = 0.1
    tx_jitter_s: float = 1.0

    def __post_init__(self) -> None:
        if not (0 <= self.node_id <= 0xFFFF):
            raise ValueError(f"node_id out of range [0, 65535]: {self.node_id!r}")
        if not (self.sample_period_s > 0):
            raise ValueError(f"sample_period_s must be > 0, got {self.sample_period_s!r}")
        if not (self.battery_capacity_mah > 0):
            raise ValueError(f"battery_capacity_mah must be > 0, got {self.battery_capacity_mah!r}")
        if self.solar_panel_count < 0:
            raise ValueError(f"solar_panel_count must be >= 0, got {self.solar_panel_count!r}")
        if self.tx_jitter_s < 0:
            raise ValueError(f"tx_jitter_s must be >= 0, got {self.tx_jitter_s!r}")


@dataclass
class NodeState:
    """Mutable buoy state; `started` is the deployment button gate."""

    charge_mah: float
    seq: int = 0
    mode: NodeMode = NodeMode.SLEEP
    started: bool = True


def initial_state(config: NodeConfig, started: bool = True) -> NodeState:
    return NodeState(charge_mah=config.battery_capacity_mah, started=started)


@dataclass
class EnvironmentField:
    """Synthetic truth: water temperature over (position, time), sun over time."""

    water_temp_fn: Callable[[LatLon, float], float]
    irradiance_fn: Callable[[float], float]


def default_environment(
    base_temp_c: float = 20.0,
    diurnal_amplitude_c: float = 3.0,
    lat_gradient_c_per_deg: float = -0.2,
    day_length_s: float = 86_400.0,
) -> EnvironmentField:
    """Smooth seedless default field: diurnal sine plus a latitude gradient.

    Irradiance is a clipped sine over the day, zero at night.
    """

    def water_temp(pos: LatLon, t: float) -> float:
        diurnal = diurnal_amplitude_c * math.sin(2.0 * math.pi * t / day_length_s)
        return base_temp_c + diurnal + lat_gradient_c_per_deg * pos.lat

    def irradiance(t: float) -> float:
        return max(0.0, math.sin(2.0 * math.pi * t / day_length_s))

    return EnvironmentField(water_temp_fn=water_temp, irradiance_fn=irradiance)


@dataclass(frozen=True)
class Transmission:
    """One scheduled over-the-air frame, as the channel sees it."""

    frame: LoraFrame
    position: LatLon
    start_s: float
    airtime_s: float

    @property
    def end_s(self) -> float:
        return self.start_s + self.airtime_s


def sample_temperature(env: EnvironmentField, config: NodeConfig, t: float) -> float:
    """True temperature at the node, quantized to the sensor grid and clamped."""
    true_c = env.water_temp_fn(config.position, t)
    clamped = min(max(true_c, SENSOR_MIN_C), SENSOR_MAX_C)
    return round(clamped / SENSOR_STEP_C) * SENSOR_STEP_C


def solar_charge(config: NodeConfig, irradiance: float, dt: float) -> float:
    """Charge gained in mAh over `dt` seconds at the given sun fraction."""
    if not (0.0 <= irradiance <= 1.0):
        raise ValueError(f"irradiance out of range [0, 1]: {irradiance!r}")
    power_mw = config.solar_panel_count * config.panel_power_mw * irradiance
    return power_mw * dt / (3600.0 * NOMINAL_CELL_V)


def battery_millivolts(config: NodeConfig, charge_mah: float) -> int:
    """Terminal voltage proxy, linear in state of charge."""
    frac = min(max(charge_mah / config.battery_capacity_mah, 0.0), 1.0)
    return int(round(BATTERY_EMPTY_MV + (BATTERY_FULL_MV - BATTERY_EMPTY_MV) * frac))


def _due_samples(period: float, now: float, dt: float) -> list[float]:
    """Sample instants in (now, now + dt], multiples of the period."""
    first = math.floor(now / period) + 1
    due = []
    t = first * period
    while t <= now + dt:
        if t > now:
            due.append(t)
        t += period
    return due


def step(
    state: NodeState,
    config: NodeConfig,
    env: EnvironmentField,
    now: float,
    dt: float,
    rng: random.Random,
) -> list[Transmission]:
    """Advance one buoy by `dt` seconds, returning scheduled transmissions.

    Samples falling due are emitted only while the node is started and
    holds charge; drains and solar income always apply, with the charge
    clamped to [0, capacity] once per step.  A depleted node goes silent
    but may come back when the sun returns.
    """
    if not (dt > 0):
        raise ValueError(f"dt must be > 0, got {dt!r}")

    emitted: list[Transmission] = []
    drain_mah = config.sleep_current_ma * dt / 3600.0

    if state.started and state.charge_mah > 0:
        for due_t in _due_samples(config.sample_period_s, now, dt):
            temp_c = sample_temperature(env, config, due_t)
            frame = LoraFrame(
                node_id=config.node_id,
                seq=state.seq,
                temp_centi_c=int(round(temp_c * 100.0)),
                lat_e7=int(round(config.position.lat * 1e7)),
                lon_e7=int(round(config.position.lon * 1e7)),
                battery_mv=battery_millivolts(config, state.charge_mah),
            )
            state.seq = (state.seq + 1) & 0xFFFF
            jitter = rng.uniform(0.0, config.tx_jitter_s) if config.tx_jitter_s > 0 else 0.0
            emitted.append(
                Transmission(
                    frame=frame,
                    position=config.position,
                    start_s=due_t + jitter,
                    airtime_s=config.airtime_s,
                )
            )
            drain_mah += config.sample_current_ma * config.sample_duration_s / 3600.0
            drain_mah += config.tx_current_ma * config.airtime_s / 3600.0

    gain_mah = solar_charge(config, env.irradiance_fn(now), dt)
    state.charge_mah = min(max(state.charge_mah - drain_mah + gain_mah, 0.0), config.battery_capacity_mah)
    state.mode = NodeMode.TRANSMITTING if emitted else NodeMode.SLEEP
    return emitted
