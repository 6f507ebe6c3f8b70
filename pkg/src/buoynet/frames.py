"""Over-the-air application frame carried by the simulated radio link.

Fixed 20-byte layout, all multi-byte fields big-endian:

    offset  size  field
    0       1     magic 0xA5
    1       1     version (currently 1)
    2       2     node_id        uint16
    4       2     seq            uint16, wraps
    6       2     temp_centi_c   int16, °C * 100
    8       4     lat_e7         int32, degrees * 1e7
    12      4     lon_e7         int32, degrees * 1e7
    16      2     battery_mv     uint16
    18      2     crc            CRC-16/CCITT-FALSE over bytes 0..17

CRC parameters: poly 0x1021, init 0xFFFF, no reflection, no final xor
(check value over ASCII "123456789" is 0x29B1).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

FRAME_MAGIC = 0xA5
FRAME_VERSION = 1
FRAME_LEN = 20

_BODY = struct.Struct(">BBHHhiiH")

TEMP_CENTI_MIN = -5500  # DS18B20 operating range, -55..125 °C
TEMP_CENTI_MAX = 12500
LAT_E7_LIMIT = 900_000_000
LON_E7_LIMIT = 1_800_000_000


class FrameError(ValueError):
    """Base class for frame codec failures."""


class FrameFieldError(FrameError):
    """A field is outside its wire range."""


class NotAFrameError(FrameError):
    """First byte is not the frame magic."""


class TruncatedFrameError(FrameError):
    """Input is not exactly one whole frame."""


class CorruptFrameError(FrameError):
    """Checksum mismatch."""


class UnsupportedVersionError(FrameError):
    """Frame version this codec does not speak."""


def _make_crc_table() -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _make_crc_table()


def crc16_ccitt(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE of `data`, continuing from `crc`."""
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ byte) & 0xFF]
    return crc


@dataclass(frozen=True)
class LoraFrame:
    """One application frame: identity, measurement, position, power."""

    node_id: int
    seq: int
    temp_centi_c: int
    lat_e7: int
    lon_e7: int
    battery_mv: int
    version: int = FRAME_VERSION

    def __post_init__(self) -> None:
        _check_u16("node_id", self.node_id)
        _check_u16("seq", self.seq)
        _check_u16("battery_mv", self.battery_mv)
        if not (0 <= self.version <= 255):
            raise FrameFieldError(f"version out of range [0, 255]: {self.version!r}")
        if not (TEMP_CENTI_MIN <= self.temp_centi_c <= TEMP_CENTI_MAX):
            raise FrameFieldError(
                f"temp_centi_c out of range [{TEMP_CENTI_MIN}, {TEMP_CENTI_MAX}]: {self.temp_centi_c!r}"
            )
        if not (-LAT_E7_LIMIT <= self.lat_e7 <= LAT_E7_LIMIT):
            raise FrameFieldError(f"lat_e7 out of range ±{LAT_E7_LIMIT}: {self.lat_e7!r}")
        if not (-LON_E7_LIMIT <= self.lon_e7 <= LON_E7_LIMIT):
            raise FrameFieldError(f"lon_e7 out of range ±{LON_E7_LIMIT}: {self.lon_e7!r}")


def _check_u16(name: str, value: int) -> None:
    if not (0 <= value <= 0xFFFF):
        raise FrameFieldError(f"{name} out of range [0, 65535]: {value!r}")


def encode_frame(frame: LoraFrame) -> bytes:
    body = _BODY.pack(
        FRAME_MAGIC,
        frame.version,
        frame.node_id,
        frame.seq,
        frame.temp_centi_c,
        frame.lat_e7,
        frame.lon_e7,
        frame.battery_mv,
    )
    return body + crc16_ccitt(body).to_bytes(2, "big")


def decode_frame(data: bytes) -> LoraFrame:
    """Inverse of :func:`encode_frame`.

    Raises NotAFrameError on bad magic, TruncatedFrameError on wrong
    length, UnsupportedVersionError on unknown version and
    CorruptFrameError on checksum mismatch.
    """
    if len(data) == 0:
        raise TruncatedFrameError("empty input")
    if data[0] != FRAME_MAGIC:
        raise NotAFrameError(f"bad magic 0x{data[0]:02X}, expected 0x{FRAME_MAGIC:02X}")
    if len(data) != FRAME_LEN:
        raise TruncatedFrameError(f"expected {FRAME_LEN} bytes, got {len(data)}")
    if data[1] != FRAME_VERSION:
        raise UnsupportedVersionError(f"version {data[1]}, expected {FRAME_VERSION}")
    stored = int.from_bytes(data[18:20], "big")
    computed = crc16_ccitt(data[:18])
    if stored != computed:
        raise CorruptFrameError(f"crc mismatch: stored 0x{stored:04X}, computed 0x{computed:04X}")
    _, version, node_id, seq, temp, lat, lon, batt = _BODY.unpack(data[:18])
    return LoraFrame(
        node_id=node_id,
        seq=seq,
        temp_centi_c=temp,
        lat_e7=lat,
        lon_e7=lon,
        battery_mv=batt,
        version=version,
    )
