"""MQTT 3.1.1 wire codec for the protocol subset the pipeline speaks.

Supported control packets: CONNECT, CONNACK, PUBLISH (qos 0/1), PUBACK,
SUBSCRIBE, SUBACK, PINGREQ, PINGRESP, DISCONNECT.  QoS 2, retained
messages, wills and auth are out of scope; qos 2 on the wire raises
UnsupportedFeatureError.

`decode_packet` is incremental: on a partial buffer it reports
needs-more-bytes by returning ``(None, 0)`` instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

MAX_REMAINING_LENGTH = 268_435_455

TYPE_CONNECT = 1
TYPE_CONNACK = 2
TYPE_PUBLISH = 3
TYPE_PUBACK = 4
TYPE_SUBSCRIBE = 8
TYPE_SUBACK = 9
TYPE_PINGREQ = 12
TYPE_PINGRESP = 13
TYPE_DISCONNECT = 14

CONNECT_ACCEPTED = 0
CONNECT_REFUSED_PROTOCOL = 1
CONNECT_REFUSED_IDENTIFIER = 2
CONNECT_REFUSED_UNAVAILABLE = 3
CONNECT_REFUSED_BAD_CREDENTIALS = 4
CONNECT_REFUSED_NOT_AUTHORIZED = 5


class ProtocolError(ValueError):
    """Malformed or out-of-contract MQTT bytes or packet fields."""


class UnsupportedFeatureError(ProtocolError):
    """Valid MQTT 3.1.1, but outside the supported subset (e.g. qos 2)."""


def _check_qos(qos: int) -> None:
    if qos == 2:
        raise UnsupportedFeatureError("qos 2 is not supported")
    if qos not in (0, 1):
        raise ProtocolError(f"invalid qos {qos!r}")


def _check_packet_id(packet_id: int) -> None:
    if not (1 <= packet_id <= 0xFFFF):
        raise ProtocolError(f"packet_id out of range [1, 65535]: {packet_id!r}")


def validate_topic_name(name: str) -> None:
    """Publish topics: non-empty UTF-8 without wildcard characters."""
    if not name:
        raise ProtocolError("topic name must be non-empty")
    if "+" in name or "#" in name:
        raise ProtocolError(f"topic name may not contain wildcards: {name!r}")
    if "\x00" in name:
        raise ProtocolError("topic name may not contain U+0000")


def validate_topic_filter(filter_: str) -> None:
    """Subscribe filters: '+' alone in a level, '#' alone in the last level."""
    if not filter_:
        raise ProtocolError("topic filter must be non-empty")
    if "\x00" in filter_:
        raise ProtocolError("topic filter may not contain U+0000")
    levels = filter_.split("/")
    for i, level in enumerate(levels):
        if "#" in level:
            if level != "#" or i != len(levels) - 1:
                raise ProtocolError(f"'#' must stand alone in the final level: {filter_!r}")
        if "+" in level and level != "+":
            raise ProtocolError(f"'+' must stand alone in its level: {filter_!r}")


@dataclass(frozen=True)
class Connect:
    client_id: str
    keep_alive_s: int = 30
    clean_session: bool = True

    def __post_init__(self) -> None:
        if not (0 <= self.keep_alive_s <= 0xFFFF):
            raise ProtocolError(f"keep_alive_s out of range [0, 65535]: {self.keep_alive_s!r}")


@dataclass(frozen=True)
class ConnAck:
    return_code: int
    session_present: bool = False


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes
    qos: int = 0
    packet_id: int | None = None
    dup: bool = False

    def __post_init__(self) -> None:
        validate_topic_name(self.topic)
        _check_qos(self.qos)
        if self.qos == 0 and self.packet_id is not None:
            raise ProtocolError("qos 0 publish must not carry a packet_id")
        if self.qos == 1:
            if self.packet_id is None:
                raise ProtocolError("qos 1 publish requires a packet_id")
            _check_packet_id(self.packet_id)


@dataclass(frozen=True)
class PubAck:
    packet_id: int

    def __post_init__(self) -> None:
        _check_packet_id(self.packet_id)


@dataclass(frozen=True)
class Subscribe:
    packet_id: int
    topic_filters: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        _check_packet_id(self.packet_id)
        if not self.topic_filters:
            raise ProtocolError("subscribe requires at least one topic filter")
        for filter_, qos in self.topic_filters:
            validate_topic_filter(filter_)
            _check_qos(qos)


@dataclass(frozen=True)
class SubAck:
    packet_id: int
    granted: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_packet_id(self.packet_id)
        for code in self.granted:
            if code not in (0, 1, 0x80):
                raise ProtocolError(f"invalid suback code 0x{code:02X}")


@dataclass(frozen=True)
class PingReq:
    pass


@dataclass(frozen=True)
class PingResp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


MqttPacket = Union[
    Connect, ConnAck, Publish, PubAck, Subscribe, SubAck, PingReq, PingResp, Disconnect
]


def encode_remaining_length(n: int) -> bytes:
    """Variable-length integer: 7 data bits per byte, 0x80 continuation."""
    if not (0 <= n <= MAX_REMAINING_LENGTH):
        raise ProtocolError(f"remaining length out of range [0, {MAX_REMAINING_LENGTH}]: {n!r}")
    out = bytearray()
    while True:
        n, digit = divmod(n, 128)
        out.append(digit | 0x80 if n else digit)
        if not n:
            return bytes(out)


def decode_remaining_length(data: bytes, offset: int = 0) -> tuple[int, int] | None:
    """Decode the variable-length integer at `offset`.

    Returns (value, bytes consumed), or None if the buffer ends before
    the final byte.  More than 4 length bytes is a protocol error.
    """
    value = 0
    for i in range(4):
        if offset + i >= len(data):
            return None
        byte = data[offset + i]
        value |= (byte & 0x7F) << (7 * i)
        if not byte & 0x80:
            return value, i + 1
    raise ProtocolError("remaining length exceeds 4 bytes")


def _encode_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolError(f"string too long for wire format: {len(raw)} bytes")
    return len(raw).to_bytes(2, "big") + raw


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProtocolError("packet shorter than its remaining length declares")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "big")

    def string(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"invalid UTF-8 in string field: {exc}") from exc

    def rest(self) -> bytes:
        chunk = self.data[self.pos :]
        self.pos = len(self.data)
        return chunk

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.pos} trailing bytes in packet body")


def encode_packet(packet: MqttPacket) -> bytes:
    """Serialize one control packet to its MQTT 3.1.1 byte form."""
    if isinstance(packet, Connect):
        flags = 0x02 if packet.clean_session else 0x00
        body = (
            _encode_string("MQTT")
            + bytes([0x04, flags])
            + packet.keep_alive_s.to_bytes(2, "big")
            + _encode_string(packet.client_id)
        )
        return _with_header(TYPE_CONNECT, 0, body)
    if isinstance(packet, ConnAck):
        body = bytes([0x01 if packet.session_present else 0x00, packet.return_code])
        return _with_header(TYPE_CONNACK, 0, body)
    if isinstance(packet, Publish):
        flags = (packet.qos << 1) | (0x08 if packet.dup else 0x00)
        body = _encode_string(packet.topic)
        if packet.qos == 1:
            body += packet.packet_id.to_bytes(2, "big")  # type: ignore[union-attr]
        body += packet.payload
        return _with_header(TYPE_PUBLISH, flags, body)
    if isinstance(packet, PubAck):
        return _with_header(TYPE_PUBACK, 0, packet.packet_id.to_bytes(2, "big"))
    if isinstance(packet, Subscribe):
        body = packet.packet_id.to_bytes(2, "big")
        for filter_, qos in packet.topic_filters:
            body += _encode_string(filter_) + bytes([qos])
        return _with_header(TYPE_SUBSCRIBE, 0x02, body)
    if isinstance(packet, SubAck):
        body = packet.packet_id.to_bytes(2, "big") + bytes(packet.granted)
        return _with_header(TYPE_SUBACK, 0, body)
    if isinstance(packet, PingReq):
        return _with_header(TYPE_PINGREQ, 0, b"")
    if isinstance(packet, PingResp):
        return _with_header(TYPE_PINGRESP, 0, b"")
    if isinstance(packet, Disconnect):
        return _with_header(TYPE_DISCONNECT, 0, b"")
    raise ProtocolError(f"cannot encode {type(packet).__name__}")


def _with_header(ptype: int, flags: int, body: bytes) -> bytes:
    return bytes([(ptype << 4) | flags]) + encode_remaining_length(len(body)) + body


def decode_packet(data: bytes) -> tuple[MqttPacket | None, int]:
    """Decode one packet from the front of `data`.

    Returns (packet, bytes consumed), or (None, 0) when `data` holds
    only part of a packet.  Malformed input raises ProtocolError.
    """
    if len(data) < 2:
        return None, 0
    first = data[0]
    ptype = first >> 4
    flags = first & 0x0F
    decoded_len = decode_remaining_length(data, 1)
    if decoded_len is None:
        return None, 0
    remaining, len_bytes = decoded_len
    total = 1 + len_bytes + remaining
    if len(data) < total:
        return None, 0
    body = _Reader(data[1 + len_bytes : total])
    packet = _decode_body(ptype, flags, body)
    body.done()
    return packet, total


def _decode_body(ptype: int, flags: int, body: _Reader) -> MqttPacket:
    if ptype == TYPE_PUBLISH:
        qos = (flags >> 1) & 0x03
        _check_qos(qos)
        if flags & 0x01:
            raise UnsupportedFeatureError("retained publishes are not supported")
        topic = body.string()
        validate_topic_name(topic)
        packet_id = body.u16() if qos == 1 else None
        return Publish(topic=topic, payload=body.rest(), qos=qos, packet_id=packet_id, dup=bool(flags & 0x08))
    if ptype == TYPE_CONNECT:
        _require_flags(ptype, flags, 0)
        proto = body.string()
        if proto != "MQTT":
            raise ProtocolError(f"unknown protocol name {proto!r}")
        level = body.u8()
        if level != 0x04:
            raise ProtocolError(f"unsupported protocol level 0x{level:02X}")
        connect_flags = body.u8()
        if connect_flags & ~0x02:
            raise UnsupportedFeatureError(
                f"connect flags 0x{connect_flags:02X} request features outside the subset"
            )
        keep_alive = body.u16()
        return Connect(client_id=body.string(), keep_alive_s=keep_alive, clean_session=bool(connect_flags & 0x02))
    if ptype == TYPE_CONNACK:
        _require_flags(ptype, flags, 0)
        ack_flags = body.u8()
        return ConnAck(return_code=body.u8(), session_present=bool(ack_flags & 0x01))
    if ptype == TYPE_PUBACK:
        _require_flags(ptype, flags, 0)
        return PubAck(packet_id=body.u16())
    if ptype == TYPE_SUBSCRIBE:
        _require_flags(ptype, flags, 0x02)
        packet_id = body.u16()
        filters = []
        while body.pos < len(body.data):
            filter_ = body.string()
            qos = body.u8()
            filters.append((filter_, qos))
        return Subscribe(packet_id=packet_id, topic_filters=tuple(filters))
    if ptype == TYPE_SUBACK:
        _require_flags(ptype, flags, 0)
        packet_id = body.u16()
        return SubAck(packet_id=packet_id, granted=tuple(body.rest()))
    if ptype == TYPE_PINGREQ:
        _require_flags(ptype, flags, 0)
        return PingReq()
    if ptype == TYPE_PINGRESP:
        _require_flags(ptype, flags, 0)
        return PingResp()
    if ptype == TYPE_DISCONNECT:
        _require_flags(ptype, flags, 0)
        return Disconnect()
    raise ProtocolError(f"unsupported packet type {ptype}")


def _require_flags(ptype: int, flags: int, expected: int) -> None:
    if flags != expected:
        raise ProtocolError(f"packet type {ptype} requires flags 0x{expected:X}, got 0x{flags:X}")


def topic_matches(filter_: str, name: str) -> bool:
    """MQTT 3.1.1 wildcard matching: '+' one level, '#' any trailing levels.

    Wildcard-led filters do not match topics beginning with '$'.
    """
    if name.startswith("$") and (filter_.startswith("+") or filter_.startswith("#")):
        return False
    flevels = filter_.split("/")
    nlevels = name.split("/")
    for i, flevel in enumerate(flevels):
        if flevel == "#":
            return True
        if i >= len(nlevels):
            return False
        if flevel == "+":
            continue
        if flevel != nlevels[i]:
            return False
    return len(flevels) == len(nlevels)
