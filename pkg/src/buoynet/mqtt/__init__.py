"""MQTT 3.1.1 subset: wire codec, client session state machine, embedded broker."""

from .broker import DEFAULT_BROKER_PORT, BrokerServer, BrokerSession, EmbeddedBroker, route_publish
from .codec import (
    ConnAck,
    Connect,
    Disconnect,
    MqttPacket,
    PingReq,
    PingResp,
    ProtocolError,
    PubAck,
    Publish,
    SubAck,
    Subscribe,
    UnsupportedFeatureError,
    decode_packet,
    decode_remaining_length,
    encode_packet,
    encode_remaining_length,
    topic_matches,
    validate_topic_filter,
    validate_topic_name,
)
from .session import MqttClientSession, SessionActions, SessionState

__all__ = [
    "BrokerServer",
    "BrokerSession",
    "ConnAck",
    "Connect",
    "DEFAULT_BROKER_PORT",
    "Disconnect",
    "EmbeddedBroker",
    "MqttClientSession",
    "MqttPacket",
    "PingReq",
    "PingResp",
    "ProtocolError",
    "PubAck",
    "Publish",
    "SessionActions",
    "SessionState",
    "SubAck",
    "Subscribe",
    "UnsupportedFeatureError",
    "decode_packet",
    "decode_remaining_length",
    "encode_packet",
    "encode_remaining_length",
    "route_publish",
    "topic_matches",
    "validate_topic_filter",
    "validate_topic_name",
]
