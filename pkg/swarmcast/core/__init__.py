"""Protocol core: wire codec, message security, key agreement, routing and forwarding."""

from .codec import Frame, FrameType, SealedMessage, TelemetryPayload, decode_frame, encode_frame
from .crypto import KeyPair, SessionKey, generate_keypair, open_message, seal_message
from .forwarding import ForwardingMode, aggregate, should_forward
from .keyexchange import GroupKeyExchange, run_group_exchange
from .routing import Router

__all__ = [
    "Frame",
    "FrameType",
    "SealedMessage",
    "TelemetryPayload",
    "decode_frame",
    "encode_frame",
    "KeyPair",
    "SessionKey",
    "generate_keypair",
    "open_message",
    "seal_message",
    "ForwardingMode",
    "aggregate",
    "should_forward",
    "GroupKeyExchange",
    "run_group_exchange",
    "Router",
]
