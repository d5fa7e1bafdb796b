# swarmcast/core/codec.py

"""
Bit-exact wire codec for swarm frames.

Every field is fixed-width and big-endian. The layout is mirrored field by
field in docs/wire_format.rst; any change here must be reflected there.
"""

import logging
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Tuple, Union

from ..exceptions import (
    BadFrameTypeError,
    BadVersionError,
    CountMismatchError,
    InvariantViolationError,
    RangeError,
    SizeExceededError,
    TruncatedError,
)

logger = logging.getLogger(__name__)

VERSION = 1
MTU_BYTES = 1400
MAX_TTL = 8
TAG_SIZE = 16
MAX_CIPHERTEXT = 255
POINT_SIZE = 32
WRAPPED_KEY_SIZE = 16

_HEADER = struct.Struct(">BBHIBB")
_NHT_ENTRY = struct.Struct(">HHB")
_SEALED_HEAD = struct.Struct(">HIQBB")
_OGM = struct.Struct(">HHB")
_KEYX_HEAD = struct.Struct(">BH")
_PAYLOAD = struct.Struct(">iiihhhHB")

HEADER_SIZE = _HEADER.size  # 10
NHT_ENTRY_SIZE = _NHT_ENTRY.size  # 5
SEALED_OVERHEAD = _SEALED_HEAD.size + TAG_SIZE  # 32
OGM_BODY_SIZE = _OGM.size  # 5
PUBKEY_BODY_SIZE = _KEYX_HEAD.size + POINT_SIZE  # 35
WRAPPED_BODY_SIZE = _KEYX_HEAD.size + WRAPPED_KEY_SIZE + TAG_SIZE  # 35
PAYLOAD_SIZE = _PAYLOAD.size  # 21

_U8 = 0xFF
_U16 = 0xFFFF
_U32 = 0xFFFFFFFF
_U64 = 0xFFFFFFFFFFFFFFFF


class FrameType(IntEnum):
    DATA = 0
    OGM = 1
    KEYX = 2


class KeyxPhase(IntEnum):
    PUBKEY = 1
    WRAPPED = 2


@dataclass(frozen=True)
class TelemetryPayload:
    """Fixed-size telemetry sample carried inside every sealed message."""

    latitude: int = 0  # 1e-7 degrees
    longitude: int = 0  # 1e-7 degrees
    altitude: int = 0  # millimeters
    velocity_x: int = 0  # cm/s
    velocity_y: int = 0
    velocity_z: int = 0
    heading: int = 0  # centidegrees
    battery: int = 0  # percent


@dataclass(frozen=True)
class SealedMessage:
    """Per-origin encrypted and authenticated telemetry unit."""

    origin: int
    origin_seq: int
    timestamp_ms: int
    ttl: int
    ciphertext: bytes
    tag: bytes

    @property
    def message_id(self) -> Tuple[int, int]:
        return (self.origin, self.origin_seq)

    def with_ttl(self, ttl: int) -> "SealedMessage":
        return SealedMessage(
            self.origin, self.origin_seq, self.timestamp_ms, ttl, self.ciphertext, self.tag
        )


@dataclass(frozen=True)
class NextHopEntry:
    destination: int
    next_hop: int
    hop_count: int


@dataclass(frozen=True)
class OgmBody:
    originator: int
    ogm_seq: int
    metric: int


@dataclass(frozen=True)
class PubkeyBody:
    owner: int
    public_point: bytes

    phase = KeyxPhase.PUBKEY


@dataclass(frozen=True)
class WrappedKeyBody:
    member: int
    wrapped_key: bytes
    wrap_tag: bytes

    phase = KeyxPhase.WRAPPED


KeyxBody = Union[PubkeyBody, WrappedKeyBody]


@dataclass(frozen=True)
class Frame:
    """
    The on-air unit.

    DATA frames carry ``messages``, OGM frames carry exactly one ``ogm`` body
    and KEYX frames carry one or more ``keyx`` bodies. The next-hop table is
    only allowed on DATA and OGM frames.
    """

    frame_type: FrameType
    sender: int
    frame_seq: int
    next_hop_table: Tuple[NextHopEntry, ...] = ()
    messages: Tuple[SealedMessage, ...] = ()
    ogm: Optional[OgmBody] = None
    keyx: Tuple[KeyxBody, ...] = ()
    version: int = VERSION

    @property
    def frame_id(self) -> Tuple[int, int]:
        return (self.sender, self.frame_seq)


def sealed_size(message: SealedMessage) -> int:
    return SEALED_OVERHEAD + len(message.ciphertext)


def encoded_size(frame: Frame) -> int:
    """
    Closed-form size of an encoded frame.

    DATA: 10 + 5*|nht| + sum(32 + ct_len); OGM: 10 + 5*|nht| + 5;
    KEYX: 10 + 35 per body.
    """
    size = HEADER_SIZE + NHT_ENTRY_SIZE * len(frame.next_hop_table)
    if frame.frame_type == FrameType.DATA:
        size += sum(sealed_size(m) for m in frame.messages)
    elif frame.frame_type == FrameType.OGM:
        size += OGM_BODY_SIZE
    else:
        size += sum(
            PUBKEY_BODY_SIZE if isinstance(b, PubkeyBody) else WRAPPED_BODY_SIZE
            for b in frame.keyx
        )
    return size


def _check_node_id(value: int, name: str, offset: Optional[int] = None) -> None:
    if not 0 < value <= _U16:
        raise InvariantViolationError(f"{name} must be a non-zero 16-bit node id", offset)


def _check_uint(value: int, limit: int, name: str) -> None:
    if not 0 <= value <= limit:
        raise InvariantViolationError(f"{name} out of range: {value}")


def validate_frame(frame: Frame, max_ttl: int = MAX_TTL) -> None:
    """
    Check every Frame invariant except the MTU bound.

    Raises:
        InvariantViolationError: On the first broken invariant
    """
    if frame.version != VERSION:
        raise InvariantViolationError(f"unsupported version {frame.version}")
    try:
        FrameType(frame.frame_type)
    except ValueError:
        raise InvariantViolationError(f"unknown frame type {frame.frame_type}") from None
    _check_node_id(frame.sender, "sender")
    _check_uint(frame.frame_seq, _U32, "frame_seq")

    if frame.next_hop_table and frame.frame_type == FrameType.KEYX:
        raise InvariantViolationError("next-hop table not allowed on KEYX frames")
    if len(frame.next_hop_table) > _U8:
        raise InvariantViolationError("too many next-hop entries")
    for entry in frame.next_hop_table:
        _check_node_id(entry.destination, "destination")
        _check_node_id(entry.next_hop, "next_hop")
        if entry.destination == frame.sender:
            raise InvariantViolationError("next-hop entry names the advertiser")
        if not 1 <= entry.hop_count <= _U8:
            raise InvariantViolationError("hop_count must be between 1 and 255")

    if frame.frame_type == FrameType.DATA:
        if not frame.messages:
            raise InvariantViolationError("DATA frame without messages")
        if frame.ogm is not None or frame.keyx:
            raise InvariantViolationError("DATA frame with foreign body")
        if len(frame.messages) > _U8:
            raise InvariantViolationError("too many messages")
        for message in frame.messages:
            _validate_sealed(message, max_ttl)
    elif frame.frame_type == FrameType.OGM:
        if frame.ogm is None or frame.messages or frame.keyx:
            raise InvariantViolationError("OGM frame must carry exactly one OGM body")
        _check_node_id(frame.ogm.originator, "originator")
        _check_uint(frame.ogm.ogm_seq, _U16, "ogm_seq")
        _check_uint(frame.ogm.metric, _U8, "metric")
    else:
        if not frame.keyx or frame.messages or frame.ogm is not None:
            raise InvariantViolationError("KEYX frame must carry KEYX bodies only")
        if len(frame.keyx) > _U8:
            raise InvariantViolationError("too many KEYX bodies")
        for body in frame.keyx:
            _validate_keyx(body)


def _validate_sealed(message: SealedMessage, max_ttl: int) -> None:
    _check_node_id(message.origin, "origin")
    _check_uint(message.origin_seq, _U32, "origin_seq")
    _check_uint(message.timestamp_ms, _U64, "timestamp_ms")
    if not 0 <= message.ttl <= max_ttl:
        raise InvariantViolationError(f"ttl {message.ttl} exceeds {max_ttl}")
    if len(message.ciphertext) > MAX_CIPHERTEXT:
        raise InvariantViolationError("ciphertext longer than 255 bytes")
    if len(message.tag) != TAG_SIZE:
        raise InvariantViolationError("tag must be exactly 16 bytes")


def _validate_keyx(body: KeyxBody) -> None:
    if isinstance(body, PubkeyBody):
        _check_node_id(body.owner, "owner")
        if len(body.public_point) != POINT_SIZE:
            raise InvariantViolationError("public point must be 32 bytes")
    elif isinstance(body, WrappedKeyBody):
        _check_node_id(body.member, "member")
        if len(body.wrapped_key) != WRAPPED_KEY_SIZE or len(body.wrap_tag) != TAG_SIZE:
            raise InvariantViolationError("wrapped key and wrap tag must be 16 bytes")
    else:
        raise InvariantViolationError(f"unknown KEYX body {type(body).__name__}")


def encode_frame(frame: Frame, mtu: int = MTU_BYTES, max_ttl: int = MAX_TTL) -> bytes:
    """
    Encode a frame into its wire representation.

    Args:
        frame: Frame satisfying all Frame invariants
        mtu: Maximum encoded size in bytes
        max_ttl: Largest ttl accepted on sealed messages

    Returns:
        Encoded bytes

    Raises:
        InvariantViolationError: If the frame is malformed
        SizeExceededError: If the encoding would exceed ``mtu``
    """
    validate_frame(frame, max_ttl)
    size = encoded_size(frame)
    if size > mtu:
        raise SizeExceededError(f"frame of {size} bytes exceeds MTU {mtu}")

    if frame.frame_type == FrameType.DATA:
        count = len(frame.messages)
    elif frame.frame_type == FrameType.KEYX:
        count = len(frame.keyx)
    else:
        count = 0

    parts: List[bytes] = [
        _HEADER.pack(
            frame.version,
            int(frame.frame_type),
            frame.sender,
            frame.frame_seq,
            len(frame.next_hop_table),
            count,
        )
    ]
    for entry in frame.next_hop_table:
        parts.append(_NHT_ENTRY.pack(entry.destination, entry.next_hop, entry.hop_count))

    if frame.frame_type == FrameType.DATA:
        for m in frame.messages:
            parts.append(
                _SEALED_HEAD.pack(m.origin, m.origin_seq, m.timestamp_ms, m.ttl, len(m.ciphertext))
            )
            parts.append(m.ciphertext)
            parts.append(m.tag)
    elif frame.frame_type == FrameType.OGM:
        parts.append(_OGM.pack(frame.ogm.originator, frame.ogm.ogm_seq, frame.ogm.metric))
    else:
        for body in frame.keyx:
            if isinstance(body, PubkeyBody):
                parts.append(_KEYX_HEAD.pack(KeyxPhase.PUBKEY, body.owner))
                parts.append(body.public_point)
            else:
                parts.append(_KEYX_HEAD.pack(KeyxPhase.WRAPPED, body.member))
                parts.append(body.wrapped_key)
                parts.append(body.wrap_tag)

    return b"".join(parts)


class _Reader:
    """Cursor over raw bytes that reports the offset of every failure."""

    def __init__(self, raw: bytes):
        self.raw = raw
        self.offset = 0

    def unpack(self, fmt: struct.Struct, what: str) -> tuple:
        end = self.offset + fmt.size
        if end > len(self.raw):
            raise TruncatedError(f"truncated {what}", self.offset)
        values = fmt.unpack_from(self.raw, self.offset)
        self.offset = end
        return values

    def take(self, n: int, what: str) -> bytes:
        end = self.offset + n
        if end > len(self.raw):
            raise TruncatedError(f"truncated {what}", self.offset)
        chunk = bytes(self.raw[self.offset : end])
        self.offset = end
        return chunk


def decode_frame(raw: bytes, max_ttl: int = MAX_TTL) -> Frame:
    """
    Decode wire bytes into a Frame.

    Accepts arbitrary input: every failure is a CodecError naming the
    first offending offset.

    Raises:
        TruncatedError, BadVersionError, BadFrameTypeError,
        CountMismatchError, InvariantViolationError
    """
    reader = _Reader(raw)
    version, frame_type, sender, frame_seq, nht_count, count = reader.unpack(_HEADER, "header")
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}", 0)
    try:
        ftype = FrameType(frame_type)
    except ValueError:
        raise BadFrameTypeError(f"unknown frame type {frame_type}", 1) from None
    _check_node_id(sender, "sender", 2)

    if ftype == FrameType.KEYX and nht_count:
        raise CountMismatchError("next-hop table not allowed on KEYX frames", 8)
    if ftype == FrameType.OGM and count:
        raise CountMismatchError("OGM frame declares messages", 9)
    if ftype in (FrameType.DATA, FrameType.KEYX) and not count:
        raise CountMismatchError(f"{ftype.name} frame without bodies", 9)

    table = []
    for _ in range(nht_count):
        at = reader.offset
        destination, next_hop, hop_count = reader.unpack(_NHT_ENTRY, "next-hop entry")
        _check_node_id(destination, "destination", at)
        _check_node_id(next_hop, "next_hop", at + 2)
        if destination == sender:
            raise InvariantViolationError("next-hop entry names the advertiser", at)
        if hop_count == 0:
            raise InvariantViolationError("hop_count must be at least 1", at + 4)
        table.append(NextHopEntry(destination, next_hop, hop_count))

    messages: List[SealedMessage] = []
    ogm = None
    keyx: List[KeyxBody] = []

    if ftype == FrameType.DATA:
        for _ in range(count):
            at = reader.offset
            origin, origin_seq, timestamp_ms, ttl, ct_len = reader.unpack(
                _SEALED_HEAD, "sealed message header"
            )
            _check_node_id(origin, "origin", at)
            if ttl > max_ttl:
                raise InvariantViolationError(f"ttl {ttl} exceeds {max_ttl}", at + 14)
            ciphertext = reader.take(ct_len, "ciphertext")
            tag = reader.take(TAG_SIZE, "tag")
            messages.append(SealedMessage(origin, origin_seq, timestamp_ms, ttl, ciphertext, tag))
    elif ftype == FrameType.OGM:
        at = reader.offset
        originator, ogm_seq, metric = reader.unpack(_OGM, "OGM body")
        _check_node_id(originator, "originator", at)
        ogm = OgmBody(originator, ogm_seq, metric)
    else:
        for _ in range(count):
            at = reader.offset
            phase, node = reader.unpack(_KEYX_HEAD, "KEYX body header")
            _check_node_id(node, "KEYX node id", at + 1)
            if phase == KeyxPhase.PUBKEY:
                keyx.append(PubkeyBody(node, reader.take(POINT_SIZE, "public point")))
            elif phase == KeyxPhase.WRAPPED:
                wrapped = reader.take(WRAPPED_KEY_SIZE, "wrapped key")
                keyx.append(WrappedKeyBody(node, wrapped, reader.take(TAG_SIZE, "wrap tag")))
            else:
                raise BadFrameTypeError(f"unknown KEYX phase {phase}", at)

    if reader.offset != len(raw):
        raise CountMismatchError(
            f"{len(raw) - reader.offset} trailing bytes after declared content", reader.offset
        )

    return Frame(
        frame_type=ftype,
        sender=sender,
        frame_seq=frame_seq,
        next_hop_table=tuple(table),
        messages=tuple(messages),
        ogm=ogm,
        keyx=tuple(keyx),
        version=version,
    )


def encode_payload(payload: TelemetryPayload) -> bytes:
    """
    Encode a telemetry sample as exactly 21 big-endian bytes.

    Raises:
        RangeError: If a field is outside its range
    """
    if not 0 <= payload.heading < 36000:
        raise RangeError(f"heading {payload.heading} outside [0, 36000)")
    if not 0 <= payload.battery <= 100:
        raise RangeError(f"battery {payload.battery} outside [0, 100]")
    try:
        return _PAYLOAD.pack(
            payload.latitude,
            payload.longitude,
            payload.altitude,
            payload.velocity_x,
            payload.velocity_y,
            payload.velocity_z,
            payload.heading,
            payload.battery,
        )
    except struct.error as e:
        raise RangeError(f"telemetry field out of range: {e}") from None


def decode_payload(raw: bytes) -> TelemetryPayload:
    """Inverse of encode_payload."""
    if len(raw) != PAYLOAD_SIZE:
        raise TruncatedError(f"telemetry payload must be {PAYLOAD_SIZE} bytes", min(len(raw), 21))
    payload = TelemetryPayload(*_PAYLOAD.unpack(raw))
    if payload.heading >= 36000:
        raise RangeError(f"heading {payload.heading} outside [0, 36000)", 18)
    if payload.battery > 100:
        raise RangeError(f"battery {payload.battery} outside [0, 100]", 20)
    return payload


def describe_frame(frame: Frame) -> List[str]:
    """Field-by-field listing of a decoded frame."""
    lines = [
        f"version      {frame.version}",
        f"frame_type   {frame.frame_type.name}",
        f"sender       {frame.sender}",
        f"frame_seq    {frame.frame_seq}",
        f"nht_count    {len(frame.next_hop_table)}",
    ]
    for i, entry in enumerate(frame.next_hop_table):
        lines.append(
            f"  nht[{i}]     dest={entry.destination} next_hop={entry.next_hop} "
            f"hops={entry.hop_count}"
        )
    if frame.frame_type == FrameType.DATA:
        lines.append(f"msg_count    {len(frame.messages)}")
        for i, m in enumerate(frame.messages):
            lines.append(
                f"  msg[{i}]     origin={m.origin} seq={m.origin_seq} ts={m.timestamp_ms} "
                f"ttl={m.ttl} ct_len={len(m.ciphertext)}"
            )
            lines.append(f"             ciphertext={m.ciphertext.hex()}")
            lines.append(f"             tag={m.tag.hex()}")
    elif frame.frame_type == FrameType.OGM:
        lines.append(
            f"ogm          originator={frame.ogm.originator} seq={frame.ogm.ogm_seq} "
            f"metric={frame.ogm.metric}"
        )
    else:
        lines.append(f"keyx_count   {len(frame.keyx)}")
        for i, body in enumerate(frame.keyx):
            if isinstance(body, PubkeyBody):
                lines.append(
                    f"  keyx[{i}]    PUBKEY owner={body.owner} point={body.public_point.hex()}"
                )
            else:
                lines.append(
                    f"  keyx[{i}]    WRAPPED member={body.member} "
                    f"key={body.wrapped_key.hex()} tag={body.wrap_tag.hex()}"
                )
    lines.append(f"size         {encoded_size(frame)} bytes")
    return lines
