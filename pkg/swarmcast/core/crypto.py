# swarmcast/core/crypto.py

"""
Message security primitives.

X25519 key agreement, AES-128 in counter mode for confidentiality and a
truncated HMAC-SHA-256 tag for authenticity (encrypt-then-MAC). The ttl of a
sealed message is not authenticated; relays decrement it in flight.
"""

import logging
import struct
from dataclasses import dataclass
from typing import Tuple

from cryptography.hazmat.primitives import constant_time, hashes, hmac
from cryptography.hazmat.primitives.asymmetric import x25519
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ..exceptions import BadTagError, LowOrderPointError, PlaintextTooLongError
from .codec import MAX_CIPHERTEXT, TAG_SIZE, SealedMessage
from .replay import ReplayState

logger = logging.getLogger(__name__)

KEY_SIZE = 16
WRAP_LABEL = b"swarmcast/keywrap/v1"

_NONCE_HEAD = struct.Struct(">HIQ")
_WRAP_IDS = struct.Struct(">HH")


@dataclass(frozen=True)
class KeyPair:
    """X25519 key pair. The private scalar never leaves the node."""

    private_scalar: bytes
    public_point: bytes

    def __repr__(self) -> str:
        return f"KeyPair(public_point={self.public_point.hex()})"


@dataclass(frozen=True)
class SessionKey:
    """128-bit group session key."""

    key: bytes

    def __post_init__(self):
        if len(self.key) != KEY_SIZE:
            raise ValueError("session key must be 16 bytes")

    def __repr__(self) -> str:
        return "SessionKey(<redacted>)"


def generate_keypair(rng_seed: bytes) -> KeyPair:
    """
    Derive a key pair deterministically from a 32-byte seed.

    The seed is used as the raw X25519 private key; clamping is applied by
    the curve implementation, so every seed value is valid.
    """
    if len(rng_seed) != 32:
        raise ValueError("key pair seed must be 32 bytes")
    private = x25519.X25519PrivateKey.from_private_bytes(rng_seed)
    return KeyPair(
        private_scalar=bytes(rng_seed), public_point=private.public_key().public_bytes_raw()
    )


def ecdh_shared(my: KeyPair, their_public: bytes) -> bytes:
    """
    X25519 shared secret between ``my`` and a peer's public point.

    Raises:
        LowOrderPointError: If the shared secret is all zeros
    """
    if len(their_public) != 32:
        raise ValueError("public point must be 32 bytes")
    private = x25519.X25519PrivateKey.from_private_bytes(my.private_scalar)
    try:
        shared = private.exchange(x25519.X25519PublicKey.from_public_bytes(their_public))
    except ValueError:
        # OpenSSL refuses to return the all-zero output of a low-order point.
        raise LowOrderPointError("peer public point has low order") from None
    if shared == bytes(32):
        raise LowOrderPointError("peer public point has low order")
    return shared


def derive_wrapping_key(pairwise_secret: bytes) -> bytes:
    """Hash a pairwise secret under a fixed label and keep 16 bytes."""
    digest = hashes.Hash(hashes.SHA256())
    digest.update(WRAP_LABEL)
    digest.update(pairwise_secret)
    return digest.finalize()[:KEY_SIZE]


def _ctr(key: bytes, nonce: bytes, data: bytes) -> bytes:
    encryptor = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return encryptor.update(data) + encryptor.finalize()


def _truncated_hmac(key: bytes, *parts: bytes) -> bytes:
    mac = hmac.HMAC(key, hashes.SHA256())
    for part in parts:
        mac.update(part)
    return mac.finalize()[:TAG_SIZE]


def message_nonce(origin: int, origin_seq: int, timestamp_ms: int) -> bytes:
    """origin(2) || origin_seq(4) || timestamp_ms(8) || two zero counter bytes."""
    return _NONCE_HEAD.pack(origin, origin_seq, timestamp_ms) + b"\x00\x00"


def _authenticated_header(origin: int, origin_seq: int, timestamp_ms: int) -> bytes:
    return _NONCE_HEAD.pack(origin, origin_seq, timestamp_ms)


def seal_message(
    key: SessionKey,
    origin: int,
    origin_seq: int,
    timestamp_ms: int,
    ttl: int,
    plaintext: bytes,
) -> SealedMessage:
    """
    Encrypt and authenticate a plaintext.

    Raises:
        PlaintextTooLongError: If the plaintext exceeds 255 bytes
    """
    if len(plaintext) > MAX_CIPHERTEXT:
        raise PlaintextTooLongError(f"plaintext of {len(plaintext)} bytes exceeds 255")
    ciphertext = _ctr(key.key, message_nonce(origin, origin_seq, timestamp_ms), plaintext)
    tag = _truncated_hmac(
        key.key, _authenticated_header(origin, origin_seq, timestamp_ms), ciphertext
    )
    return SealedMessage(origin, origin_seq, timestamp_ms, ttl, ciphertext, tag)


def verify_tag(key: SessionKey, msg: SealedMessage) -> bool:
    """Constant-time check of a sealed message's tag."""
    header = _authenticated_header(msg.origin, msg.origin_seq, msg.timestamp_ms)
    expected = _truncated_hmac(key.key, header, msg.ciphertext)
    return constant_time.bytes_eq(expected, msg.tag)


def open_message(
    key: SessionKey, msg: SealedMessage, replay: ReplayState, now_ms: int
) -> Tuple[bytes, ReplayState]:
    """
    Verify, check freshness and replay, then decrypt.

    The tag is verified before anything else is looked at. On success the
    (origin, origin_seq) pair is marked consumed in ``replay``.

    The plaintext is returned as raw bytes, not a decoded payload. Callers
    run it through ``decode_payload``; the node engine counts a plaintext
    that fails to decode as ``rejected_payload``.

    Returns:
        Tuple of (plaintext bytes, replay state)

    Raises:
        BadTagError: If the tag does not verify
        StaleError: If the timestamp is outside the freshness window
        ReplayedError: If the sequence number was already consumed
    """
    if not verify_tag(key, msg):
        raise BadTagError(f"bad tag on message {msg.origin}:{msg.origin_seq}")
    replay.check(msg.origin, msg.origin_seq, msg.timestamp_ms, now_ms)
    nonce = message_nonce(msg.origin, msg.origin_seq, msg.timestamp_ms)
    plaintext = _ctr(key.key, nonce, msg.ciphertext)
    replay.accept(msg.origin, msg.origin_seq)
    return plaintext, replay


def wrap_session_key(
    wrapping_key: bytes, leader: int, member: int, session_key: SessionKey
) -> Tuple[bytes, bytes]:
    """Encrypt-then-MAC a session key for one member."""
    ids = _WRAP_IDS.pack(leader, member)
    wrapped = _ctr(wrapping_key, ids + bytes(12), session_key.key)
    return wrapped, _truncated_hmac(wrapping_key, ids, wrapped)


def unwrap_session_key(
    wrapping_key: bytes, leader: int, member: int, wrapped: bytes, wrap_tag: bytes
) -> SessionKey:
    """
    Inverse of wrap_session_key.

    Raises:
        BadTagError: If the wrap tag does not verify
    """
    ids = _WRAP_IDS.pack(leader, member)
    if not constant_time.bytes_eq(_truncated_hmac(wrapping_key, ids, wrapped), wrap_tag):
        raise BadTagError(f"bad wrap tag for member {member}")
    return SessionKey(_ctr(wrapping_key, ids + bytes(12), wrapped))
