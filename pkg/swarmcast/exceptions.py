"""
Custom exceptions for swarmcast.

This module defines specific exception classes for the codec, security,
routing, configuration and simulation layers so callers can tell malformed
input apart from protocol rejections and from internal faults.
"""

from typing import Optional


class SwarmcastError(Exception):
    """Base exception for all swarmcast errors."""

    pass


class CodecError(SwarmcastError):
    """Raised when a frame or payload cannot be encoded or decoded."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncatedError(CodecError):
    """Raised when the input ends before a field is complete."""

    pass


class BadVersionError(CodecError):
    """Raised when the frame version byte is not supported."""

    pass


class BadFrameTypeError(CodecError):
    """Raised when the frame type byte is unknown."""

    pass


class CountMismatchError(CodecError):
    """Raised when declared counts disagree with the bytes present."""

    pass


class SizeExceededError(CodecError):
    """Raised when an encoded frame would not fit in the MTU."""

    pass


class InvariantViolationError(CodecError):
    """Raised when a structurally valid frame breaks a field invariant."""

    pass


class RangeError(CodecError):
    """Raised when a telemetry field is outside its allowed range."""

    pass


class CryptoError(SwarmcastError):
    """Raised when a security operation fails."""

    pass


class BadTagError(CryptoError):
    """Raised when a message authentication tag does not verify."""

    pass


class StaleError(CryptoError):
    """Raised when a message timestamp is outside the freshness window."""

    pass


class ReplayedError(CryptoError):
    """Raised when a message sequence number was already consumed."""

    pass


class LowOrderPointError(CryptoError):
    """Raised when a key agreement yields the all-zero shared secret."""

    pass


class PlaintextTooLongError(CryptoError):
    """Raised when a plaintext does not fit in a sealed message."""

    pass


class UnknownMemberError(CryptoError):
    """Raised when key exchange material comes from outside the roster."""

    pass


class RoutingError(SwarmcastError):
    """Raised when routing state is unusable."""

    pass


class OrphanedError(RoutingError):
    """Raised when a node has no live spanning-tree parent candidate."""

    pass


class RoutingLoopError(RoutingError):
    """Raised when following next hops revisits a node."""

    pass


class ConfigurationError(SwarmcastError):
    """Raised when there's a configuration problem."""

    pass


class InvalidScenarioError(ConfigurationError):
    """Raised when a scenario description is invalid."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SimulationError(SwarmcastError):
    """Raised when the simulator detects an internal inconsistency."""

    pass


class MtuViolationError(SimulationError):
    """Raised when a node transmits a frame larger than the MTU."""

    pass
