"""
Tests for custom exception classes.
"""

import pytest

from swarmcast.exceptions import (
    BadFrameTypeError,
    BadTagError,
    BadVersionError,
    CodecError,
    ConfigurationError,
    CountMismatchError,
    CryptoError,
    InvalidScenarioError,
    InvariantViolationError,
    LowOrderPointError,
    MtuViolationError,
    OrphanedError,
    PlaintextTooLongError,
    RangeError,
    ReplayedError,
    RoutingError,
    RoutingLoopError,
    SimulationError,
    SizeExceededError,
    StaleError,
    SwarmcastError,
    TruncatedError,
    UnknownMemberError,
)


class TestBaseException:
    """Tests for base SwarmcastError exception."""

    def test_base_exception_creation(self):
        """Test creating base exception with message."""
        error = SwarmcastError("Test error message")

        assert str(error) == "Test error message"
        assert isinstance(error, Exception)

    def test_base_exception_raising(self):
        """Test raising base exception."""
        with pytest.raises(SwarmcastError, match="Test error"):
            raise SwarmcastError("Test error")


class TestCodecError:
    """Tests for CodecError and its offset."""

    def test_offset_in_message(self):
        """Test the byte offset is appended to the message."""
        error = TruncatedError("next-hop entry truncated", offset=12)

        assert str(error) == "next-hop entry truncated (offset 12)"
        assert error.offset == 12

    def test_no_offset(self):
        """Test the message is unchanged without an offset."""
        error = CodecError("bad frame")

        assert str(error) == "bad frame"
        assert error.offset is None

    @pytest.mark.parametrize(
        "exc_class",
        [
            TruncatedError,
            BadVersionError,
            BadFrameTypeError,
            CountMismatchError,
            SizeExceededError,
            InvariantViolationError,
            RangeError,
        ],
    )
    def test_codec_subclasses(self, exc_class):
        """Test every decoding failure can be caught as CodecError."""
        with pytest.raises(CodecError):
            raise exc_class("Test")


class TestCryptoError:
    """Tests for security rejections."""

    @pytest.mark.parametrize(
        "exc_class",
        [
            BadTagError,
            StaleError,
            ReplayedError,
            LowOrderPointError,
            PlaintextTooLongError,
            UnknownMemberError,
        ],
    )
    def test_crypto_subclasses(self, exc_class):
        """Test security failures are CryptoErrors and not CodecErrors."""
        error = exc_class("Test")

        assert isinstance(error, CryptoError)
        assert isinstance(error, SwarmcastError)
        assert not isinstance(error, CodecError)


class TestRoutingError:
    """Tests for routing failures."""

    def test_routing_subclasses(self):
        """Test OrphanedError and RoutingLoopError inherit from RoutingError."""
        assert issubclass(OrphanedError, RoutingError)
        assert issubclass(RoutingLoopError, RoutingError)

    def test_routing_loop_raising(self):
        """Test raising RoutingLoopError."""
        with pytest.raises(RoutingError, match="revisits 3"):
            raise RoutingLoopError("loop toward 5 starting at 1 revisits 3")


class TestInvalidScenarioError:
    """Tests for InvalidScenarioError."""

    def test_field_is_kept(self):
        """Test the offending field is exposed and prefixed to the message."""
        error = InvalidScenarioError("radio_range_m", "must be positive")

        assert error.field == "radio_range_m"
        assert str(error) == "radio_range_m: must be positive"

    def test_is_configuration_error(self):
        """Test scenario problems can be caught as ConfigurationError."""
        with pytest.raises(ConfigurationError):
            raise InvalidScenarioError("nodes", "must not be empty")


class TestExceptionHierarchy:
    """Tests for exception hierarchy and relationships."""

    def test_all_exceptions_inherit_from_base(self):
        """Test all custom exceptions inherit from SwarmcastError."""
        exceptions = [
            CodecError,
            CryptoError,
            RoutingError,
            ConfigurationError,
            InvalidScenarioError,
            SimulationError,
            MtuViolationError,
        ]

        for exc_class in exceptions:
            assert issubclass(exc_class, SwarmcastError)
            assert issubclass(exc_class, Exception)

    def test_mtu_violation_is_simulation_error(self):
        """Test MtuViolationError inherits from SimulationError."""
        try:
            raise MtuViolationError("frame of 1500 bytes")
        except SimulationError as e:
            assert str(e) == "frame of 1500 bytes"
