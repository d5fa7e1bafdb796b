"""
Tests for the outside adversary models.
"""

import numpy as np
import pytest

from swarmcast.core.codec import (
    Frame,
    FrameType,
    NextHopEntry,
    OgmBody,
    decode_frame,
    encode_frame,
)
from swarmcast.core.crypto import open_message, seal_message
from swarmcast.exceptions import BadTagError
from swarmcast.simulation.adversary import (
    Adversary,
    apply_adversary,
    authenticated_bit_ranges,
    flip_bit,
    transcript_contains,
)
from swarmcast.simulation.scenario import AdversaryKind, AdversaryModel


def model(kind, **kwargs) -> AdversaryModel:
    return AdversaryModel(kind, 0.0, 0.0, 100.0, **kwargs)


@pytest.fixture
def data_frame(session_key):
    """A DATA frame from node 2 with one next-hop entry and two sealed messages."""
    messages = (
        seal_message(session_key, 3, 7, 1000, 8, bytes(21)),
        seal_message(session_key, 5, 9, 1000, 6, bytes(30)),
    )
    frame = Frame(
        FrameType.DATA, 2, 40, next_hop_table=(NextHopEntry(1, 1, 1),), messages=messages
    )
    return encode_frame(frame)


@pytest.fixture
def ogm_frame():
    return encode_frame(Frame(FrameType.OGM, 2, 41, ogm=OgmBody(2, 1, 0)))


class TestBitHelpers:
    """Test bit addressing and authenticated ranges."""

    @pytest.mark.parametrize(
        "raw,bit,expected",
        [(b"\x00", 0, b"\x80"), (b"\x00", 7, b"\x01"), (b"\x00\x00", 9, b"\x00\x40")],
    )
    def test_flip_bit_msb_first(self, raw, bit, expected):
        """Test bit 0 is the most significant bit of byte 0."""
        assert flip_bit(raw, bit) == expected

    def test_ranges_cover_sealed_fields(self, data_frame):
        """Test ranges skip the header, table, ttl and length bytes."""
        first = 10 + 5
        second = first + 32 + 21

        assert authenticated_bit_ranges(data_frame) == [
            (first, first + 14),
            (first + 16, second),
            (second, second + 14),
            (second + 16, len(data_frame)),
        ]

    def test_no_ranges_outside_data(self, ogm_frame, data_frame):
        """Test non-DATA and inconsistent frames have no authenticated ranges."""
        assert authenticated_bit_ranges(ogm_frame) == []
        assert authenticated_bit_ranges(data_frame[:-5]) == []
        assert authenticated_bit_ranges(b"") == []


class TestApplyAdversary:
    """Test one adversary reaction to an overheard frame."""

    @pytest.mark.parametrize("kind", [AdversaryKind.EAVESDROP, AdversaryKind.JAM])
    def test_passive_kinds_inject_nothing(self, kind, data_frame, rng):
        """Test eavesdroppers and jammers never transmit frames."""
        assert apply_adversary(model(kind), data_frame, 0, rng) == []

    def test_only_data_frames_attacked(self, ogm_frame, rng):
        """Test routing frames are left alone."""
        assert apply_adversary(model(AdversaryKind.TAMPER), ogm_frame, 0, rng) == []
        assert apply_adversary(model(AdversaryKind.REPLAY), ogm_frame, 0, rng) == []

    def test_replay_is_verbatim_and_delayed(self, data_frame, rng):
        """Test a replay re-sends the same bytes after the delay."""
        (injection,) = apply_adversary(
            model(AdversaryKind.REPLAY, delay_ms=500), data_frame, 1200, rng, sender=2
        )

        assert injection.raw == data_frame
        assert injection.send_ms == 1700
        assert injection.source_sender == 2
        assert injection.bit is None

    def test_tamper_flips_one_authenticated_bit(self, data_frame, rng):
        """Test the flipped bit always lands inside a tagged range."""
        ranges = authenticated_bit_ranges(data_frame)
        for _ in range(200):
            (injection,) = apply_adversary(model(AdversaryKind.TAMPER), data_frame, 0, rng)

            assert any(start * 8 <= injection.bit < end * 8 for start, end in ranges)
            assert flip_bit(injection.raw, injection.bit) == data_frame

    def test_tampered_messages_never_open(self, data_frame, rng, session_key, replay_state):
        """Test every authenticated bit flip is caught by the tag check."""
        original = decode_frame(data_frame).messages
        for _ in range(200):
            (injection,) = apply_adversary(model(AdversaryKind.TAMPER), data_frame, 0, rng)
            frame = decode_frame(injection.raw)

            changed = [m for m, o in zip(frame.messages, original) if m != o]
            assert len(changed) == 1
            with pytest.raises(BadTagError):
                open_message(session_key, changed[0], replay_state, 1000)

    def test_frame_scope_reaches_any_bit(self, data_frame):
        """Test frame scope can hit the header as well."""
        rng = np.random.default_rng(3)
        bits = {
            apply_adversary(model(AdversaryKind.TAMPER, scope="frame"), data_frame, 0, rng)[0].bit
            for _ in range(400)
        }

        assert min(bits) < 10 * 8
        assert max(bits) < len(data_frame) * 8


class TestAdversary:
    """Test the stateful adversary."""

    def test_injection_cap(self, data_frame, rng):
        """Test injections stop at max_injections while overhearing continues."""
        adversary = Adversary(model(AdversaryKind.REPLAY, max_injections=3), rng)

        counts = [len(adversary.overhear(data_frame, 2, t)) for t in range(5)]

        assert counts == [1, 1, 1, 0, 0]
        assert adversary.injected == 3
        assert len(adversary.transcript) == 5

    def test_traffic_analysis(self, data_frame, ogm_frame, rng):
        """Test volume and type mix are visible without the key."""
        adversary = Adversary(model(AdversaryKind.EAVESDROP), rng)
        adversary.overhear(data_frame, 2, 0)
        adversary.overhear(ogm_frame, 2, 1)
        adversary.overhear(ogm_frame, 4, 2)

        report = adversary.traffic_analysis()

        assert report["frames_per_sender"] == {"2": 2, "4": 1}
        assert report["bytes_per_sender"]["2"] == len(data_frame) + len(ogm_frame)
        assert report["frame_types"] == {"DATA": 1, "OGM": 2}

    def test_transcript_search(self, data_frame, rng):
        """Test transcripts can be searched for raw byte strings."""
        adversary = Adversary(model(AdversaryKind.EAVESDROP), rng)
        adversary.overhear(data_frame, 2, 0)
        ciphertext = decode_frame(data_frame).messages[0].ciphertext

        assert transcript_contains(adversary.transcript, ciphertext)
        assert not transcript_contains(adversary.transcript, b"\xde\xad\xbe\xef" * 4)
