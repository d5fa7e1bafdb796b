# swarmcast/simulation/adversary.py

"""
Outside adversaries: eavesdropper, bit-flipping tamperer, replayer and jammer.

None of them holds the session key. Tamper and replay act on overheard DATA
frames only; jamming is modelled by the radio as extra loss.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..core.codec import (
    HEADER_SIZE,
    NHT_ENTRY_SIZE,
    SEALED_OVERHEAD,
    FrameType,
)
from .scenario import AdversaryKind, AdversaryModel

logger = logging.getLogger(__name__)

# origin(2) seq(4) timestamp(8) come before the unauthenticated ttl and length bytes.
_SEALED_AUTH_HEAD = 14
_SEALED_UNAUTH = 2


@dataclass(frozen=True)
class Injection:
    """A frame the adversary broadcasts at ``send_ms``."""

    raw: bytes
    send_ms: int
    source_sender: int
    bit: Optional[int] = None


@dataclass(frozen=True)
class TranscriptEntry:
    time_ms: int
    sender: int
    raw: bytes


def _is_data_frame(raw: bytes) -> bool:
    return len(raw) > HEADER_SIZE and raw[1] == FrameType.DATA


def authenticated_bit_ranges(raw: bytes) -> List[Tuple[int, int]]:
    """
    Byte ranges covered by sealed-message tags in a DATA frame.

    Returns an empty list when the frame's length fields don't add up.
    """
    ranges: List[Tuple[int, int]] = []
    if not _is_data_frame(raw):
        return ranges
    offset = HEADER_SIZE + raw[8] * NHT_ENTRY_SIZE
    for _ in range(raw[9]):
        if offset + SEALED_OVERHEAD > len(raw):
            return []
        ct_len = raw[offset + _SEALED_AUTH_HEAD + 1]
        end = offset + SEALED_OVERHEAD + ct_len
        if end > len(raw):
            return []
        ranges.append((offset, offset + _SEALED_AUTH_HEAD))
        ranges.append((offset + _SEALED_AUTH_HEAD + _SEALED_UNAUTH, end))
        offset = end
    return ranges


def _frame_type_name(raw: bytes) -> str:
    try:
        return FrameType(raw[1]).name
    except (IndexError, ValueError):
        return "UNKNOWN"


def flip_bit(raw: bytes, bit: int) -> bytes:
    data = bytearray(raw)
    data[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(data)


def apply_adversary(
    model: AdversaryModel, raw: bytes, now_ms: int, rng: np.random.Generator, sender: int = 0
) -> List[Injection]:
    """
    Frames the adversary injects after overhearing ``raw`` at ``now_ms``.

    Tamper flips one random bit (inside authenticated fields unless the
    scope is ``frame``) and re-broadcasts immediately; Replay re-broadcasts
    the frame verbatim ``delay_ms`` later; Eavesdrop and Jam inject nothing.
    """
    if model.kind in (AdversaryKind.EAVESDROP, AdversaryKind.JAM) or not _is_data_frame(raw):
        return []

    if model.kind == AdversaryKind.REPLAY:
        return [Injection(raw, now_ms + model.delay_ms, sender)]

    bit = 0
    if model.scope == "frame":
        bit = int(rng.integers(0, len(raw) * 8))
    else:
        ranges = authenticated_bit_ranges(raw)
        if not ranges:
            return []
        sizes = np.array([end - start for start, end in ranges])
        pick = int(rng.integers(0, int(sizes.sum()) * 8))
        for (start, end), size in zip(ranges, sizes):
            if pick < size * 8:
                bit = start * 8 + pick
                break
            pick -= int(size) * 8
    return [Injection(flip_bit(raw, bit), now_ms + model.delay_ms, sender, bit)]


@dataclass
class Adversary:
    """Stateful adversary driven by the simulator."""

    model: AdversaryModel
    rng: np.random.Generator
    transcript: List[TranscriptEntry] = field(default_factory=list)
    injected: int = 0

    def overhear(self, raw: bytes, sender: int, now_ms: int) -> List[Injection]:
        self.transcript.append(TranscriptEntry(now_ms, sender, raw))
        cap = self.model.max_injections
        if cap is not None and self.injected >= cap:
            return []
        injections = apply_adversary(self.model, raw, now_ms, self.rng, sender)
        if cap is not None:
            injections = injections[: cap - self.injected]
        self.injected += len(injections)
        for injection in injections:
            logger.debug(
                f"Adversary {self.model.kind.value} injects copy of frame from {sender} "
                f"at {injection.send_ms} ms"
            )
        return injections

    def traffic_analysis(self) -> Dict[str, object]:
        """Per-sender volume and frame-type mix visible without the key."""
        frames: Counter = Counter()
        octets: Counter = Counter()
        types: Counter = Counter()
        for entry in self.transcript:
            frames[entry.sender] += 1
            octets[entry.sender] += len(entry.raw)
            types[_frame_type_name(entry.raw)] += 1
        return {
            "frames_per_sender": {str(k): v for k, v in sorted(frames.items())},
            "bytes_per_sender": {str(k): v for k, v in sorted(octets.items())},
            "frame_types": dict(sorted(types.items())),
        }


def transcript_contains(transcript: List[TranscriptEntry], needle: bytes) -> bool:
    return any(needle in entry.raw for entry in transcript)
