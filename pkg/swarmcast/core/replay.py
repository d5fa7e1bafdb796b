"""
Freshness and replay enforcement for sealed messages.

One sliding bitmask window per origin: bit i of the mask marks
``highest_seq - i`` as consumed. Sequence numbers that fall below the window
can no longer be proven unique and are rejected as replays.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

from ..exceptions import ReplayedError, StaleError

logger = logging.getLogger(__name__)


@dataclass
class ReplayWindow:
    """Per-origin sliding window."""

    highest_seq: Optional[int] = None
    window: int = 0

    def seen(self, seq: int, width: int) -> bool:
        if self.highest_seq is None:
            return False
        if seq > self.highest_seq:
            return False
        offset = self.highest_seq - seq
        if offset >= width:
            return True
        return bool(self.window >> offset & 1)

    def mark(self, seq: int, width: int) -> None:
        mask = (1 << width) - 1
        if self.highest_seq is None:
            self.highest_seq = seq
            self.window = 1
        elif seq > self.highest_seq:
            shift = seq - self.highest_seq
            self.window = ((self.window << shift) | 1) & mask if shift < width else 1
            self.highest_seq = seq
        else:
            self.window |= 1 << (self.highest_seq - seq)


@dataclass
class ReplayState:
    """Replay windows for every origin plus the freshness bound."""

    freshness_window_ms: int = 2000
    window_bits: int = 64
    windows: Dict[int, ReplayWindow] = field(default_factory=dict)

    def check(self, origin: int, origin_seq: int, timestamp_ms: int, now_ms: int) -> None:
        """
        Raise if the message may not be accepted; never mutates state.

        Raises:
            StaleError: If |now - timestamp| exceeds the freshness window
            ReplayedError: If the sequence number was already consumed
        """
        age = now_ms - timestamp_ms
        if abs(age) > self.freshness_window_ms:
            raise StaleError(
                f"message {origin}:{origin_seq} is {age} ms old "
                f"(window {self.freshness_window_ms} ms)"
            )
        window = self.windows.get(origin)
        if window is not None and window.seen(origin_seq, self.window_bits):
            raise ReplayedError(f"message {origin}:{origin_seq} already consumed")

    def accept(self, origin: int, origin_seq: int) -> None:
        """Mark (origin, origin_seq) as consumed."""
        self.windows.setdefault(origin, ReplayWindow()).mark(origin_seq, self.window_bits)

    def is_consumed(self, origin: int, origin_seq: int) -> bool:
        window = self.windows.get(origin)
        return window is not None and window.seen(origin_seq, self.window_bits)

    def snapshot(self) -> Dict[int, Dict[str, int]]:
        return {
            origin: {"highest_seq": w.highest_seq, "window": w.window}
            for origin, w in sorted(self.windows.items())
        }
