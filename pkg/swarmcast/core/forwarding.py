# swarmcast/core/forwarding.py

"""
Forwarding decisions, deduplication and frame aggregation.

Three modes share the same pipeline: per-source broadcast trees inverted from
neighbors' next-hop tables, a single spanning tree rooted at the ground
station, and naive flooding as the baseline.
"""

import logging
from collections import OrderedDict, deque
from dataclasses import dataclass
from enum import Enum
from typing import Deque, Iterator, List, Optional, Sequence, Set, Tuple

from .codec import (
    HEADER_SIZE,
    MTU_BYTES,
    NHT_ENTRY_SIZE,
    Frame,
    FrameType,
    NextHopEntry,
    SealedMessage,
    sealed_size,
)
from ..exceptions import SizeExceededError
from .routing import Router

logger = logging.getLogger(__name__)

MessageId = Tuple[int, int]


class ForwardingMode(Enum):
    PER_SOURCE_TREES = "per-source-trees"
    SPANNING_TREE = "spanning-tree"
    NAIVE_FLOOD = "naive-flood"

    @classmethod
    def parse(cls, value: str) -> "ForwardingMode":
        normalized = value.strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == normalized or mode.name.lower().replace("_", "-") == normalized:
                return mode
        raise ValueError(f"unknown forwarding mode: {value}")


class DedupCache:
    """
    LRU set of seen message ids, each with a forwarded flag.

    A message id is forwarded at most once per node while it stays in the
    cache.
    """

    def __init__(self, capacity: int = 4096):
        self.capacity = capacity
        self._entries: "OrderedDict[MessageId, bool]" = OrderedDict()
        self.duplicates = 0

    def __contains__(self, msg_id: MessageId) -> bool:
        return msg_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, msg_id: MessageId, forwarded: bool = False) -> None:
        if msg_id in self._entries:
            self._entries.move_to_end(msg_id)
            self._entries[msg_id] = self._entries[msg_id] or forwarded
            return
        self._entries[msg_id] = forwarded
        if len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def observe(self, msg_id: MessageId) -> bool:
        """Record an arrival; returns True (and counts it) if already seen."""
        if msg_id in self._entries:
            self.on_duplicate(msg_id)
            return True
        self.add(msg_id)
        return False

    def on_duplicate(self, msg_id: MessageId) -> None:
        """Count a duplicate arrival; no other state changes besides recency."""
        self.duplicates += 1
        if msg_id in self._entries:
            self._entries.move_to_end(msg_id)

    def was_forwarded(self, msg_id: MessageId) -> bool:
        return self._entries.get(msg_id, False)

    def mark_forwarded(self, msg_id: MessageId) -> None:
        self.add(msg_id, forwarded=True)


@dataclass
class QueuedMessage:
    message: SealedMessage
    enqueued_ms: int


class OutQueue:
    """FIFO of sealed messages waiting to be aggregated into frames."""

    def __init__(self):
        self._pending: Deque[QueuedMessage] = deque()
        self._ids: Set[MessageId] = set()

    def __len__(self) -> int:
        return len(self._pending)

    def __iter__(self) -> Iterator[SealedMessage]:
        return (q.message for q in self._pending)

    def enqueue(self, message: SealedMessage, now_ms: int) -> bool:
        """Queue a message; ttl=0 and already-queued ids are refused."""
        if message.ttl == 0 or message.message_id in self._ids:
            return False
        self._pending.append(QueuedMessage(message, now_ms))
        self._ids.add(message.message_id)
        return True

    def oldest_enqueued_ms(self) -> Optional[int]:
        return self._pending[0].enqueued_ms if self._pending else None

    def drain(self) -> List[SealedMessage]:
        messages = [q.message for q in self._pending]
        self._pending.clear()
        self._ids.clear()
        return messages


def should_forward(
    self_id: int,
    msg: SealedMessage,
    received_from: int,
    mode: ForwardingMode,
    router: Router,
    dedup: DedupCache,
    now_ms: int,
) -> bool:
    """
    Decide whether this node re-broadcasts an authenticated message.

    A forwarded copy carries ttl - 1, so a copy is only worth forwarding
    while that decremented ttl is at least 1.
    """
    if msg.origin == self_id or dedup.was_forwarded(msg.message_id) or msg.ttl <= 1:
        return False

    if mode == ForwardingMode.NAIVE_FLOOD:
        return True

    if mode == ForwardingMode.PER_SOURCE_TREES:
        children = router.children_for_origin(msg.origin, now_ms)
        return bool(children - {received_from})

    # A root with one child still relays that child's messages, so a line
    # pays one extra copy per message that did not start at the root.
    tree = router.spanning_tree
    if tree is None or tree.is_leaf:
        return False
    return received_from == tree.parent or received_from in tree.children


def _frames_from(
    sender: int, batches: List[List[SealedMessage]], nht: Sequence[NextHopEntry], first_seq: int
) -> List[Frame]:
    return [
        Frame(
            frame_type=FrameType.DATA,
            sender=sender,
            frame_seq=(first_seq + i) & 0xFFFFFFFF,
            next_hop_table=tuple(nht) if i == 0 else (),
            messages=tuple(batch),
        )
        for i, batch in enumerate(batches)
    ]


def aggregate(
    messages: Sequence[SealedMessage],
    nht: Sequence[NextHopEntry],
    mtu: int = MTU_BYTES,
    sender: int = 1,
    first_seq: int = 0,
) -> List[Frame]:
    """
    Greedy FIFO packing of sealed messages into MTU-bounded DATA frames.

    Each frame is filled until the next message would exceed ``mtu``;
    message order is preserved and the next-hop table rides on the first
    frame of the batch, cut short if the first message would not fit beside
    it. An empty queue yields no frames.

    Raises:
        SizeExceededError: If a message cannot fit in a frame on its own
    """
    batches: List[List[SealedMessage]] = []
    current: List[SealedMessage] = []
    nht = tuple(nht)
    size = HEADER_SIZE + NHT_ENTRY_SIZE * len(nht)

    for message in messages:
        needed = sealed_size(message)
        if HEADER_SIZE + needed > mtu:
            raise SizeExceededError(
                f"sealed message of {needed} bytes does not fit in a {mtu}-byte frame"
            )
        if not batches and not current and size + needed > mtu:
            keep = (mtu - HEADER_SIZE - needed) // NHT_ENTRY_SIZE
            logger.debug(f"Next-hop table cut from {len(nht)} to {keep} entries")
            nht = nht[:keep]
            size = HEADER_SIZE + NHT_ENTRY_SIZE * keep
        if current and (size + needed > mtu or len(current) == 255):
            batches.append(current)
            current, size = [], HEADER_SIZE
        current.append(message)
        size += needed

    if current:
        batches.append(current)

    return _frames_from(sender, batches, nht, first_seq)
