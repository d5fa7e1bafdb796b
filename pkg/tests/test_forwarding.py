"""
Tests for forwarding decisions, deduplication and aggregation.
"""

import pytest

from swarmcast.config import ProtocolConfig
from swarmcast.core.codec import (
    HEADER_SIZE,
    NextHopEntry,
    OgmBody,
    SealedMessage,
    encode_frame,
)
from swarmcast.core.forwarding import (
    DedupCache,
    ForwardingMode,
    OutQueue,
    aggregate,
    should_forward,
)
from swarmcast.core.routing import Router
from swarmcast.exceptions import SizeExceededError


def message(origin=1, seq=1, ttl=8, ct_len=21) -> SealedMessage:
    return SealedMessage(origin, seq, 1000, ttl, bytes(ct_len), bytes(16))


def tree_router(node_id, root, parent, parent_depth, children) -> Router:
    """Router whose spanning tree has the given parent and children."""
    router = Router(node_id, root, ProtocolConfig(), spanning_tree_mode=True)
    router.heard(parent, None, 0)
    router.process_ogm(parent, OgmBody(root, 1, parent_depth), 0)
    for child in children:
        router.heard(child, [NextHopEntry(root, node_id, parent_depth + 2)], 0)
    router.refresh_spanning_tree(0)
    return router


class TestForwardingMode:
    """Test mode parsing."""

    @pytest.mark.parametrize(
        "text,mode",
        [
            ("per-source-trees", ForwardingMode.PER_SOURCE_TREES),
            ("spanning_tree", ForwardingMode.SPANNING_TREE),
            (" Naive-Flood ", ForwardingMode.NAIVE_FLOOD),
        ],
    )
    def test_parse(self, text, mode):
        """Test values and names parse in either spelling."""
        assert ForwardingMode.parse(text) == mode

    def test_parse_unknown(self):
        """Test unknown modes are rejected."""
        with pytest.raises(ValueError):
            ForwardingMode.parse("gossip")


class TestDedupCache:
    """Test the LRU of seen message ids."""

    def test_observe_counts_repeats(self):
        """Test N arrivals of one id count N-1 duplicates."""
        cache = DedupCache()

        results = [cache.observe((1, 1)) for _ in range(5)]

        assert results == [False, True, True, True, True]
        assert cache.duplicates == 4
        assert len(cache) == 1

    def test_capacity_evicts_least_recent(self):
        """Test the oldest untouched id is evicted first."""
        cache = DedupCache(capacity=2)
        cache.add((1, 1))
        cache.add((1, 2))
        cache.observe((1, 1))
        cache.add((1, 3))

        assert (1, 1) in cache
        assert (1, 2) not in cache
        assert (1, 3) in cache

    def test_forwarded_flag_is_sticky(self):
        """Test re-adding an id keeps its forwarded flag."""
        cache = DedupCache()
        cache.mark_forwarded((2, 9))
        cache.add((2, 9))

        assert cache.was_forwarded((2, 9))
        assert not cache.was_forwarded((2, 10))

    def test_on_duplicate_touches_nothing_else(self):
        """Test counting a duplicate does not change the forwarded flag."""
        cache = DedupCache()
        cache.add((3, 1))
        cache.on_duplicate((3, 1))

        assert cache.duplicates == 1
        assert not cache.was_forwarded((3, 1))


class TestOutQueue:
    """Test the pending message FIFO."""

    def test_fifo_and_drain(self):
        """Test messages drain in arrival order and the queue empties."""
        queue = OutQueue()
        for seq in (3, 1, 2):
            assert queue.enqueue(message(seq=seq), now_ms=seq * 10)

        assert queue.oldest_enqueued_ms() == 30
        assert [m.origin_seq for m in queue.drain()] == [3, 1, 2]
        assert len(queue) == 0
        assert queue.oldest_enqueued_ms() is None

    def test_refuses_expired_and_duplicates(self):
        """Test ttl 0 and already-queued ids are refused."""
        queue = OutQueue()

        assert not queue.enqueue(message(ttl=0), 0)
        assert queue.enqueue(message(seq=4), 0)
        assert not queue.enqueue(message(seq=4, ttl=5), 1)
        assert len(queue) == 1

    def test_requeue_after_drain(self):
        """Test an id may be queued again once drained."""
        queue = OutQueue()
        queue.enqueue(message(), 0)
        queue.drain()

        assert queue.enqueue(message(), 5)


class TestShouldForward:
    """Test the per-mode forwarding rule."""

    def test_flood_forwards_everything_once(self):
        """Test naive flooding forwards unless already forwarded."""
        router = Router(2, 1)
        dedup = DedupCache()
        msg = message(origin=5)

        assert should_forward(2, msg, 5, ForwardingMode.NAIVE_FLOOD, router, dedup, 0)
        dedup.mark_forwarded(msg.message_id)
        assert not should_forward(2, msg, 5, ForwardingMode.NAIVE_FLOOD, router, dedup, 0)

    def test_own_messages_never_forwarded(self):
        """Test an origin does not re-broadcast its own messages."""
        args = (ForwardingMode.NAIVE_FLOOD, Router(2, 1), DedupCache(), 0)

        assert not should_forward(2, message(origin=2), 3, *args)

    def test_last_hop_not_forwarded(self):
        """Test ttl 1 messages are delivered but not forwarded."""
        args = (ForwardingMode.NAIVE_FLOOD, Router(2, 1), DedupCache(), 0)

        assert not should_forward(2, message(origin=5, ttl=1), 5, *args)
        assert should_forward(2, message(origin=5, ttl=2), 5, *args)

    def test_per_source_line(self):
        """Test B forwards A's message toward C; C, a leaf, does not."""
        b = Router(2, 1)
        b.heard(1, [], 0)
        b.heard(3, [NextHopEntry(1, 2, 2)], 0)
        c = Router(3, 1)
        c.heard(2, [NextHopEntry(1, 1, 1), NextHopEntry(3, 3, 1)], 0)
        msg = message(origin=1)

        mode = ForwardingMode.PER_SOURCE_TREES
        assert should_forward(2, msg, 1, mode, b, DedupCache(), 10)
        assert not should_forward(3, msg, 2, mode, c, DedupCache(), 10)

    def test_per_source_ignores_sender_as_child(self):
        """Test the neighbor a copy came from does not count as a child."""
        b = Router(2, 1)
        b.heard(3, [NextHopEntry(1, 2, 2)], 0)

        mode = ForwardingMode.PER_SOURCE_TREES
        assert not should_forward(2, message(origin=1), 3, mode, b, DedupCache(), 10)

    def test_spanning_tree_rule(self):
        """Test interior nodes forward copies from parent or children only."""
        router = tree_router(5, root=1, parent=3, parent_depth=1, children=[7])
        mode = ForwardingMode.SPANNING_TREE
        msg = message(origin=9)

        assert router.spanning_tree.parent == 3
        assert should_forward(5, msg, 3, mode, router, DedupCache(), 0)
        assert should_forward(5, msg, 7, mode, router, DedupCache(), 0)
        assert not should_forward(5, msg, 8, mode, router, DedupCache(), 0)

    def test_spanning_tree_leaf_and_orphan(self):
        """Test leaves and orphaned nodes do not forward."""
        leaf = tree_router(5, root=1, parent=3, parent_depth=1, children=[])
        orphan = Router(6, 1, spanning_tree_mode=True)
        mode = ForwardingMode.SPANNING_TREE

        assert not should_forward(5, message(origin=9), 3, mode, leaf, DedupCache(), 0)
        assert not should_forward(6, message(origin=9), 3, mode, orphan, DedupCache(), 0)


class TestAggregate:
    """Test MTU-bounded packing."""

    def test_empty_queue(self):
        """Test no frames are produced for an empty queue."""
        assert aggregate([], [NextHopEntry(2, 2, 1)]) == []

    def test_small_queue_one_frame(self):
        """Test three short messages share one frame in order."""
        queue = [message(seq=s) for s in (1, 2, 3)]

        frames = aggregate(queue, [], sender=4, first_seq=10)

        assert len(frames) == 1
        assert frames[0].messages == tuple(queue)
        assert frames[0].sender == 4
        assert frames[0].frame_seq == 10

    def test_large_ciphertexts_split(self):
        """Test 40 messages with 200-byte ciphertexts pack five per frame."""
        queue = [message(seq=s, ct_len=200) for s in range(40)]

        frames = aggregate(queue, [], mtu=1400)

        assert [len(f.messages) for f in frames] == [5] * 8
        assert [f.frame_seq for f in frames] == list(range(8))
        assert [m for f in frames for m in f.messages] == queue

    def test_next_hop_table_on_first_frame_only(self):
        """Test the table rides on the first frame of a batch."""
        nht = [NextHopEntry(d, 2, 1) for d in range(2, 12)]
        queue = [message(seq=s, ct_len=200) for s in range(12)]

        frames = aggregate(queue, nht, mtu=1400)

        assert frames[0].next_hop_table == tuple(nht)
        assert all(f.next_hop_table == () for f in frames[1:])

    @pytest.mark.parametrize("mtu", [200, 300, 1400])
    def test_every_frame_fits(self, mtu):
        """Test every encoded frame stays within the MTU."""
        queue = [message(seq=s, ct_len=21 + s % 40) for s in range(60)]

        frames = aggregate(queue, [NextHopEntry(2, 2, 1)], mtu=mtu)

        assert all(HEADER_SIZE < len(encode_frame(f)) <= mtu for f in frames)
        assert sum(len(f.messages) for f in frames) == 60

    def test_full_table_cut_to_fit_first_message(self):
        """Test a 64-entry table is cut so the first frame stays within the MTU."""
        nht = [NextHopEntry(d, 2, 1) for d in range(2, 66)]
        queue = [message(seq=s, ct_len=200) for s in (1, 2)]

        frames = aggregate(queue, nht, mtu=400)

        # 400 - 10 header - 232 sealed leaves room for 31 entries
        assert frames[0].next_hop_table == tuple(nht[:31])
        assert [len(encode_frame(f, mtu=400)) for f in frames] == [397, 242]
        assert [m for f in frames for m in f.messages] == queue

    def test_message_larger_than_mtu(self):
        """Test a message that cannot fit even alone is refused."""
        with pytest.raises(SizeExceededError, match="does not fit in a 200-byte frame"):
            aggregate([message(ct_len=255)], [], mtu=200)
