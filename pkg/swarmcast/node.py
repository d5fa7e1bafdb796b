# swarmcast/node.py

"""
Per-node protocol engine.

Composes key exchange, message security, routing and forwarding behind a
pure event interface: events in, frames and deliveries out. The engine reads
no clock and owns no sockets; every bit of entropy comes from the node's
configured seed, so replaying an event trace reproduces its output.
"""

import logging
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np

from .config import DEFAULT_PROTOCOL_CONFIG, ProtocolConfig
from .core.codec import (
    HEADER_SIZE,
    NHT_ENTRY_SIZE,
    PAYLOAD_SIZE,
    PUBKEY_BODY_SIZE,
    SEALED_OVERHEAD,
    Frame,
    FrameType,
    KeyxBody,
    PubkeyBody,
    SealedMessage,
    TelemetryPayload,
    WrappedKeyBody,
    decode_frame,
    decode_payload,
    encode_frame,
    encode_payload,
)
from .core.crypto import generate_keypair, open_message, seal_message
from .core.forwarding import (
    DedupCache,
    ForwardingMode,
    OutQueue,
    aggregate,
    should_forward,
)
from .core.keyexchange import GroupKeyExchange, KeyxFrameIn, KeyxTick, Phase, Start
from .core.replay import ReplayState
from .core.routing import Router
from .exceptions import (
    BadTagError,
    CodecError,
    CryptoError,
    ReplayedError,
    StaleError,
    UnknownMemberError,
)

logger = logging.getLogger(__name__)

REJECT_REASONS = ("bad_tag", "stale", "replayed", "no_key", "payload")

COUNTER_NAMES = (
    "frames_received",
    "frames_malformed",
    "frames_unknown_sender",
    "frames_sent",
    "data_frames",
    "ogm_frames",
    "keyx_frames",
    "data_frames_sent",
    "routing_frames",
    "ogm_accepted",
    "ogm_infeasible",
    "ogm_own",
    "keyx_unknown_member",
    "keyx_rejected",
    "messages_received",
    "messages_originated",
    "messages_forwarded",
    "messages_sent",
    "delivered",
    "non_tree_receptions",
    "samples_unkeyed",
) + tuple(f"rejected_{reason}" for reason in REJECT_REASONS)


@dataclass
class NodeConfig:
    """Identity, roster and protocol settings of one node."""

    id: int
    roster: FrozenSet[int]
    mode: ForwardingMode = ForwardingMode.PER_SOURCE_TREES
    rng_seed: int = 0
    protocol: ProtocolConfig = field(default_factory=lambda: DEFAULT_PROTOCOL_CONFIG)

    def __post_init__(self):
        self.roster = frozenset(self.roster)
        if self.id not in self.roster:
            raise ValueError(f"node {self.id} is not in its roster")
        if not 0 < self.id <= 0xFFFF:
            raise ValueError("node ids are non-zero 16-bit integers")
        self.protocol.validate()


@dataclass(frozen=True)
class Tick:
    now_ms: int


@dataclass(frozen=True)
class FrameIn:
    raw: bytes
    now_ms: int


@dataclass(frozen=True)
class TelemetrySample:
    payload: TelemetryPayload
    now_ms: int


Event = Union[Tick, FrameIn, TelemetrySample]


@dataclass(frozen=True)
class Delivery:
    """A telemetry message handed to the application."""

    node: int
    origin: int
    origin_seq: int
    payload: TelemetryPayload
    timestamp_ms: int
    received_ms: int
    hops: int
    via: int

    @property
    def latency_ms(self) -> int:
        return self.received_ms - self.timestamp_ms


@dataclass(frozen=True)
class Origination:
    """Ground truth for a message this node sealed."""

    origin: int
    origin_seq: int
    timestamp_ms: int
    plaintext: bytes


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    detail: str


@dataclass
class Output:
    frames: List[bytes] = field(default_factory=list)
    deliveries: List[Delivery] = field(default_factory=list)
    originated: List[Origination] = field(default_factory=list)
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def extend(self, other: "Output") -> None:
        self.frames.extend(other.frames)
        self.deliveries.extend(other.deliveries)
        self.originated.extend(other.originated)
        self.diagnostics.extend(other.diagnostics)


class SwarmNode:
    """
    Protocol state machine of one swarm member.

    Feed it events with non-decreasing ``now_ms``; each call returns the
    frames to broadcast, the telemetry delivered to the application and
    diagnostic records.
    """

    def __init__(self, config: NodeConfig):
        self.config = config
        self.node_id = config.id
        self.protocol = config.protocol
        self.root = min(config.roster)

        self.rng = np.random.default_rng(config.rng_seed)
        self.keypair = generate_keypair(self.rng.bytes(32))
        self.keyx = GroupKeyExchange(
            self.node_id, config.roster, self.keypair, self.rng, self.protocol.keyx_retry_ms
        )
        self.router = Router(
            self.node_id,
            self.root,
            self.protocol,
            spanning_tree_mode=config.mode == ForwardingMode.SPANNING_TREE,
        )
        self.dedup = DedupCache(self.protocol.dedup_capacity)
        self.queue = OutQueue()
        self.replay = ReplayState(
            self.protocol.freshness_window_ms, self.protocol.replay_window_bits
        )
        self.counters: Counter = Counter()

        self._started = False
        self._now_ms = 0
        self._frame_seq = 0
        self._origin_seq = 0
        self._next_ogm_ms = 0
        self._next_telemetry_ms = 0
        self._last_nht_ms: Optional[int] = None
        self._pending_sample: Optional[TelemetryPayload] = None
        self._heard_frames: "OrderedDict[Tuple[int, int], None]" = OrderedDict()
        self._keyx_relayed: Dict[KeyxBody, int] = {}

    # -- Public API -----------------------------------------------------------

    @property
    def established(self) -> bool:
        return self.keyx.state.phase == Phase.ESTABLISHED

    def handle_event(self, event: Event) -> Output:
        """
        Process one event.

        Malformed or rejected input increments counters and never raises.
        """
        self._now_ms = event.now_ms
        self.router.expire(event.now_ms)
        if isinstance(event, Tick):
            return self._on_tick(event.now_ms)
        if isinstance(event, FrameIn):
            return self._on_frame(event.raw, event.now_ms)
        if isinstance(event, TelemetrySample):
            self._pending_sample = event.payload
            return Output()
        raise TypeError(f"unsupported event {type(event).__name__}")

    def next_wakeup_ms(self, now_ms: int) -> int:
        """Earliest time at which a Tick would do anything."""
        if not self._started:
            return now_ms
        candidates = [self._next_ogm_ms]
        deadline = self.keyx.state.deadline_ms
        if deadline is not None:
            candidates.append(deadline)
        if self._pending_sample is not None:
            candidates.append(max(now_ms, self._next_telemetry_ms))
        oldest = self.queue.oldest_enqueued_ms()
        if oldest is not None:
            candidates.append(oldest + self.protocol.aggregation_delay_ms)
        return min(candidates)

    def snapshot(self) -> Dict[str, Any]:
        """Read-only diagnostic view with a stable schema."""
        routing = self.router.snapshot()
        tree_children = {
            origin: sorted(self.router.children_for_origin(origin, self._now_ms))
            for origin in sorted(self.config.roster - {self.node_id})
        }
        counters = {name: 0 for name in COUNTER_NAMES}
        counters.update(self.counters)
        counters = dict(sorted(counters.items()))
        counters["duplicates"] = self.dedup.duplicates
        counters["keyx_timeouts"] = self.keyx.state.timeouts
        counters["received"] = self.counters["messages_received"] + self.counters["routing_frames"]
        return {
            "node": self.node_id,
            "mode": self.config.mode.value,
            "key_exchange": {
                "role": self.keyx.state.role.value,
                "phase": self.keyx.state.phase.value,
                "established_at_ms": self.keyx.state.established_at_ms,
            },
            "routes": routing["routes"],
            "neighbors": routing["neighbors"],
            "spanning_tree": routing["spanning_tree"],
            "tree_children": tree_children,
            "replay_windows": self.replay.snapshot(),
            "queue_length": len(self.queue),
            "counters": counters,
        }

    # -- Tick -----------------------------------------------------------------

    def _on_tick(self, now_ms: int) -> Output:
        out = Output()

        if not self._started:
            self._started = True
            self._next_ogm_ms = now_ms
            _, bodies = self.keyx.run_group_exchange(Start(now_ms))
            self._send_keyx(bodies, out)

        _, bodies = self.keyx.run_group_exchange(KeyxTick(now_ms))
        self._send_keyx(bodies, out)

        self.router.refresh_spanning_tree(now_ms)

        if now_ms >= self._next_ogm_ms:
            ogm = self.router.emit_ogm()
            self._send(
                Frame(
                    FrameType.OGM,
                    self.node_id,
                    self._take_frame_seq(),
                    next_hop_table=self._nht_for_frame(now_ms),
                    ogm=ogm,
                ),
                out,
            )
            self._next_ogm_ms = now_ms + self.protocol.ogm_interval_ms

        if self._pending_sample is not None and now_ms >= self._next_telemetry_ms:
            self._originate(self._pending_sample, now_ms, out)
            self._pending_sample = None

        oldest = self.queue.oldest_enqueued_ms()
        if oldest is not None and now_ms >= oldest + self.protocol.aggregation_delay_ms:
            self._flush(now_ms, out)

        return out

    def _originate(self, payload: TelemetryPayload, now_ms: int, out: Output) -> None:
        if not self.established:
            self.counters["samples_unkeyed"] += 1
            return
        self._origin_seq = (self._origin_seq + 1) & 0xFFFFFFFF
        plaintext = encode_payload(payload)
        message = seal_message(
            self.keyx.state.session_key,
            self.node_id,
            self._origin_seq,
            now_ms,
            self.protocol.max_ttl,
            plaintext,
        )
        # The origin is the root of its own tree and always transmits once.
        self.replay.accept(self.node_id, self._origin_seq)
        self.dedup.mark_forwarded(message.message_id)
        self.queue.enqueue(message, now_ms)
        self.counters["messages_originated"] += 1
        self._next_telemetry_ms = now_ms + self.protocol.telemetry_interval_ms
        out.originated.append(Origination(self.node_id, self._origin_seq, now_ms, plaintext))

    def _flush(self, now_ms: int, out: Output) -> None:
        messages = self.queue.drain()
        frames = aggregate(
            messages,
            self._nht_for_frame(now_ms),
            self.protocol.mtu_bytes,
            self.node_id,
            self._frame_seq,
        )
        self._frame_seq = (self._frame_seq + len(frames)) & 0xFFFFFFFF
        for frame in frames:
            self._send(frame, out)
            self.counters["data_frames_sent"] += 1
            self.counters["messages_sent"] += len(frame.messages)

    # -- Frame reception ------------------------------------------------------

    def _on_frame(self, raw: bytes, now_ms: int) -> Output:
        out = Output()
        try:
            frame = decode_frame(raw, self.protocol.max_ttl)
        except CodecError as e:
            self.counters["frames_malformed"] += 1
            out.diagnostics.append(Diagnostic("malformed", str(e)))
            logger.warning(f"Node {self.node_id} dropped malformed frame: {e}")
            return out

        if frame.sender == self.node_id:
            return out
        if frame.sender not in self.config.roster:
            self.counters["frames_unknown_sender"] += 1
            out.diagnostics.append(Diagnostic("unknown_sender", str(frame.sender)))
            return out

        self.counters["frames_received"] += 1
        frame_heard_before = frame.frame_id in self._heard_frames
        self._remember_frame(frame.frame_id)
        self.router.heard(frame.sender, frame.next_hop_table, now_ms)
        self.router.refresh_spanning_tree(now_ms)

        if frame.frame_type == FrameType.OGM:
            self.counters["routing_frames"] += 1
            self._on_ogm(frame, now_ms, out)
        elif frame.frame_type == FrameType.KEYX:
            self.counters["routing_frames"] += 1
            self._on_keyx(frame, now_ms, out)
        else:
            for message in frame.messages:
                self._on_message(message, frame.sender, frame_heard_before, now_ms, out)
        return out

    def _remember_frame(self, frame_id: Tuple[int, int]) -> None:
        self._heard_frames[frame_id] = None
        self._heard_frames.move_to_end(frame_id)
        if len(self._heard_frames) > self.protocol.dedup_capacity:
            self._heard_frames.popitem(last=False)

    def _on_ogm(self, frame: Frame, now_ms: int, out: Output) -> None:
        if frame.ogm.originator == self.node_id:
            self.counters["ogm_own"] += 1
            return
        decision = self.router.process_ogm(frame.sender, frame.ogm, now_ms)
        if not decision.accepted:
            self.counters["ogm_infeasible"] += 1
            return
        self.counters["ogm_accepted"] += 1
        if frame.ogm.originator == self.root:
            self.router.refresh_spanning_tree(now_ms)
        if decision.forward is not None:
            self._send(
                Frame(
                    FrameType.OGM,
                    self.node_id,
                    self._take_frame_seq(),
                    next_hop_table=self._nht_for_frame(now_ms),
                    ogm=decision.forward,
                ),
                out,
            )

    def _on_keyx(self, frame: Frame, now_ms: int, out: Output) -> None:
        replies: List[KeyxBody] = []
        relay: List[KeyxBody] = []
        for body in frame.keyx:
            try:
                _, bodies = self.keyx.run_group_exchange(KeyxFrameIn(body, now_ms))
                replies.extend(bodies)
            except UnknownMemberError as e:
                self.counters["keyx_unknown_member"] += 1
                out.diagnostics.append(Diagnostic("keyx_unknown_member", str(e)))
                continue
            except CryptoError as e:
                self.counters["keyx_rejected"] += 1
                out.diagnostics.append(Diagnostic("keyx_rejected", str(e)))
                continue
            if self._should_relay_keyx(body, frame.sender, now_ms):
                relay.append(body)
        self._send_keyx(replies + [b for b in relay if b not in replies], out)

    def _should_relay_keyx(self, body: KeyxBody, sender: int, now_ms: int) -> bool:
        if isinstance(body, PubkeyBody):
            if body.owner == self.node_id:
                return False
            source = body.owner
        else:
            if body.member == self.node_id:
                return False
            source = self.root
        # Only a neighbor that neither sent the frame nor wrote the body can use a relay.
        audience = {view.neighbor for view in self.router.live_neighbors(now_ms)}
        if not audience - {sender, source}:
            return False
        last = self._keyx_relayed.get(body)
        if last is not None and now_ms - last < self.protocol.keyx_retry_ms // 2:
            return False
        self._keyx_relayed[body] = now_ms
        return True

    def _on_message(
        self,
        message: SealedMessage,
        sender: int,
        frame_heard_before: bool,
        now_ms: int,
        out: Output,
    ) -> None:
        self.counters["messages_received"] += 1
        msg_id = message.message_id

        if not self.established:
            self._reject("no_key", message, out)
            return

        key = self.keyx.state.session_key
        try:
            plaintext, _ = open_message(key, message, self.replay, now_ms)
        except BadTagError:
            self._reject("bad_tag", message, out)
            return
        except StaleError:
            self._reject("stale", message, out)
            return
        except ReplayedError:
            if frame_heard_before or msg_id not in self.dedup:
                self._reject("replayed", message, out)
                return
            self.dedup.on_duplicate(msg_id)
            out.diagnostics.append(
                Diagnostic("duplicate", f"{message.origin}:{message.origin_seq}")
            )
            self._consider_forward(message, sender, now_ms)
            return

        try:
            payload = decode_payload(plaintext)
        except CodecError:
            self._reject("payload", message, out)
            return

        self.dedup.add(msg_id)
        self.counters["delivered"] += 1
        out.deliveries.append(
            Delivery(
                node=self.node_id,
                origin=message.origin,
                origin_seq=message.origin_seq,
                payload=payload,
                timestamp_ms=message.timestamp_ms,
                received_ms=now_ms,
                hops=self.protocol.max_ttl - message.ttl + 1,
                via=sender,
            )
        )
        self._consider_forward(message, sender, now_ms)

    def _consider_forward(self, message: SealedMessage, sender: int, now_ms: int) -> None:
        mode = self.config.mode
        if mode == ForwardingMode.SPANNING_TREE:
            tree = self.router.spanning_tree
            if tree is not None and sender != tree.parent and sender not in tree.children:
                self.counters["non_tree_receptions"] += 1
        if should_forward(self.node_id, message, sender, mode, self.router, self.dedup, now_ms):
            if self.queue.enqueue(message.with_ttl(message.ttl - 1), now_ms):
                self.dedup.mark_forwarded(message.message_id)
                self.counters["messages_forwarded"] += 1

    def _reject(self, reason: str, message: SealedMessage, out: Output) -> None:
        self.counters[f"rejected_{reason}"] += 1
        out.diagnostics.append(
            Diagnostic(f"rejected_{reason}", f"{message.origin}:{message.origin_seq}")
        )
        logger.debug(
            f"Node {self.node_id} rejected {message.origin}:{message.origin_seq} ({reason})"
        )

    # -- Transmission ---------------------------------------------------------

    def _take_frame_seq(self) -> int:
        seq = self._frame_seq
        self._frame_seq = (self._frame_seq + 1) & 0xFFFFFFFF
        return seq

    def _nht_for_frame(self, now_ms: int) -> Tuple:
        if self.protocol.nht_policy == "interval":
            if (
                self._last_nht_ms is not None
                and now_ms - self._last_nht_ms < self.protocol.nht_interval_ms
            ):
                return ()
        self._last_nht_ms = now_ms
        # Leave room for the header and one sealed telemetry message.
        room = self.protocol.mtu_bytes - HEADER_SIZE - SEALED_OVERHEAD - PAYLOAD_SIZE
        return self.router.next_hop_entries(limit=room // NHT_ENTRY_SIZE)

    def _send_keyx(self, bodies: List[KeyxBody], out: Output) -> None:
        # PUBKEY and WRAPPED bodies have the same size.
        per_frame = min(255, (self.protocol.mtu_bytes - HEADER_SIZE) // PUBKEY_BODY_SIZE)
        for start in range(0, len(bodies), per_frame):
            chunk = tuple(bodies[start : start + per_frame])
            self._send(
                Frame(FrameType.KEYX, self.node_id, self._take_frame_seq(), keyx=chunk), out
            )

    def _send(self, frame: Frame, out: Output) -> None:
        raw = encode_frame(frame, self.protocol.mtu_bytes, self.protocol.max_ttl)
        out.frames.append(raw)
        self.counters["frames_sent"] += 1
        self.counters[f"{frame.frame_type.name.lower()}_frames"] += 1
