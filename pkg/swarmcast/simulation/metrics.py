# swarmcast/simulation/metrics.py

"""
Metrics collection and the machine-readable run report.
"""

import json
import logging
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from ..core.codec import Frame, FrameType
from ..node import REJECT_REASONS, Delivery, Diagnostic, Origination

logger = logging.getLogger(__name__)

MessageId = Tuple[int, int]


@dataclass(frozen=True)
class TraceRecord:
    """One line of the per-event trace file."""

    time_ms: int
    node: int
    kind: str
    detail: str

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def write_trace(records: Iterable[TraceRecord], path: str) -> None:
    """Write trace records as JSON lines."""
    with open(path, "w") as f:
        for record in records:
            f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def _distribution(values: List[float]) -> Dict[str, Optional[float]]:
    if not values:
        return {"mean": None, "p50": None, "p95": None}
    arr = np.asarray(values, dtype=float)
    return {
        "mean": round(float(arr.mean()), 6),
        "p50": round(float(np.percentile(arr, 50)), 6),
        "p95": round(float(np.percentile(arr, 95)), 6),
    }


def _ratio(numerator: int, denominator: int) -> float:
    return round(numerator / denominator, 6) if denominator else 0.0


@dataclass
class MetricsReport:
    """Outcome of one scenario run under one forwarding mode."""

    scenario: str
    mode: str
    seed: int
    duration_ms: int
    node_count: int
    messages_originated: int
    delivery_ratio: float
    reachable_delivery_ratio: float
    transmissions_per_message: float
    frames_per_message: float
    latency_hops: Dict[str, Optional[float]]
    latency_ms: Dict[str, Optional[float]]
    duplicates: int
    duplicate_deliveries: int
    forged_deliveries: int
    rejected: Dict[str, int]
    malformed_frames: int
    key_exchange_time_ms: Optional[int]
    keys_established: int
    frames_sent: Dict[str, int]
    bytes_sent: int
    max_frame_bytes: int
    per_node: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    adversary: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_file(self, path: str) -> None:
        Path(path).write_text(self.to_json())

    def summary_line(self) -> str:
        p95 = self.latency_ms["p95"]
        p95_text = "n/a" if p95 is None else f"{p95:.1f} ms"
        return (
            f"{self.mode}: delivery_ratio={self.delivery_ratio:.4f} "
            f"tx/msg={self.transmissions_per_message:.3f} p95_latency={p95_text}"
        )


class MetricsCollector:
    """Accumulates ground truth and observations while the simulator runs."""

    def __init__(self, roster: Iterable[int]):
        self.roster = sorted(roster)
        self.originated: Dict[MessageId, Origination] = {}
        self.reachable: Dict[MessageId, Set[int]] = {}
        self.deliveries: Dict[Tuple[int, int, int], int] = Counter()
        self.latency_hops: List[float] = []
        self.latency_ms: List[float] = []
        self.forged = 0
        self.copies_sent: Counter = Counter()
        self.frames_by_type: Counter = Counter()
        self.frames_by_node: Counter = Counter()
        self.bytes_by_node: Counter = Counter()
        self.max_frame_bytes = 0
        self.delivered_to: Dict[int, int] = Counter()
        self.injected_outcomes: Counter = Counter()
        self.injected_deliveries = 0
        self.injected_forged = 0

    def on_originated(self, record: Origination, reachable: Set[int]) -> None:
        msg_id = (record.origin, record.origin_seq)
        self.originated[msg_id] = record
        self.reachable[msg_id] = reachable

    def on_transmit(self, node: int, raw: bytes, frame: Frame) -> None:
        self.frames_by_type[frame.frame_type.name] += 1
        self.frames_by_node[node] += 1
        self.bytes_by_node[node] += len(raw)
        self.max_frame_bytes = max(self.max_frame_bytes, len(raw))
        if frame.frame_type == FrameType.DATA:
            for message in frame.messages:
                self.copies_sent[message.message_id] += 1

    def on_delivery(self, delivery: Delivery, plaintext: Optional[bytes], injected: bool) -> None:
        """
        Record one application delivery.

        ``plaintext`` is the re-encoded delivered payload, compared against
        the origin's ground truth to detect forgeries.
        """
        msg_id = (delivery.origin, delivery.origin_seq)
        truth = self.originated.get(msg_id)
        forged = truth is None or truth.plaintext != plaintext
        if forged:
            self.forged += 1
            logger.warning(
                f"Node {delivery.node} accepted forged message {msg_id[0]}:{msg_id[1]}"
            )
        if injected:
            self.injected_deliveries += 1
            self.injected_forged += int(forged)
        self.deliveries[(delivery.node, delivery.origin, delivery.origin_seq)] += 1
        if not forged:
            self.delivered_to[delivery.node] += 1
            self.latency_hops.append(delivery.hops)
            self.latency_ms.append(delivery.latency_ms)

    def on_diagnostics(self, diagnostics: List[Diagnostic], injected: bool) -> None:
        if injected:
            for diagnostic in diagnostics:
                self.injected_outcomes[diagnostic.kind] += 1

    def build_report(
        self,
        scenario_name: str,
        mode: str,
        seed: int,
        duration_ms: int,
        snapshots: Dict[int, Dict[str, Any]],
        adversary: Optional[Dict[str, Any]] = None,
    ) -> MetricsReport:
        pairs = 0
        reachable_pairs = 0
        delivered_pairs = 0
        delivered_reachable = 0
        expected_by_node: Dict[int, int] = defaultdict(int)

        for msg_id, record in self.originated.items():
            reachable = self.reachable.get(msg_id, set())
            for receiver in self.roster:
                if receiver == record.origin:
                    continue
                pairs += 1
                expected_by_node[receiver] += 1
                got = self.deliveries.get((receiver, *msg_id), 0) > 0
                delivered_pairs += int(got)
                if receiver in reachable:
                    reachable_pairs += 1
                    delivered_reachable += int(got)

        originated = len(self.originated)
        copies = sum(self.copies_sent[msg_id] for msg_id in self.originated)
        total_frames = sum(self.frames_by_type.values())

        rejected = {reason: 0 for reason in REJECT_REASONS}
        duplicates = 0
        malformed = 0
        established = [
            s["key_exchange"]["established_at_ms"]
            for s in snapshots.values()
            if s["key_exchange"]["established_at_ms"] is not None
        ]
        per_node: Dict[str, Dict[str, Any]] = {}
        for node_id, snap in sorted(snapshots.items()):
            counters = snap["counters"]
            for reason in REJECT_REASONS:
                rejected[reason] += counters.get(f"rejected_{reason}", 0)
            duplicates += counters.get("duplicates", 0)
            malformed += counters.get("frames_malformed", 0)
            per_node[str(node_id)] = {
                "frames_sent": self.frames_by_node[node_id],
                "bytes_sent": self.bytes_by_node[node_id],
                "messages_originated": counters.get("messages_originated", 0),
                "messages_forwarded": counters.get("messages_forwarded", 0),
                "delivered": counters.get("delivered", 0),
                "delivery_ratio": _ratio(
                    self.delivered_to[node_id], expected_by_node.get(node_id, 0)
                ),
                "duplicates": counters.get("duplicates", 0),
                "established_at_ms": snap["key_exchange"]["established_at_ms"],
                "neighbors": len(snap["neighbors"]),
                "routes": len(snap["routes"]),
            }

        return MetricsReport(
            scenario=scenario_name,
            mode=mode,
            seed=seed,
            duration_ms=duration_ms,
            node_count=len(self.roster),
            messages_originated=originated,
            delivery_ratio=_ratio(delivered_pairs, pairs),
            reachable_delivery_ratio=_ratio(delivered_reachable, reachable_pairs),
            transmissions_per_message=_ratio(copies, originated) if pairs else 0.0,
            frames_per_message=_ratio(total_frames, originated) if pairs else 0.0,
            latency_hops=_distribution(self.latency_hops),
            latency_ms=_distribution(self.latency_ms),
            duplicates=duplicates,
            duplicate_deliveries=sum(n - 1 for n in self.deliveries.values() if n > 1),
            forged_deliveries=self.forged,
            rejected=rejected,
            malformed_frames=malformed,
            key_exchange_time_ms=max(established)
            if len(established) == len(snapshots)
            else None,
            keys_established=len(established),
            frames_sent=dict(sorted(self.frames_by_type.items())),
            bytes_sent=sum(self.bytes_by_node.values()),
            max_frame_bytes=self.max_frame_bytes,
            per_node=per_node,
            adversary=adversary,
        )
