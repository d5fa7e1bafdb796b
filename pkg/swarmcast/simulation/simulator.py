# swarmcast/simulation/simulator.py

"""
Deterministic discrete-event simulator.

Time advances in 1 ms steps, skipping milliseconds in which nothing can
happen. Within one millisecond the order is fixed: frame arrivals sorted by
(receiver, sender, injection counter), then telemetry samples, then ticks of
every node that is due, in ascending node id. Frames transmitted at t arrive
at t + 1. Loss on a DATA frame erases individual sealed messages, so a receiver
may hear a shorter frame than was sent.
"""

import heapq
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config import DEFAULT_SIMULATION_DEFAULTS, SimulationDefaults
from ..core.codec import Frame, FrameType, decode_frame, encode_frame, encode_payload
from ..core.routing import check_loop_free
from ..exceptions import MtuViolationError
from ..node import Event, FrameIn, NodeConfig, Output, SwarmNode, TelemetrySample, Tick
from .adversary import Adversary, Injection, transcript_contains
from .metrics import MetricsCollector, MetricsReport, TraceRecord
from .mobility import synthesize_telemetry
from .radio import HONEST_STREAM, INJECTION_STREAM, RadioModel
from .scenario import AdversaryKind, Scenario

logger = logging.getLogger(__name__)

ADVERSARY_SENDER_KEY = 0x10000


@dataclass
class SimulationResult:
    report: MetricsReport
    trace: List[TraceRecord] = field(default_factory=list)
    snapshots: Dict[int, Dict] = field(default_factory=dict)
    transmissions: List[Tuple[int, int, bytes]] = field(default_factory=list)


@dataclass(order=True)
class _Arrival:
    time_ms: int
    receiver: int
    sender_key: int
    counter: int
    raw: bytes = field(compare=False)
    injected: bool = field(compare=False, default=False)


def node_seed(scenario_seed: int, node_id: int) -> int:
    """Per-node engine seed derived from the scenario seed."""
    return int(np.random.SeedSequence([scenario_seed, node_id]).generate_state(2, np.uint64)[0])


class Simulator:
    """
    Runs one scenario to completion.

    Args:
        scenario: Validated scenario
        defaults: Simulation defaults (telemetry synthesis, loop checking)
        trace: Collect a per-event trace
        keep_transmissions: Keep every transmitted frame for inspection
    """

    def __init__(
        self,
        scenario: Scenario,
        defaults: SimulationDefaults = DEFAULT_SIMULATION_DEFAULTS,
        trace: bool = False,
        keep_transmissions: bool = False,
    ):
        scenario.validate()
        self.scenario = scenario
        self.defaults = defaults
        self.trace_enabled = trace
        self.keep_transmissions = keep_transmissions

        self.radio = RadioModel(scenario)
        self.protocol = scenario.protocol
        self.nodes: Dict[int, SwarmNode] = {
            placement.id: SwarmNode(
                NodeConfig(
                    id=placement.id,
                    roster=scenario.roster,
                    mode=scenario.mode,
                    rng_seed=node_seed(scenario.seed, placement.id),
                    protocol=scenario.protocol,
                )
            )
            for placement in sorted(scenario.nodes, key=lambda p: p.id)
        }
        self.adversary: Optional[Adversary] = None
        if scenario.adversary is not None:
            self.adversary = Adversary(
                scenario.adversary,
                np.random.default_rng(np.random.SeedSequence([scenario.seed, 0])),
            )

        self.metrics = MetricsCollector(self.nodes)
        self.trace: List[TraceRecord] = []
        self.transmissions: List[Tuple[int, int, bytes]] = []
        self._arrivals: List[_Arrival] = []
        self._counter = 0
        self._injections = 0
        self._next_sample_ms = scenario.warmup_ms
        self._sample_end_ms = scenario.duration_ms - scenario.drain_ms

    # -- Main loop ------------------------------------------------------------

    def run(self) -> SimulationResult:
        scenario = self.scenario
        logger.info(
            f"Running scenario {scenario.name} ({len(self.nodes)} nodes, "
            f"{scenario.mode.value}, seed {scenario.seed}, {scenario.duration_ms} ms)"
        )
        t = 0
        while t <= scenario.duration_ms:
            self._process_arrivals(t)
            self._process_samples(t)
            self._process_ticks(t)
            t = self._next_time(t)

        self._check_eavesdrop_confidentiality()
        snapshots = {node_id: node.snapshot() for node_id, node in self.nodes.items()}
        report = self.metrics.build_report(
            scenario.name,
            scenario.mode.value,
            scenario.seed,
            scenario.duration_ms,
            snapshots,
            self._adversary_summary(),
        )
        logger.info(f"Finished scenario {scenario.name}: {report.summary_line()}")
        return SimulationResult(report, self.trace, snapshots, self.transmissions)

    def _next_time(self, t: int) -> int:
        candidates = [t + 1 + self.scenario.duration_ms]
        if self._arrivals:
            candidates.append(self._arrivals[0].time_ms)
        if self._next_sample_ms < self._sample_end_ms:
            candidates.append(self._next_sample_ms)
        for node in self.nodes.values():
            candidates.append(node.next_wakeup_ms(t + 1))
        return max(t + 1, min(candidates))

    def _process_arrivals(self, t: int) -> None:
        while self._arrivals and self._arrivals[0].time_ms == t:
            arrival = heapq.heappop(self._arrivals)
            out = self._deliver_event(
                arrival.receiver, FrameIn(arrival.raw, t), injected=arrival.injected
            )
            self._transmit_all(arrival.receiver, out, t)

    def _process_samples(self, t: int) -> None:
        if t != self._next_sample_ms or t >= self._sample_end_ms:
            return
        for node_id in self.nodes:
            payload = synthesize_telemetry(self.scenario.placement(node_id), t, self.defaults)
            self._deliver_event(node_id, TelemetrySample(payload, t))
        self._next_sample_ms = t + self.protocol.telemetry_interval_ms

    def _process_ticks(self, t: int) -> None:
        for node_id, node in self.nodes.items():
            if node.next_wakeup_ms(t) <= t:
                out = self._deliver_event(node_id, Tick(t))
                self._transmit_all(node_id, out, t)

    # -- Event plumbing -------------------------------------------------------

    def _deliver_event(self, node_id: int, event: Event, injected: bool = False) -> Output:
        node = self.nodes[node_id]
        out = node.handle_event(event)
        t = event.now_ms

        for record in out.originated:
            reachable = self.radio.reachable_from(record.origin, t, self.protocol.max_ttl)
            self.metrics.on_originated(record, reachable)
        for delivery in out.deliveries:
            self.metrics.on_delivery(delivery, encode_payload(delivery.payload), injected)
            self._trace(
                t,
                node_id,
                "deliver",
                f"{delivery.origin}:{delivery.origin_seq} via {delivery.via} hops={delivery.hops}",
            )
        self.metrics.on_diagnostics(out.diagnostics, injected)
        for diagnostic in out.diagnostics:
            self._trace(t, node_id, diagnostic.kind, diagnostic.detail)

        if self.defaults.check_loops:
            check_loop_free(
                {
                    i: {d: r.next_hop for d, r in n.router.routes.items()}
                    for i, n in self.nodes.items()
                }
            )
        return out

    def _transmit_all(self, sender: int, out: Output, t: int) -> None:
        for raw in out.frames:
            self._transmit(sender, raw, t)

    def _transmit(self, sender: int, raw: bytes, t: int) -> None:
        if len(raw) > self.protocol.mtu_bytes:
            raise MtuViolationError(
                f"node {sender} emitted {len(raw)} bytes (mtu {self.protocol.mtu_bytes})"
            )
        frame = decode_frame(raw, self.protocol.max_ttl)
        self.metrics.on_transmit(sender, raw, frame)
        if self.keep_transmissions:
            self.transmissions.append((t, sender, raw))
        self._trace(
            t, sender, "tx", f"{frame.frame_type.name} seq={frame.frame_seq} len={len(raw)}"
        )

        for receiver in self.radio.in_range(sender, t):
            heard = self._surviving(sender, raw, frame, receiver, t)
            if heard is not None:
                self._schedule(_Arrival(t + 1, receiver, sender, self._take_counter(), heard))

        adversary = self.adversary
        if adversary is not None and adversary.model.kind != AdversaryKind.JAM:
            model = adversary.model
            position = self.radio.positions(t)[sender]
            if self._within(position, (model.x, model.y), model.range_m):
                for injection in adversary.overhear(raw, sender, t):
                    self._inject(injection)

    def _surviving(
        self, sender: int, raw: bytes, frame: Frame, receiver: int, t: int
    ) -> Optional[bytes]:
        """
        What ``receiver`` hears of one transmission, or None if nothing.

        DATA frames lose sealed messages independently; the receiver gets the
        frame re-encoded with the survivors under the same header.
        """
        radio = self.radio
        if frame.frame_type != FrameType.DATA:
            heard = radio.received(sender, frame.frame_seq, receiver, t, HONEST_STREAM)
            return raw if heard else None

        kept = tuple(
            message
            for message in frame.messages
            if radio.message_received(sender, message.origin, message.origin_seq, receiver, t)
        )
        if not kept:
            return None
        if len(kept) == len(frame.messages):
            return raw
        return encode_frame(
            replace(frame, messages=kept), self.protocol.mtu_bytes, self.protocol.max_ttl
        )

    def _inject(self, injection: Injection) -> None:
        model = self.adversary.model
        self._injections += 1
        send_ms = injection.send_ms
        self._trace(send_ms, 0, "inject", f"{model.kind.value} copy of {injection.source_sender}")
        for receiver in self.radio.in_range_of_point((model.x, model.y), model.range_m, send_ms):
            if self.radio.received(0, self._injections, receiver, send_ms, INJECTION_STREAM):
                self._schedule(
                    _Arrival(
                        send_ms + 1,
                        receiver,
                        ADVERSARY_SENDER_KEY,
                        self._take_counter(),
                        injection.raw,
                        injected=True,
                    )
                )

    def _schedule(self, arrival: _Arrival) -> None:
        heapq.heappush(self._arrivals, arrival)

    def _take_counter(self) -> int:
        self._counter += 1
        return self._counter

    @staticmethod
    def _within(a: Tuple[float, float], b: Tuple[float, float], range_m: float) -> bool:
        return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 <= range_m**2

    def _trace(self, t: int, node: int, kind: str, detail: str) -> None:
        if self.trace_enabled:
            self.trace.append(TraceRecord(t, node, kind, detail))

    # -- Adversary reporting --------------------------------------------------

    def _check_eavesdrop_confidentiality(self) -> None:
        if self.adversary is None:
            return
        transcript = self.adversary.transcript
        for record in self.metrics.originated.values():
            if transcript_contains(transcript, record.plaintext):
                logger.warning(
                    f"Plaintext of {record.origin}:{record.origin_seq} visible on the air"
                )

    def _adversary_summary(self) -> Optional[Dict]:
        adversary = self.adversary
        if adversary is None:
            return None
        kind = adversary.model.kind
        plaintext_leaks = sum(
            transcript_contains(adversary.transcript, r.plaintext)
            for r in self.metrics.originated.values()
        )
        session_keys = {
            n.keyx.state.session_key.key
            for n in self.nodes.values()
            if n.keyx.state.session_key is not None
        }
        key_leaks = sum(transcript_contains(adversary.transcript, k) for k in session_keys)
        summary = {
            "kind": kind.value,
            "frames_overheard": len(adversary.transcript),
            "frames_injected": adversary.injected,
            "injected_outcomes": dict(sorted(self.metrics.injected_outcomes.items())),
            "tampered_accepted": self.metrics.forged if kind == AdversaryKind.TAMPER else 0,
            "replay_accepted": self.metrics.injected_deliveries
            if kind == AdversaryKind.REPLAY
            else 0,
            "plaintext_leaks": plaintext_leaks,
            "session_key_leaks": key_leaks,
        }
        if kind == AdversaryKind.EAVESDROP:
            summary["traffic_analysis"] = adversary.traffic_analysis()
        return summary


def run(
    scenario: Scenario,
    defaults: SimulationDefaults = DEFAULT_SIMULATION_DEFAULTS,
    trace: bool = False,
) -> SimulationResult:
    """Run ``scenario`` and return its report (plus the trace if requested)."""
    return Simulator(scenario, defaults, trace=trace).run()
