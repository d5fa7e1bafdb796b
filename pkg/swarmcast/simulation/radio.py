# swarmcast/simulation/radio.py

"""
Unit-disk radio with seeded Bernoulli loss.

Every reception decision draws from its own counter-based Philox stream
keyed by the scenario seed and (sender, transmission, receiver), so the
order in which receivers are visited cannot change the outcome. Routing and
key exchange frames are keyed by their frame_seq. Sealed messages inside a
DATA frame are erased one by one, keyed by the message identity, so a given
message meets the same draw on a given link at every loss level.
"""

from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from .mobility import distance, position_at
from .scenario import AdversaryKind, Mobility, Scenario

# Stream tags in the last Philox counter word.
HONEST_STREAM = 0
INJECTION_STREAM = 1
JAM_STREAM = 2
MESSAGE_STREAM = 3
MESSAGE_JAM_STREAM = 4


def message_key(origin: int, origin_seq: int) -> int:
    """Single counter word naming one sealed message."""
    return (origin << 32) | origin_seq


def bernoulli_draw(seed: int, sender: int, transmission: int, receiver: int, stream: int) -> float:
    """Uniform [0, 1) draw owned by one (sender, transmission, receiver) triple."""
    bit_generator = np.random.Philox(key=seed, counter=[sender, transmission, receiver, stream])
    return float(np.random.Generator(bit_generator).random())


class RadioModel:
    """Who hears whom at a given millisecond, and whether the frame survives."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.node_ids = sorted(n.id for n in scenario.nodes)
        self._placements = {n.id: n for n in scenario.nodes}
        self._static = scenario.mobility == Mobility.STATIC
        self._position_cache: Dict[int, Dict[int, Tuple[float, float]]] = {}
        self._graph_cache: Dict[int, nx.Graph] = {}

    def positions(self, t_ms: int) -> Dict[int, Tuple[float, float]]:
        key = 0 if self._static else t_ms
        cached = self._position_cache.get(key)
        if cached is None:
            cached = {i: position_at(self._placements[i], t_ms) for i in self.node_ids}
            if len(self._position_cache) > 64:
                self._position_cache.clear()
            self._position_cache[key] = cached
        return cached

    def in_range(self, sender: int, t_ms: int) -> List[int]:
        """Honest nodes other than ``sender`` within radio range, ascending."""
        positions = self.positions(t_ms)
        origin = positions[sender]
        limit = self.scenario.radio_range_m
        return [
            v for v in self.node_ids if v != sender and distance(origin, positions[v]) <= limit
        ]

    def in_range_of_point(self, point: Tuple[float, float], range_m: float, t_ms: int) -> List[int]:
        positions = self.positions(t_ms)
        return [v for v in self.node_ids if distance(point, positions[v]) <= range_m]

    def received(
        self,
        sender: int,
        frame_seq: int,
        receiver: int,
        t_ms: int,
        stream: int = HONEST_STREAM,
    ) -> bool:
        """Bernoulli survival of one whole frame at one receiver, including jamming."""
        return self._survives(sender, frame_seq, receiver, t_ms, stream, JAM_STREAM)

    def message_received(
        self, sender: int, origin: int, origin_seq: int, receiver: int, t_ms: int
    ) -> bool:
        """Survival of one sealed message relayed by ``sender`` to ``receiver``."""
        return self._survives(
            sender,
            message_key(origin, origin_seq),
            receiver,
            t_ms,
            MESSAGE_STREAM,
            MESSAGE_JAM_STREAM,
        )

    def _survives(
        self,
        sender: int,
        transmission: int,
        receiver: int,
        t_ms: int,
        stream: int,
        jam_stream: int,
    ) -> bool:
        loss = self.scenario.loss_probability
        seed = self.scenario.seed
        if loss > 0 and bernoulli_draw(seed, sender, transmission, receiver, stream) < loss:
            return False

        jammer = self.scenario.adversary
        if jammer is not None and jammer.kind == AdversaryKind.JAM:
            jammed = receiver in self.in_range_of_point((jammer.x, jammer.y), jammer.range_m, t_ms)
            if jammed:
                draw = bernoulli_draw(seed, sender, transmission, receiver, jam_stream)
                if draw < jammer.jam_loss_probability:
                    return False
        return True

    def graph(self, t_ms: int) -> nx.Graph:
        """Unit-disk connectivity graph of the honest nodes at ``t_ms``."""
        key = 0 if self._static else t_ms
        cached = self._graph_cache.get(key)
        if cached is not None:
            return cached
        positions = self.positions(t_ms)
        graph = nx.Graph()
        graph.add_nodes_from(self.node_ids)
        for i, u in enumerate(self.node_ids):
            for v in self.node_ids[i + 1 :]:
                if distance(positions[u], positions[v]) <= self.scenario.radio_range_m:
                    graph.add_edge(u, v)
        if len(self._graph_cache) > 64:
            self._graph_cache.clear()
        self._graph_cache[key] = graph
        return graph

    def reachable_from(self, origin: int, t_ms: int, max_hops: Optional[int] = None) -> set:
        lengths = nx.single_source_shortest_path_length(self.graph(t_ms), origin, cutoff=max_hops)
        return set(lengths) - {origin}
