# swarmcast/core/routing.py

"""
Proactive route discovery and broadcast-tree membership.

Originator messages (OGMs) are flooded periodically; each node keeps only
the best next hop toward every originator, guarded by a Babel-style
feasibility condition. Neighbors' advertised next-hop tables are inverted
into per-source broadcast trees, and the root's OGM flood doubles as a
single spanning tree when that forwarding mode is selected.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from ..config import DEFAULT_PROTOCOL_CONFIG, ProtocolConfig
from ..exceptions import OrphanedError, RoutingLoopError
from .codec import NextHopEntry, OgmBody

logger = logging.getLogger(__name__)

SEQ_MODULUS = 1 << 16
_HALF = SEQ_MODULUS // 2


def seq_newer(a: int, b: int) -> bool:
    """True if 16-bit sequence ``a`` is newer than ``b`` (RFC 1982 serial arithmetic)."""
    return 0 < (a - b) % SEQ_MODULUS < _HALF


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    metric: int
    ogm_seq: int
    feasibility_distance: int
    last_updated_ms: int


@dataclass
class NeighborView:
    """What this node knows about one neighbor's routing table."""

    neighbor: int
    their_next_hops: Dict[int, int] = field(default_factory=dict)
    last_heard_ms: int = 0
    entry_heard_ms: Dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class SpanningTreeState:
    root: int
    parent: Optional[int]
    depth: int
    children: FrozenSet[int]

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class OgmDecision:
    accepted: bool
    forward: Optional[OgmBody] = None


def children_for_origin(
    self_id: int, origin: int, neighbors: Iterable[NeighborView]
) -> Set[int]:
    """
    Neighbors that expect ``origin``'s broadcasts to arrive through ``self_id``.

    A neighbor is a child for ``origin`` when its advertised next hop toward
    ``origin`` is this node. Missing entries mean "not a child".
    """
    return {n.neighbor for n in neighbors if n.their_next_hops.get(origin) == self_id}


class Router:
    """
    Routing state of one node.

    All mutation goes through the owning engine's event handling, always
    with that event's ``now_ms``.
    """

    def __init__(
        self,
        node_id: int,
        root: int,
        config: ProtocolConfig = DEFAULT_PROTOCOL_CONFIG,
        spanning_tree_mode: bool = False,
    ):
        self.node_id = node_id
        self.root = root
        self.config = config
        self.spanning_tree_mode = spanning_tree_mode

        self.routes: Dict[int, RouteEntry] = {}
        self.neighbors: Dict[int, NeighborView] = {}
        self.spanning_tree: Optional[SpanningTreeState] = None
        self._ogm_seq = 0
        # Feasibility memory outlives the route it belongs to.
        self._sources: Dict[int, Tuple[int, int]] = {}
        self._tree_announcements: Dict[int, Tuple[int, int]] = {}
        self._nht_cursor = 0

        if node_id == root:
            self.spanning_tree = SpanningTreeState(root, None, 0, frozenset())

    # -- OGM origination and processing -------------------------------------

    def emit_ogm(self) -> OgmBody:
        """Next own originator message: sequence +1 (mod 2^16), metric 0."""
        self._ogm_seq = (self._ogm_seq + 1) % SEQ_MODULUS
        return OgmBody(self.node_id, self._ogm_seq, 0)

    def is_feasible(self, ogm: OgmBody) -> bool:
        source = self._sources.get(ogm.originator)
        if source is None:
            return True
        seq, feasibility_distance = source
        if seq_newer(ogm.ogm_seq, seq):
            return True
        return ogm.ogm_seq == seq and ogm.metric + 1 < feasibility_distance

    def process_ogm(self, from_neighbor: int, ogm: OgmBody, now_ms: int) -> OgmDecision:
        """
        Accept a feasible advertisement and decide whether to re-flood it.

        Feasible means a strictly newer sequence, or the same sequence with
        metric + 1 strictly below the feasibility distance.
        """
        if ogm.originator == self.node_id:
            return OgmDecision(False)

        if self.spanning_tree_mode and ogm.originator == self.root:
            self._tree_announcements[from_neighbor] = (ogm.metric, now_ms)

        if not self.is_feasible(ogm):
            return OgmDecision(False)

        metric = ogm.metric + 1
        self.routes[ogm.originator] = RouteEntry(
            destination=ogm.originator,
            next_hop=from_neighbor,
            metric=metric,
            ogm_seq=ogm.ogm_seq,
            feasibility_distance=metric,
            last_updated_ms=now_ms,
        )
        self._sources[ogm.originator] = (ogm.ogm_seq, metric)

        forward = None
        if metric < self.config.max_ttl:
            forward = OgmBody(ogm.originator, ogm.ogm_seq, metric)
        return OgmDecision(True, forward)

    # -- Neighbor tracking ----------------------------------------------------

    def heard(
        self, sender: int, table: Optional[Iterable[NextHopEntry]], now_ms: int
    ) -> NeighborView:
        """Record a frame heard from ``sender`` and merge its next-hop table."""
        view = self.neighbors.get(sender)
        if view is None:
            view = NeighborView(sender)
            self.neighbors[sender] = view
            logger.debug(f"Node {self.node_id} discovered neighbor {sender}")
        view.last_heard_ms = now_ms
        for entry in table or ():
            view.their_next_hops[entry.destination] = entry.next_hop
            view.entry_heard_ms[entry.destination] = now_ms
        return view

    def live_neighbors(self, now_ms: int) -> List[NeighborView]:
        timeout = self.config.neighbor_timeout_ms
        return [
            view
            for _, view in sorted(self.neighbors.items())
            if now_ms - view.last_heard_ms <= timeout
        ]

    def expire(self, now_ms: int) -> None:
        """Drop dead neighbors, stale advertised entries and orphaned routes."""
        timeout = self.config.neighbor_timeout_ms
        dead = [n for n, v in self.neighbors.items() if now_ms - v.last_heard_ms > timeout]
        for neighbor in dead:
            del self.neighbors[neighbor]
            self._tree_announcements.pop(neighbor, None)
            logger.debug(f"Node {self.node_id} lost neighbor {neighbor}")

        for view in self.neighbors.values():
            stale = [d for d, t in view.entry_heard_ms.items() if now_ms - t > timeout]
            for destination in stale:
                del view.their_next_hops[destination]
                del view.entry_heard_ms[destination]

        for neighbor in [
            n for n, (_, t) in self._tree_announcements.items() if now_ms - t > timeout
        ]:
            del self._tree_announcements[neighbor]

        route_timeout = self.config.route_timeout_ms
        for destination in [
            d
            for d, r in self.routes.items()
            if r.next_hop not in self.neighbors or now_ms - r.last_updated_ms > route_timeout
        ]:
            del self.routes[destination]

    # -- Broadcast trees ------------------------------------------------------

    def children_for_origin(self, origin: int, now_ms: int) -> Set[int]:
        return children_for_origin(self.node_id, origin, self.live_neighbors(now_ms))

    def update_spanning_tree(
        self, neighbor_announcements: Iterable[Tuple[int, int]], now_ms: int
    ) -> SpanningTreeState:
        """
        Recompute this node's place in the spanning tree.

        The parent is the neighbor announcing the minimum depth, ties to the
        lowest id. Children are the live neighbors whose advertised next hop
        toward the root is this node.

        Raises:
            OrphanedError: If no neighbor announces a depth
        """
        children = frozenset(self.children_for_origin(self.root, now_ms))
        if self.node_id == self.root:
            return SpanningTreeState(self.root, None, 0, children)

        candidates = sorted((depth, neighbor) for neighbor, depth in neighbor_announcements)
        if not candidates:
            raise OrphanedError(f"node {self.node_id} has no spanning-tree parent")
        parent_depth, parent = candidates[0]
        return SpanningTreeState(self.root, parent, parent_depth + 1, children - {parent})

    def refresh_spanning_tree(self, now_ms: int) -> Optional[SpanningTreeState]:
        """Update the cached tree state; an orphaned node withdraws from forwarding."""
        if not self.spanning_tree_mode:
            return None
        announcements = [(n, depth) for n, (depth, _) in self._tree_announcements.items()]
        try:
            self.spanning_tree = self.update_spanning_tree(announcements, now_ms)
        except OrphanedError:
            if self.spanning_tree is not None:
                logger.info(f"Node {self.node_id} orphaned from the spanning tree")
            self.spanning_tree = None
        return self.spanning_tree

    # -- Advertisement --------------------------------------------------------

    def advertised_table(self) -> List[NextHopEntry]:
        """The full next-hop table this node advertises, by destination."""
        entries = []
        for destination, route in sorted(self.routes.items()):
            next_hop, hops = route.next_hop, route.metric
            if (
                self.spanning_tree_mode
                and destination == self.root
                and self.spanning_tree is not None
                and self.spanning_tree.parent is not None
            ):
                next_hop, hops = self.spanning_tree.parent, self.spanning_tree.depth
            entries.append(NextHopEntry(destination, next_hop, min(hops, 255)))
        return entries

    def next_hop_entries(self, limit: Optional[int] = None) -> Tuple[NextHopEntry, ...]:
        """
        Next-hop entries for one outgoing frame.

        Tables larger than ``nht_max_entries`` (or ``limit``, when smaller)
        are rotated round-robin so every entry is eventually advertised.
        """
        table = self.advertised_table()
        cap = self.config.nht_max_entries
        if limit is not None:
            cap = min(cap, limit)
        if cap <= 0:
            return ()
        if len(table) <= cap:
            return tuple(table)
        start = self._nht_cursor % len(table)
        self._nht_cursor = (start + cap) % len(table)
        rotated = table[start:] + table[:start]
        return tuple(sorted(rotated[:cap], key=lambda e: e.destination))

    def snapshot(self) -> Dict[str, object]:
        tree = self.spanning_tree
        return {
            "routes": {
                d: {
                    "next_hop": r.next_hop,
                    "metric": r.metric,
                    "ogm_seq": r.ogm_seq,
                    "feasibility_distance": r.feasibility_distance,
                }
                for d, r in sorted(self.routes.items())
            },
            "neighbors": sorted(self.neighbors),
            "spanning_tree": None
            if tree is None
            else {
                "root": tree.root,
                "parent": tree.parent,
                "depth": tree.depth,
                "children": sorted(tree.children),
                "is_leaf": tree.is_leaf,
            },
        }


def check_loop_free(next_hops: Mapping[int, Mapping[int, int]]) -> None:
    """
    Walk every route chain across a set of nodes.

    Args:
        next_hops: node -> {destination -> next hop}

    Raises:
        RoutingLoopError: If any chain revisits a node
    """
    for start, table in next_hops.items():
        for destination in table:
            visited = {start}
            node = start
            while node != destination:
                hop = next_hops.get(node, {}).get(destination)
                if hop is None:
                    break
                if hop in visited:
                    raise RoutingLoopError(
                        f"loop toward {destination} starting at {start} revisits {hop}"
                    )
                visited.add(hop)
                node = hop
