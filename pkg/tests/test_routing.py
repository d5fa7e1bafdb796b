"""
Tests for route discovery, broadcast-tree inversion and the spanning tree.
"""

import pytest

from swarmcast.config import ProtocolConfig
from swarmcast.core.codec import NextHopEntry, OgmBody
from swarmcast.core.routing import (
    NeighborView,
    Router,
    check_loop_free,
    children_for_origin,
    seq_newer,
)
from swarmcast.exceptions import OrphanedError, RoutingLoopError


def make_router(node_id=2, root=1, spanning=False, **overrides) -> Router:
    return Router(node_id, root, ProtocolConfig(**overrides), spanning_tree_mode=spanning)


class TestSequenceNumbers:
    """Test OGM sequence generation and serial comparison."""

    def test_first_ogm(self):
        """Test the first OGM has seq 1 and metric 0."""
        assert make_router(5).emit_ogm() == OgmBody(5, 1, 0)

    def test_consecutive_ogms(self):
        """Test sequence numbers increase strictly."""
        router = make_router()

        assert [router.emit_ogm().ogm_seq for _ in range(5)] == [1, 2, 3, 4, 5]

    def test_wraparound(self):
        """Test 65535 is followed by 0, which still compares newer."""
        router = make_router()
        router._ogm_seq = 65534

        assert router.emit_ogm().ogm_seq == 65535
        assert router.emit_ogm().ogm_seq == 0
        assert seq_newer(0, 65535)
        assert not seq_newer(65535, 0)

    @pytest.mark.parametrize(
        "a,b,newer",
        [(2, 1, True), (1, 2, False), (5, 5, False), (100, 65500, True), (32768, 0, False)],
    )
    def test_seq_newer(self, a, b, newer):
        """Test serial number arithmetic."""
        assert seq_newer(a, b) is newer


class TestProcessOgm:
    """Test the feasibility condition and re-flooding."""

    def test_accept_and_forward(self):
        """Test a first advertisement installs a route and is re-flooded."""
        router = make_router(2)
        router.heard(3, None, 0)

        decision = router.process_ogm(3, OgmBody(7, 1, 2), 0)

        assert decision.accepted
        assert decision.forward == OgmBody(7, 1, 3)
        route = router.routes[7]
        assert (route.next_hop, route.metric, route.feasibility_distance) == (3, 3, 3)

    def test_own_ogm_ignored(self):
        """Test a node never processes its own originator messages."""
        router = make_router(2)

        assert not router.process_ogm(3, OgmBody(2, 1, 1), 0).accepted
        assert router.routes == {}

    def test_equal_metric_same_seq_rejected(self):
        """Test metric+1 equal to the feasibility distance is not feasible."""
        router = make_router(2)
        router.process_ogm(3, OgmBody(7, 1, 1), 0)

        decision = router.process_ogm(4, OgmBody(7, 1, 1), 0)

        assert not decision.accepted
        assert router.routes[7].next_hop == 3

    def test_better_metric_same_seq_accepted(self):
        """Test a strictly shorter path at the same seq replaces the route."""
        router = make_router(2)
        router.process_ogm(3, OgmBody(7, 1, 3), 0)

        assert router.process_ogm(4, OgmBody(7, 1, 1), 0).accepted
        assert router.routes[7].next_hop == 4
        assert router.routes[7].metric == 2

    def test_newer_seq_accepted_even_if_longer(self):
        """Test a newer sequence is always feasible."""
        router = make_router(2)
        router.process_ogm(3, OgmBody(7, 1, 0), 0)

        assert router.process_ogm(4, OgmBody(7, 2, 5), 10).accepted
        assert router.routes[7].metric == 6

    def test_older_seq_rejected(self):
        """Test an older sequence is never feasible."""
        router = make_router(2)
        router.process_ogm(3, OgmBody(7, 5, 4), 0)

        assert not router.process_ogm(4, OgmBody(7, 4, 0), 0).accepted

    def test_not_forwarded_at_max_ttl(self):
        """Test advertisements are not re-flooded once metric reaches max_ttl."""
        router = make_router(2, max_ttl=3)

        assert router.process_ogm(3, OgmBody(7, 1, 1), 0).forward == OgmBody(7, 1, 2)
        decision = router.process_ogm(4, OgmBody(8, 1, 2), 0)

        assert decision.accepted
        assert decision.forward is None

    def test_feasibility_survives_route_expiry(self):
        """Test an expired route cannot come back at the same seq with a worse metric."""
        router = make_router(2)
        router.heard(3, None, 0)
        router.process_ogm(3, OgmBody(7, 1, 0), 0)
        router.expire(10_000)
        assert 7 not in router.routes

        router.heard(4, None, 10_000)
        assert not router.process_ogm(4, OgmBody(7, 1, 3), 10_000).accepted
        assert router.process_ogm(4, OgmBody(7, 2, 3), 10_000).accepted

    def test_line_routes(self):
        """Test A learns C through B with metric 2 on the line A-B-C."""
        a, b, c = make_router(1), make_router(2), make_router(3)
        for _ in range(2):
            ogm = c.emit_ogm()
            b.heard(3, None, 0)
            relayed = b.process_ogm(3, ogm, 0).forward
            a.heard(2, None, 0)
            a.process_ogm(2, relayed, 0)

        assert (a.routes[3].next_hop, a.routes[3].metric) == (2, 2)
        assert a.routes[3].ogm_seq == 2


class TestNeighbors:
    """Test neighbor views and expiry."""

    def test_heard_merges_entries(self):
        """Test rotated tables accumulate entry by entry."""
        router = make_router(2)

        router.heard(3, [NextHopEntry(5, 2, 2)], 0)
        router.heard(3, [NextHopEntry(6, 4, 1)], 10)

        assert router.neighbors[3].their_next_hops == {5: 2, 6: 4}
        assert router.neighbors[3].last_heard_ms == 10

    def test_expire_neighbor_and_routes(self):
        """Test silent neighbors are dropped together with routes through them."""
        router = make_router(2)
        router.heard(3, None, 0)
        router.process_ogm(3, OgmBody(7, 1, 1), 0)

        router.expire(3000)
        assert 3 in router.neighbors
        router.expire(3001)

        assert router.neighbors == {}
        assert router.routes == {}

    def test_route_timeout(self):
        """Test routes not refreshed within route_timeout_ms are dropped."""
        router = make_router(2, route_timeout_ms=500)
        router.heard(3, None, 0)
        router.process_ogm(3, OgmBody(7, 1, 1), 0)
        router.heard(3, None, 400)

        router.expire(501)

        assert 3 in router.neighbors
        assert 7 not in router.routes

    def test_stale_advertised_entries_expire(self):
        """Test entries not re-advertised within the neighbor timeout are forgotten."""
        router = make_router(2)
        router.heard(3, [NextHopEntry(5, 2, 1)], 0)
        router.heard(3, [NextHopEntry(6, 2, 1)], 2500)

        router.expire(3500)

        assert router.neighbors[3].their_next_hops == {6: 2}


class TestChildrenForOrigin:
    """Test broadcast-tree inversion."""

    def test_line(self):
        """Test origin A on A-B-C: B has child C, C has none."""
        at_b = [NeighborView(1, {}), NeighborView(3, {1: 2})]
        at_c = [NeighborView(2, {1: 1})]

        assert children_for_origin(2, 1, at_b) == {3}
        assert children_for_origin(3, 1, at_c) == set()

    def test_star(self):
        """Test origin L1 through hub H: every other leaf is a child of H."""
        hub, leaves = 10, [1, 2, 3, 4]
        at_hub = [NeighborView(leaf, {o: hub for o in leaves if o != leaf}) for leaf in leaves]
        at_leaf = [NeighborView(hub, {leaf: leaf for leaf in leaves})]

        assert children_for_origin(hub, 1, at_hub) == {2, 3, 4}
        assert children_for_origin(2, 1, at_leaf) == set()

    def test_no_neighbors(self):
        """Test an isolated node has no children."""
        assert children_for_origin(1, 2, []) == set()

    def test_router_uses_live_neighbors_only(self):
        """Test dead neighbors do not count as children."""
        router = make_router(2)
        router.heard(3, [NextHopEntry(1, 2, 2)], 0)

        assert router.children_for_origin(1, 3000) == {3}
        assert router.children_for_origin(1, 3001) == set()


class TestSpanningTree:
    """Test spanning-tree membership."""

    def test_root(self):
        """Test the root has depth 0 and no parent."""
        router = make_router(1, root=1, spanning=True)

        tree = router.update_spanning_tree([], 0)

        assert tree.parent is None
        assert tree.depth == 0

    def test_line(self):
        """Test B and C on the line A(root)-B-C."""
        b = make_router(2, root=1, spanning=True)
        b.heard(3, [NextHopEntry(1, 2, 2)], 0)
        c = make_router(3, root=1, spanning=True)

        tree_b = b.update_spanning_tree([(1, 0), (3, 2)], 0)
        tree_c = c.update_spanning_tree([(2, 1)], 0)

        assert (tree_b.parent, tree_b.depth, tree_b.children) == (1, 1, frozenset({3}))
        assert (tree_c.parent, tree_c.depth) == (2, 2)
        assert tree_c.is_leaf

    def test_tie_goes_to_lowest_id(self):
        """Test equal-depth candidates resolve to the lowest id."""
        router = make_router(9, root=1, spanning=True)

        assert router.update_spanning_tree([(7, 2), (3, 2)], 0).parent == 3

    def test_orphaned(self):
        """Test a node without announcements is orphaned."""
        with pytest.raises(OrphanedError):
            make_router(4, root=1, spanning=True).update_spanning_tree([], 0)

    def test_refresh_from_root_ogms(self):
        """Test root OGMs build the tree and expiry orphans the node."""
        router = make_router(3, root=1, spanning=True)
        router.heard(2, None, 0)
        router.process_ogm(2, OgmBody(1, 1, 1), 0)

        tree = router.refresh_spanning_tree(0)
        assert (tree.parent, tree.depth) == (2, 2)

        router.expire(3001)
        assert router.refresh_spanning_tree(3001) is None
        assert router.spanning_tree is None

    def test_refresh_outside_spanning_mode(self):
        """Test nothing is computed in the other modes."""
        assert make_router(3).refresh_spanning_tree(0) is None

    def test_root_entry_advertises_tree_parent(self):
        """Test the advertised route to the root names the tree parent."""
        router = make_router(5, root=1, spanning=True)
        router.heard(3, None, 0)
        router.heard(4, None, 0)
        router.process_ogm(4, OgmBody(1, 1, 1), 0)
        router.process_ogm(3, OgmBody(3, 1, 0), 0)
        router.process_ogm(3, OgmBody(1, 1, 1), 0)
        router.refresh_spanning_tree(0)

        table = {e.destination: e for e in router.advertised_table()}

        assert table[1] == NextHopEntry(1, 3, 2)
        assert table[3] == NextHopEntry(3, 3, 1)


class TestNextHopEntries:
    """Test the per-frame next-hop table."""

    def _router_with_routes(self, count, **overrides):
        router = make_router(1, **overrides)
        for destination in range(2, 2 + count):
            router.heard(destination, None, 0)
            router.process_ogm(destination, OgmBody(destination, 1, 0), 0)
        return router

    def test_small_table_sent_whole(self):
        """Test tables within the cap are sent sorted by destination."""
        router = self._router_with_routes(3)

        entries = router.next_hop_entries()

        assert [e.destination for e in entries] == [2, 3, 4]
        assert all(e.hop_count == 1 for e in entries)

    def test_rotation_covers_every_entry(self):
        """Test oversized tables rotate round-robin."""
        router = self._router_with_routes(5, nht_max_entries=2)

        frames = [router.next_hop_entries() for _ in range(3)]

        assert all(len(f) == 2 for f in frames)
        assert {e.destination for f in frames for e in f} == {2, 3, 4, 5, 6}

    def test_limit_caps_entries(self):
        """Test an explicit size limit wins over the configured cap."""
        router = self._router_with_routes(5)

        assert len(router.next_hop_entries(limit=3)) == 3
        assert router.next_hop_entries(limit=0) == ()


class TestLoopCheck:
    """Test the route-chain walker."""

    def test_tree_is_loop_free(self):
        """Test consistent next hops pass."""
        check_loop_free({1: {3: 2}, 2: {3: 3}, 3: {}})

    def test_loop_detected(self):
        """Test a two-node loop is reported."""
        with pytest.raises(RoutingLoopError):
            check_loop_free({1: {3: 2}, 2: {3: 1}})

    def test_missing_hop_ends_chain(self):
        """Test a chain into a node without a route just stops."""
        check_loop_free({1: {3: 2}, 2: {}})


class TestSnapshot:
    """Test the routing snapshot."""

    def test_schema(self):
        """Test routes, neighbors and tree appear in the snapshot."""
        router = make_router(1, root=1, spanning=True)
        router.heard(2, None, 0)
        router.process_ogm(2, OgmBody(2, 4, 0), 0)

        snap = router.snapshot()

        assert snap["routes"] == {
            2: {"next_hop": 2, "metric": 1, "ogm_seq": 4, "feasibility_distance": 1}
        }
        assert snap["neighbors"] == [2]
        assert snap["spanning_tree"]["root"] == 1
