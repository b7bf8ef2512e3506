import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pccl_sim import oracles
from pccl_sim.topology import (
    Topology,
    TopologyError,
    default_dims,
    make_topology,
    round_topology,
    shortest_path,
)

from strategies import generated_topologies, random_graphs, rounds_for


def test_ring4_edges():
    t = make_topology("ring", [4])
    assert t.n == 4
    assert t.edges == {(0, 1), (1, 2), (2, 3), (0, 3)}


def test_torus3d_444_has_192_edges_degree_6():
    t = make_topology("torus3d", [4, 4, 4])
    assert t.n == 64
    assert len(t.edges) == 192
    assert all(t.degree(u) == 6 for u in range(64))


def test_grid2d_2x2_deduplicated():
    t = make_topology("grid2d", [2, 2])
    assert t.edges == {(0, 1), (2, 3), (0, 2), (1, 3)}


def test_torus_with_size2_dim_deduplicates_wraparound():
    t = make_topology("torus2d", [2, 2])
    assert t.edges == make_topology("grid2d", [2, 2]).edges


@pytest.mark.parametrize(
    "kind,dims",
    [("ring", []), ("torus2d", [4]), ("torus3d", [4, 1, 4]), ("hypercube", [4]), ("grid2d", [0, 3])],
)
def test_make_topology_rejects_bad_parameters(kind, dims):
    with pytest.raises(TopologyError):
        make_topology(kind, dims)


def test_two_node_ring_is_a_single_link():
    t = make_topology("ring", [2])
    assert t.kind == "custom" and t.edges == {(0, 1)}


def test_round_topology_examples():
    assert round_topology({(0, 1), (2, 3)}, 4).edges == {(0, 1), (2, 3)}
    t = round_topology({(0, 4), (1, 5), (2, 6), (3, 7)}, 8)
    assert t.edges == {(0, 4), (1, 5), (2, 6), (3, 7)}
    assert all(t.degree(u) == 1 for u in range(8))
    rhd1 = [(r, r ^ 1) for r in range(8)]
    assert round_topology(rhd1, 8).edges == {(0, 1), (2, 3), (4, 5), (6, 7)}


def test_round_topology_merges_bidirectional_pairs():
    assert round_topology([(0, 1), (1, 0)], 2).edges == {(0, 1)}


def test_shortest_path_examples():
    ring8 = make_topology("ring", [8])
    assert shortest_path(ring8, 0, 4) == [0, 1, 2, 3, 4]
    assert shortest_path(ring8, 5, 5) == [5]
    assert shortest_path(round_topology({(0, 1)}, 4), 2, 3) is None


def test_shortest_path_rejects_unknown_policy():
    with pytest.raises(TopologyError):
        shortest_path(make_topology("ring", [4]), 0, 1, tie_break="random")


def test_invariants_rejected():
    with pytest.raises(TopologyError):
        Topology(3, frozenset({(1, 1)}))
    with pytest.raises(TopologyError):
        Topology(3, frozenset({(0, 3)}))
    with pytest.raises(TopologyError):
        Topology(4, frozenset({(0, 1)}), kind="torus2d", dims=(2, 3))
    with pytest.raises(TopologyError):
        Topology(4, frozenset({(0, 1), (1, 2), (2, 3)}), kind="ring", dims=(4,))


def test_json_roundtrip_and_validation():
    t = make_topology("torus2d", [3, 4])
    back = Topology.from_json(t.to_json())
    assert back == t and back.kind == "torus2d" and back.dims == (3, 4)
    with pytest.raises(TopologyError):
        Topology.from_dict({"n": 3, "kind": "custom", "edges": [[0, 1], [1, 0]]})
    with pytest.raises(TopologyError):
        Topology.from_dict({"n": 3, "kind": "custom", "edges": [[0, 1, 2]]})


def test_default_dims():
    assert default_dims("torus3d", 128) == (4, 4, 8)
    assert default_dims("torus2d", 128) == (8, 16)
    assert default_dims("torus3d", 64) == (4, 4, 4)


@given(generated_topologies())
def test_degree_bounds(t):
    nd = len(t.dims)
    for u in range(t.n):
        if t.kind.startswith("torus") or t.kind == "ring":
            if all(d >= 3 for d in t.dims):
                assert t.degree(u) == 2 * nd
            assert t.degree(u) <= 2 * nd
        else:
            assert nd <= t.degree(u) <= 2 * nd


@settings(max_examples=60, deadline=None)
@given(st.one_of(generated_topologies(), random_graphs(max_n=16)))
def test_shortest_path_matches_all_pairs_oracle(t):
    dist = oracles.all_pairs_distances(t.n, t.edges)
    for s in range(t.n):
        for d in range(t.n):
            p = shortest_path(t, s, d)
            if dist[s][d] is None:
                assert p is None
            else:
                assert len(p) - 1 == dist[s][d]
                assert all(t.has_edge(a, b) for a, b in zip(p, p[1:]))


@settings(max_examples=40, deadline=None)
@given(random_graphs(max_n=9))
def test_shortest_path_is_lexicographic_minimum(t):
    for s in range(t.n):
        for d in range(t.n):
            assert shortest_path(t, s, d) == oracles.lexmin_shortest_path(t.n, t.edges, s, d)


@given(st.data())
def test_round_topology_idempotent_and_order_insensitive(data):
    n = data.draw(st.integers(2, 10))
    rd = data.draw(rounds_for(n))
    a = round_topology(rd, n)
    b = round_topology(list(reversed(rd)), n)
    c = round_topology(list(a.edges), n)
    assert a == b == c
