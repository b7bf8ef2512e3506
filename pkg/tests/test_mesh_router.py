import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pccl_sim.mesh_router import (
    MeshGraph,
    RouteRequest,
    RouteResult,
    random_requests,
    requests_from_json,
    route_all,
    routes_to_dict,
    validate_routes,
)


def _manhattan(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _dumbbell():
    """Two 3x3 blocks joined only through the waveguide (2,1)-(3,1)."""
    removed = [((2, y), (3, y)) for y in (0, 2)]
    return MeshGraph(6, 3, removed=removed)


def test_single_pair_is_manhattan_shortest():
    g = MeshGraph(8, 8)
    routes, counts = route_all(g, [RouteRequest((0, 0), (5, 3))])
    path = routes[0].path
    assert len(path) - 1 == _manhattan((0, 0), (5, 3))
    assert all(c <= 1 for c in counts.values())


def test_disjoint_corner_pairs_both_shortest():
    g = MeshGraph(8, 8)
    reqs = [RouteRequest((0, 0), (1, 1)), RouteRequest((7, 7), (6, 6))]
    routes, _ = route_all(g, reqs)
    for r in routes:
        assert r.valid and len(r.path) - 1 == 2


def test_width_one_cut_blocks_second_request():
    g = _dumbbell()
    reqs = [RouteRequest((0, 0), (5, 0)), RouteRequest((0, 2), (5, 2))]
    routes, _ = route_all(g, reqs, max_overlap=1)
    assert routes[0].valid
    assert not routes[1].valid
    # every left-right path must use the bridge, so no valid route existed
    bridge = g.edge_index[(g.node_id((2, 1)), g.node_id((3, 1)))]
    assert bridge in g.path_edges(routes[0].path)
    assert validate_routes(g, routes)


def test_width_one_cut_with_two_wavelengths():
    g = _dumbbell()
    reqs = [RouteRequest((0, 0), (5, 0), 0), RouteRequest((0, 2), (5, 2), 1)]
    routes, _ = route_all(g, reqs)
    assert all(r.valid for r in routes)


def test_overlap_two_allows_shared_bridge():
    g = _dumbbell()
    reqs = [RouteRequest((0, 0), (5, 0)), RouteRequest((0, 2), (5, 2))]
    routes, _ = route_all(g, reqs, max_overlap=2)
    assert all(r.valid for r in routes)
    assert validate_routes(g, routes, max_overlap=2)


def test_off_grid_endpoint():
    with pytest.raises(ValueError):
        route_all(MeshGraph(4, 4), [RouteRequest((0, 0), (4, 0))])


def test_parameter_checks():
    g = MeshGraph(4, 4)
    with pytest.raises(ValueError):
        route_all(g, [], trials=0)
    with pytest.raises(ValueError):
        route_all(g, [], penalize_factor=1.0)
    with pytest.raises(ValueError):
        route_all(g, [], max_overlap=0)


def test_validator_cases():
    g = MeshGraph(4, 4)
    assert validate_routes(g, [])
    req = RouteRequest((0, 0), (2, 0))
    dup = [RouteResult(req, [(0, 0), (1, 0), (2, 0)])] * 2
    assert not validate_routes(g, dup, max_overlap=1)
    assert not validate_routes(g, [RouteResult(req, [(0, 0), (2, 0)])])
    assert not validate_routes(g, [RouteResult(req, [(0, 0), (1, 0)])])


def test_deterministic():
    reqs = random_requests(16, 16, 40, seed=3)
    a, _ = route_all(MeshGraph(16, 16), reqs)
    b, _ = route_all(MeshGraph(16, 16), reqs)
    assert [r.path for r in a] == [r.path for r in b]


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(1, 30), st.integers(0, 1000), st.integers(1, 3))
def test_route_all_output_always_valid(w, h, count, seed, overlap):
    g = MeshGraph(w, h)
    reqs = random_requests(w, h, count, seed=seed, wavelengths=2)
    routes, counts = route_all(g, reqs, max_overlap=overlap)
    assert validate_routes(g, routes, max_overlap=overlap)
    assert all(c <= overlap for c in counts.values())
    assert (g.weights >= 0).all()


def test_json_io():
    doc = {"mesh": [4, 4], "requests": [{"src": [0, 0], "dst": [3, 3], "wavelength": 1}]}
    mesh, reqs = requests_from_json(json.dumps(doc))
    assert mesh == (4, 4) and reqs == [RouteRequest((0, 0), (3, 3), 1)]
    routes, _ = route_all(MeshGraph(4, 4), reqs)
    out = routes_to_dict(routes)
    assert out["unrouted"] == 0 and out["routes"][0]["path"][0] == [0, 0]
