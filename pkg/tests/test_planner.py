import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pccl_sim import oracles
from pccl_sim.collectives import Schedule, rhd_schedule, ring_schedule
from pccl_sim.cost_model import CostParams, ideal_cost, schedule_cost
from pccl_sim.planner import (
    InstanceTooLarge,
    PlannerError,
    PlannerInput,
    brute_force_plan,
    plan,
    reconf_indicator,
    validate_plan,
)
from pccl_sim.topology import Topology, make_topology, round_topology

from strategies import random_graphs

P = CostParams()
MB = 2**20


def _random_instance(rng, max_n=8, max_rounds=4, max_std=2):
    n = rng.randint(2, max_n)
    pairs = [(s, d) for s in range(n) for d in range(n) if s != d]
    rounds = [rng.sample(pairs, rng.randint(1, min(4, len(pairs)))) for _ in range(rng.randint(1, max_rounds))]
    sizes = [rng.choice([1e3, 1e6, 64e6]) for _ in rounds]
    s = Schedule(n, "all_gather", "custom", rounds, sizes)
    g0 = _random_graph(rng, n, connected=rng.random() < 0.7)
    std = [_random_graph(rng, n, connected=True) for _ in range(rng.randint(0, max_std))]
    r = rng.choice([0.0, P.alpha, 10 * P.alpha, 1000 * P.alpha])
    return PlannerInput(g0, std, s, P.with_reconf(r))


def _random_graph(rng, n, connected):
    edges = {(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.3}
    if connected:
        perm = list(range(n))
        rng.shuffle(perm)
        edges |= {(min(a, b), max(a, b)) for a, b in zip(perm, perm[1:])}
    return Topology(n, frozenset(edges))


def test_zero_reconf_matches_ideal():
    s = rhd_schedule(8, "reduce_scatter", 8 * MB)
    pl = plan(PlannerInput(make_topology("ring", [8]), [], s, P.with_reconf(0.0)))
    assert pl.total_time == pytest.approx(sum(P.alpha + P.beta * 8 * MB / 2**k for k in (1, 2, 3)), rel=1e-15)
    assert pl.total_time == pytest.approx(ideal_cost(s, P), rel=1e-15)


def test_rhd_128_reconfigures_every_round():
    s = rhd_schedule(128, "reduce_scatter", 256 * MB)
    pl = plan(PlannerInput(make_topology("ring", [128]), [], s, P))
    assert pl.n_reconfigs == 7


def test_single_round_already_on_g0():
    s = Schedule(4, "all_gather", "custom", [[(0, 1), (2, 3)]], [1000.0])
    pl = plan(PlannerInput(make_topology("ring", [4]), [], s, P))
    assert pl.n_reconfigs == 0
    assert pl.total_time == P.alpha + P.beta * 1000


def test_huge_reconf_never_switches():
    s = Schedule(4, "all_gather", "custom", [[(0, 2)], [(1, 3)]], [1e6, 1e6])
    inp = PlannerInput(make_topology("ring", [4]), [], s, P.with_reconf(1.0))
    for pl in (plan(inp), brute_force_plan(inp)):
        assert pl.n_reconfigs == 0


def test_disconnected_g0_reconfigures_once():
    s = Schedule(4, "all_gather", "custom", [[(0, 1)]], [1e3])
    inp = PlannerInput(round_topology({(2, 3)}, 4), [], s, P)
    for pl in (plan(inp), brute_force_plan(inp)):
        assert pl.n_reconfigs == 1 and pl.reconfig_rounds == [0]


def test_reconf_indicator():
    ring = make_topology("ring", [4])
    grid = make_topology("grid2d", [2, 2])
    derived = round_topology({(0, 2)}, 4)
    cands = [ring, grid, derived]
    assert reconf_indicator(cands, 0, 0, 5.0) == 0
    assert reconf_indicator(cands, 0, 1, 5.0) == 5.0
    assert reconf_indicator(cands, 1, 2, 5.0) == 5.0
    # equal graphs under different indices do not reconfigure
    assert reconf_indicator([ring, make_topology("ring", [4])], 0, 1, 5.0) == 0


def test_input_validation():
    s = ring_schedule(4, "reduce_scatter", 8)
    with pytest.raises(PlannerError):
        PlannerInput(make_topology("ring", [8]), [], s, P)
    with pytest.raises(PlannerError):
        PlannerInput(make_topology("ring", [4]), [round_topology({(0, 1)}, 4)], s, P)


def test_penalty_must_dominate():
    s = ring_schedule(4, "reduce_scatter", 8)
    with pytest.raises(PlannerError):
        plan(PlannerInput(make_topology("ring", [4]), [], s, CostParams(disconnect_penalty=1e-9)))


def test_brute_force_size_limit():
    s = ring_schedule(16, "reduce_scatter", 16)
    with pytest.raises(InstanceTooLarge):
        brute_force_plan(PlannerInput(make_topology("ring", [16]), [], s, P))


def test_plan_json_shape():
    s = rhd_schedule(8, "reduce_scatter", MB)
    doc = plan(PlannerInput(make_topology("ring", [8]), [], s, P)).to_dict()
    assert set(doc) == {"choices", "reconfig_rounds", "total_s", "per_round"}
    assert set(doc["per_round"][0]) == {"dilation", "congestion", "comm_s", "reconf_s"}


def test_dp_matches_brute_force_randomized():
    rng = random.Random(7)
    for _ in range(60):
        inp = _random_instance(rng)
        a, b = plan(inp), brute_force_plan(inp)
        assert a.total_time == b.total_time
        assert validate_plan(inp, a)


def test_dp_matches_independent_enumeration():
    rng = random.Random(11)
    for _ in range(25):
        inp = _random_instance(rng, max_n=6, max_rounds=3, max_std=1)
        p = inp.params
        s = inp.schedule
        want = oracles.plan_oracle(
            s.n_ranks, inp.g0.edges, [t.edges for t in inp.standard_set], s.rounds, s.sizes,
            p.alpha, p.beta, p.reconf_delay, p.disconnect_penalty, p.directed_edge_capacity,
        )
        assert plan(inp).total_time == pytest.approx(want, rel=1e-12)


def test_monotone_in_reconf_delay():
    s = rhd_schedule(64, "reduce_scatter", 64 * MB)
    g0 = make_topology("grid2d", [8, 8])
    counts = [plan(PlannerInput(g0, [], s, P.with_reconf(r))).n_reconfigs for r in (5e-6, 1e-5, 2.5e-5, 5e-5, 5e-4, 1e-3)]
    assert counts == sorted(counts, reverse=True)


@settings(max_examples=40, deadline=None)
@given(random_graphs(min_n=2, max_n=8), st.integers(0, 2**32 - 1))
def test_plan_upper_bounds(g0, seed):
    rng = random.Random(seed)
    n = g0.n
    pairs = [(s, d) for s in range(n) for d in range(n) if s != d]
    rounds = [rng.sample(pairs, rng.randint(1, min(3, len(pairs)))) for _ in range(rng.randint(1, 4))]
    s = Schedule(n, "all_gather", "custom", rounds, [1e6] * len(rounds))
    inp = PlannerInput(g0, [], s, P)
    pl = plan(inp)
    assert pl.total_time <= schedule_cost(g0, s, P)[0]
    assert pl.total_time <= ideal_cost(s, P) + len(s) * P.reconf_delay + 1e-15
    assert validate_plan(inp, pl)


def test_validator_rejects_dependency_violation():
    s = Schedule(4, "all_gather", "custom", [[(0, 2)], [(1, 3)]], [1e6, 1e6])
    inp = PlannerInput(make_topology("ring", [4]), [], s, P)
    pl = plan(inp)
    bad = type(pl)((0, inp.first_derived), pl.per_round, pl.total_time, pl.n_reconfigs, pl.topologies)
    assert not validate_plan(inp, bad)
