"""Acceptance checks, one test per criterion.

Each test records a one-line verdict that the terminal summary prints
under "acceptance criteria", then asserts it.
"""

import itertools
import math
import random
import time

import pytest

from conftest import ACCEPTANCE_LINES
from pccl_sim import oracles
from pccl_sim.bench import ScenarioSpec, run_benchmark, run_endtoend, topology_for
from pccl_sim.collectives import Schedule, bucket_schedule, dex_schedule, rhd_schedule, ring_schedule
from pccl_sim.cost_model import CostParams, ideal_cost, round_cost, schedule_cost
from pccl_sim.fiber_planner import ServerGraph, plan_fibers, random_requests, verify_plan
from pccl_sim.mesh_router import MeshGraph, random_requests as mesh_requests, route_all, validate_routes
from pccl_sim.planner import PlannerInput, brute_force_plan, plan
from pccl_sim.topology import Topology, make_topology

MB = 2**20
GB = 2**30
US = 1e-6
P = CostParams()
KINDS = ["ring", "torus2d", "torus3d", "grid2d", "grid3d"]
R_SWEEP = [5 * US, 10 * US, 25 * US, 50 * US, 500 * US, 1000 * US]


def record(k, ok, detail):
    ACCEPTANCE_LINES[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def _graph(rng, n, connected):
    edges = {(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.25}
    if connected:
        perm = list(range(n))
        rng.shuffle(perm)
        edges |= {(min(a, b), max(a, b)) for a, b in zip(perm, perm[1:])}
    return Topology(n, frozenset(edges))


def _planner_instance(rng):
    n = rng.randint(2, 16)
    pairs = [(s, d) for s in range(n) for d in range(n) if s != d]
    rounds = [rng.sample(pairs, rng.randint(1, min(n, len(pairs)))) for _ in range(rng.randint(1, 6))]
    sizes = [rng.choice([1e3, 1e6, 64e6, 1e9]) for _ in rounds]
    s = Schedule(n, "all_gather", "custom", rounds, sizes)
    g0 = _graph(rng, n, connected=rng.random() < 0.7)
    std = [_graph(rng, n, connected=True) for _ in range(rng.randint(0, 2))]
    r = rng.choice([0.0, P.alpha, 10 * P.alpha, 1000 * P.alpha])
    return PlannerInput(g0, std, s, P.with_reconf(r))


def test_planner_exactness():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    mismatches = []
    for i in range(200):
        inp = _planner_instance(rng)
        a, b = plan(inp), brute_force_plan(inp)
        if a.total_time != b.total_time:
            mismatches.append(i)
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 60
    record(1, ok, f"200 instances, {len(mismatches)} mismatches, {elapsed:.1f}s (limit 60s)")
    assert ok


def _rhd_reconfigs(r, nbytes):
    s = rhd_schedule(128, "reduce_scatter", nbytes)
    return plan(PlannerInput(make_topology("ring", [128]), [], s, P.with_reconf(r))).n_reconfigs


def test_reconfiguration_counts():
    fast = _rhd_reconfigs(5 * US, 256 * MB)
    slow = _rhd_reconfigs(1000 * US, GB)
    sweeps = {b: [_rhd_reconfigs(r, b) for r in R_SWEEP] for b in (256 * MB, GB)}
    monotone = all(all(x >= y for x, y in zip(c, c[1:])) for c in sweeps.values())
    ok = fast == 7 and abs(slow - 4) <= 1 and monotone
    record(2, ok, f"r=5us/256MB -> {fast} (want 7), r=1ms/1GB -> {slow} (want 4+-1), sweeps {sweeps[256 * MB]} / {sweeps[GB]}")
    assert ok


def test_pccl_never_loses_to_a_baseline():
    spec = ScenarioSpec(
        topologies=KINDS, n_ranks=128, algorithms=["ring", "rhd", "bucket", "pccl"],
        buffers=[32 * MB, 256 * MB, GB], reconf_delays=[5 * US],
    )
    cells = {}
    for row in run_benchmark(spec).records():
        cells.setdefault((row["topology"], row["buffer_bytes"]), {})[row["algorithm"]] = row["total_s"]
    losses = []
    for (kind, b), c in cells.items():
        best = min(c["ring"], c["rhd"], c["bucket"])
        if c["pccl"] > best:
            losses.append(f"{kind}/{b // MB}MB {c['pccl'] * 1e6:.1f}us > {best * 1e6:.1f}us")
    ok = not losses
    record(3, ok, f"{len(cells) - len(losses)}/{len(cells)} cells; losses: {'; '.join(losses) or 'none'}")
    assert ok


def _ideal_fit_cases():
    for b in (32 * MB, 256 * MB, GB):
        yield "ring", make_topology("ring", [128]), ring_schedule(128, "reduce_scatter", b)
        for kind in ("torus2d", "torus3d"):
            t = topology_for(kind, 128)
            yield kind, t, bucket_schedule(t.dims, "reduce_scatter", b)


def test_ideal_fit_has_no_overhead():
    bad = []
    for name, t, s in _ideal_fit_cases():
        _, per = schedule_cost(t, s, P)
        if any((rc.congestion, rc.dilation) != (1, 1) for rc in per):
            bad.append(f"{name}: contention")
        pl = plan(PlannerInput(t, [], s, P))
        if pl.total_time > ideal_cost(s, P) + len(s) * P.reconf_delay:
            bad.append(f"{name}: pccl over ideal+rounds*r")
    ok = not bad
    record(4, ok, "ring on ring, bucket on torus2d/torus3d at 32MB/256MB/1GB: " + ("; ".join(bad) or "all rounds c=1 d=1, pccl within bound"))
    assert ok


def test_all_to_all_speedup():
    t = make_topology("torus3d", [4, 4, 4])
    speedups = {}
    for b in (MB, 4 * MB, 16 * MB, 32 * MB):
        s = dex_schedule(64, b)
        base = schedule_cost(t, s, P)[0]
        speedups[b // MB] = base / plan(PlannerInput(t, [], s, P)).total_time
    ok = any(5 <= x <= 10 for x in speedups.values())
    shown = ", ".join(f"{k}MB {v:.2f}x" for k, v in speedups.items())
    record(5, ok, f"DEX/pccl on 4x4x4 torus: {shown} (want one in [5, 10])")
    assert ok


def test_fiber_planner_reproduction():
    g = ServerGraph.grid(8, 8)
    means, slowest, all_valid = {}, 0.0, True
    for count in (100, 512):
        zs = []
        for seed in range(10):
            reqs = random_requests(64, count, seed)
            t0 = time.perf_counter()
            p = plan_fibers(g, reqs, seed=seed)
            slowest = max(slowest, time.perf_counter() - t0)
            all_valid &= verify_plan(g, reqs, p)
            zs.append(p.z)
        means[count] = sum(zs) / len(zs)
    ok = 6 <= means[100] <= 9 and 26 <= means[512] <= 37 and all_valid and slowest < 10
    record(6, ok, f"mean z {means[100]:.1f} (100 req, want 6-9), {means[512]:.1f} (512 req, want 26-37), valid={all_valid}, slowest {slowest:.2f}s")
    assert ok


def test_mesh_router_routes_most_requests():
    fractions, slowest, all_valid = [], 0.0, True
    for seed in range(5):
        g = MeshGraph(64, 64)
        reqs = mesh_requests(64, 64, 128, seed=seed)
        t0 = time.perf_counter()
        routes, _ = route_all(g, reqs)
        slowest = max(slowest, time.perf_counter() - t0)
        all_valid &= validate_routes(MeshGraph(64, 64), routes)
        fractions.append(sum(r.valid for r in routes) / len(routes))
    ok = min(fractions) >= 0.95 and all_valid and slowest < 10
    shown = ", ".join(f"{f:.2f}" for f in fractions)
    record(7, ok, f"64x64 mesh, 128 requests, 5 seeds: routed {shown} (want >= 0.95), valid={all_valid}, slowest {slowest:.2f}s")
    assert ok


def _all_schedules():
    for k in range(1, 7):
        n = 2**k
        for prim in ("reduce_scatter", "all_gather", "all_reduce"):
            yield ring_schedule(n, prim, n * MB)
            yield rhd_schedule(n, prim, n * MB)
        yield dex_schedule(n, n * MB)
    for ndim in (1, 2, 3):
        for dims in itertools.product((2, 3, 4), repeat=ndim):
            for prim in ("reduce_scatter", "all_gather", "all_reduce"):
                yield bucket_schedule(dims, prim, math.prod(dims) * MB)


def test_every_schedule_meets_its_postcondition():
    failures, total = [], 0
    for s in _all_schedules():
        total += 1
        try:
            state = oracles.interpret_schedule(s.n_ranks, s.primitive, s.rounds, s.payloads)
            good = oracles.postcondition_holds(s.n_ranks, s.primitive, state)
        except oracles.InterpreterFault:
            good = False
        if not good:
            failures.append(f"{s.algorithm}/{s.primitive}/n={s.n_ranks}")
    ok = not failures
    record(8, ok, f"{total - len(failures)}/{total} schedules replay correctly; failures: {', '.join(failures) or 'none'}")
    assert ok


def test_end_to_end_ordering():
    spec = ScenarioSpec(topologies=KINDS, reconf_delays=[5 * US])
    cells = {}
    for row in run_endtoend(spec).records():
        cells.setdefault((row["n_ranks"], row["topology"]), {})[row["backend"]] = row["throughput_per_s"]
    bad = []
    for (n, kind), c in sorted(cells.items()):
        best = max(c["ring"], c["rhd"], c["bucket"])
        strict = kind in ("grid2d", "grid3d")
        if c["pccl"] < best or (strict and c["pccl"] <= best):
            bad.append(f"{kind}@{n} pccl {c['pccl']:.1f} vs best {best:.1f}/s")
    ok = not bad
    record(9, ok, f"{len(cells) - len(bad)}/{len(cells)} cells ordered; violations: {'; '.join(bad) or 'none'}")
    assert ok


def test_round_cost_matches_oracle():
    rng = random.Random(7)
    mismatches = 0
    for i in range(1000):
        kind = KINDS[i % len(KINDS)]
        ndim = {"ring": 1, "torus2d": 2, "grid2d": 2, "torus3d": 3, "grid3d": 3}[kind]
        while True:
            dims = [rng.randint(3 if kind == "ring" else 2, 32 if ndim == 1 else 5) for _ in range(ndim)]
            if math.prod(dims) <= 32:
                break
        t = make_topology(kind, dims)
        pairs = [(s, d) for s in range(t.n) for d in range(t.n) if s != d]
        transfers = rng.sample(pairs, rng.randint(1, min(16, len(pairs))))
        w = rng.choice([1.0, 1e6, 256e6])
        directed = i % 2 == 0
        p = CostParams(directed_edge_capacity=directed)
        got = round_cost(t, transfers, w, p)
        want = oracles.round_cost_oracle(t.n, t.edges, transfers, w, p.alpha, p.beta, p.disconnect_penalty, directed)
        if (got.dilation, got.congestion) != want[:2] or got.time != pytest.approx(want[2], rel=1e-12):
            mismatches += 1
    ok = mismatches == 0
    record(10, ok, f"1000 random rounds on n <= 32 topologies, {mismatches} mismatches")
    assert ok
