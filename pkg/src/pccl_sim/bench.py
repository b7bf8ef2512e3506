"""Scenario sweeps: per-collective benchmarks and end-to-end iteration runs."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

from .collectives import UnsupportedError, dex_schedule, make_schedule, split_rounds
from .cost_model import CostParams, schedule_cost
from .planner import PlannerInput, plan
from .report import Table
from .taskgraph import Backend, TaskGraph, bucket_dims, coschedule, simulate, tag_comm_nodes, transformer_graph
from .topology import KINDS, Topology, TopologyError, default_dims, make_topology

log = logging.getLogger(__name__)

BENCH_ALGOS = ("ring", "rhd", "bucket", "dex", "pccl")


class SpecError(ValueError):
    """Invalid scenario; ``field`` names the offending setting."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass
class ScenarioSpec:
    topologies: list = field(default_factory=lambda: ["ring", "torus2d", "torus3d", "grid2d", "grid3d"])
    n_ranks: int = 128
    algorithms: list = field(default_factory=lambda: ["ring", "rhd", "bucket", "pccl"])
    primitive: str = "reduce_scatter"
    buffers: list = field(default_factory=lambda: [2**20])
    reconf_delays: list = field(default_factory=lambda: [5e-6])
    params: CostParams = field(default_factory=CostParams)
    pccl_input: str = "rhd"
    dims: Optional[tuple] = None
    tx_per_gpu: int = 1
    rx_per_gpu: int = 1
    seed: int = 0

    def validate(self):
        if not self.topologies:
            raise SpecError("topologies", "sweep is empty")
        for k in self.topologies:
            if k not in KINDS or k in ("round_derived", "custom"):
                raise SpecError("topologies", f"unknown kind {k!r}")
        if self.n_ranks < 2:
            raise SpecError("n_ranks", "need at least 2 ranks")
        if not self.algorithms:
            raise SpecError("algorithms", "sweep is empty")
        for a in self.algorithms:
            if a not in BENCH_ALGOS:
                raise SpecError("algorithms", f"unknown algorithm {a!r}")
        if self.primitive not in ("reduce_scatter", "all_gather", "all_reduce", "all_to_all"):
            raise SpecError("primitive", f"unknown primitive {self.primitive!r}")
        if not self.buffers or any(b <= 0 for b in self.buffers):
            raise SpecError("buffers", "need a nonempty list of positive sizes")
        if not self.reconf_delays or any(r < 0 for r in self.reconf_delays):
            raise SpecError("reconf_delays", "need a nonempty list of non-negative delays")
        if self.pccl_input not in ("ring", "rhd", "bucket"):
            raise SpecError("pccl_input", f"unknown algorithm {self.pccl_input!r}")
        if self.tx_per_gpu < 1 or self.rx_per_gpu < 1:
            raise SpecError("tx_per_gpu", "port counts must be >= 1")
        return self


def topology_for(kind: str, n: int, dims=None) -> Topology:
    if kind == "ring":
        return make_topology("ring", [n])
    dims = tuple(dims) if dims is not None else default_dims(kind, n)
    if math.prod(dims) != n:
        raise SpecError("dims", f"{dims} does not multiply to {n}")
    try:
        return make_topology(kind, dims)
    except TopologyError as e:
        raise SpecError("dims", str(e)) from e


def _schedule(algo, prim, t, nbytes, spec):
    if prim == "all_to_all":
        if algo not in ("dex", "pccl"):
            raise UnsupportedError(f"{algo} has no all_to_all")
        s = dex_schedule(t.n, nbytes)
    else:
        if algo == "dex":
            raise UnsupportedError("dex only implements all_to_all")
        a = spec.pccl_input if algo == "pccl" else algo
        s = make_schedule(a, prim, t.n, nbytes, dims=bucket_dims(t))
    if (spec.tx_per_gpu, spec.rx_per_gpu) != (1, 1):
        s = split_rounds(s, spec.tx_per_gpu, spec.rx_per_gpu)
    return s


def _bench_cell(args):
    spec, kind, nbytes, r, algo = args
    t = topology_for(kind, spec.n_ranks, spec.dims if kind != "ring" else None)
    p = replace(spec.params, reconf_delay=r)
    try:
        s = _schedule(algo, spec.primitive, t, nbytes, spec)
    except UnsupportedError as e:
        log.warning("skipping %s on %s: %s", algo, kind, e)
        return None
    if algo == "pccl":
        pl = plan(PlannerInput(t, [], s, p))
        bd = pl.breakdown()
        total, a, b, rs, nrec = pl.total_time, bd["alpha_s"], bd["beta_s"], bd["reconf_s"], pl.n_reconfigs
    else:
        total, per = schedule_cost(t, s, p)
        a = sum(rc.alpha_term for rc in per)
        b = sum(rc.beta_term for rc in per)
        rs, nrec = 0.0, 0
    return dict(
        topology=kind, n_ranks=spec.n_ranks, algorithm=algo, primitive=spec.primitive,
        buffer_bytes=int(nbytes), reconf_delay_s=float(r), total_s=float(total),
        alpha_s=float(a), beta_s=float(b), reconf_s=float(rs), n_reconfigs=int(nrec),
    )


def run_benchmark(spec: ScenarioSpec, workers: int = 1) -> Table:
    """Cost every (topology, buffer, r, algorithm) cell.

    Baselines run on the fixed topology; ``pccl`` plans the chosen input
    schedule (DEX for all-to-all) starting from that topology.  Rows come
    out in sweep order whatever ``workers`` is.
    """
    spec.validate()
    cells = [
        (spec, kind, b, r, a)
        for kind in spec.topologies
        for b in spec.buffers
        for r in spec.reconf_delays
        for a in spec.algorithms
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_bench_cell, cells))
    else:
        rows = [_bench_cell(c) for c in cells]
    table = Table("benchmark")
    for row in rows:
        if row is not None:
            table.add(**row)
    return table


def run_endtoend(
    spec: ScenarioSpec,
    graph: Optional[TaskGraph] = None,
    rank_counts=(32, 64, 128),
    backends=("ring", "rhd", "bucket", "pccl"),
    epsilon: float = 0.0,
) -> Table:
    """Iteration throughput per (ranks, topology, r, backend).

    Without ``graph`` a transformer fixture is generated for each rank count.
    """
    spec.validate()
    table = Table("endtoend")
    for n in rank_counts:
        g = graph if graph is not None else transformer_graph(n)
        used = [r for node in g.nodes.values() if node.kind == "comm" for r in node.comm.ranks]
        used += [x for node in g.nodes.values() if node.kind == "comm" for p in node.comm.pattern for x in p[:2]]
        if used and max(used) >= n:
            raise SpecError("rank_counts", f"graph uses rank {max(used)} but only {n} ranks requested")
        g = coschedule(tag_comm_nodes(g), epsilon=epsilon)
        for kind in spec.topologies:
            t = topology_for(kind, n)
            for r in spec.reconf_delays:
                p = replace(spec.params, reconf_delay=r)
                for b in backends:
                    rep = simulate(g, Backend(b, t, p, spec.pccl_input))
                    table.add(
                        topology=kind, n_ranks=n, backend=b, reconf_delay_s=float(r),
                        makespan_s=float(rep.makespan), throughput_per_s=float(rep.throughput),
                        n_reconfigs=int(rep.n_reconfigs),
                    )
    return table
