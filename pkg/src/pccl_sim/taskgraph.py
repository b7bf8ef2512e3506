"""Training-iteration task graphs: compute and communication nodes replayed
with communication durations taken from the cost model or the planner.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .collectives import dex_schedule, make_schedule
from .cost_model import CostParams, round_cost, schedule_cost
from .planner import PlannerInput, plan
from .topology import Topology

log = logging.getLogger(__name__)

COMM_LABELS = ("l_to_l", "all_reduce", "all_to_all", "reduce_scatter", "all_gather")
BASELINES = ("ring", "rhd", "bucket")
MB = 2**20


class TaskGraphError(ValueError):
    """Malformed or cyclic task graph."""


@dataclass
class CommSpec:
    """A communication node's payload.

    ``primitive`` is ``None`` until tagged.  ``pattern`` lists raw
    ``(src, dst, bytes, reduce)`` transfers; ``bytes`` is the per-rank
    buffer of a collective or the transfer size of an L-to-L node.
    """

    primitive: Optional[str] = None
    bytes: float = 0.0
    ranks: tuple = ()
    pattern: tuple = ()

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        self.pattern = tuple(tuple(p) for p in self.pattern)
        if not self.ranks and self.pattern:
            self.ranks = tuple(sorted({r for p in self.pattern for r in p[:2]}))

    def to_dict(self) -> dict:
        out = {"bytes": self.bytes, "ranks": list(self.ranks)}
        if self.primitive is not None:
            out["primitive"] = self.primitive
        if self.pattern:
            out["pattern"] = [list(p) for p in self.pattern]
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "CommSpec":
        pattern = tuple(
            (int(p[0]), int(p[1]), float(p[2]) if len(p) > 2 else 0.0, bool(p[3]) if len(p) > 3 else False)
            for p in doc.get("pattern", ())
        )
        return cls(doc.get("primitive"), float(doc.get("bytes", 0.0)), tuple(doc.get("ranks", ())), pattern)


@dataclass
class TaskNode:
    id: str
    kind: str
    duration_s: float = 0.0
    comm: Optional[CommSpec] = None
    layer: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("compute", "comm"):
            raise TaskGraphError(f"node {self.id}: unknown kind {self.kind!r}")
        if self.duration_s < 0:
            raise TaskGraphError(f"node {self.id}: negative duration")
        if self.kind == "comm":
            if self.comm is None or (not self.comm.ranks and not self.comm.pattern):
                raise TaskGraphError(f"node {self.id}: comm node needs participants")


@dataclass
class TaskGraph:
    nodes: dict
    edges: list
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.edges = sorted({(str(a), str(b)) for a, b in self.edges})
        for a, b in self.edges:
            if a not in self.nodes or b not in self.nodes:
                raise TaskGraphError(f"edge ({a}, {b}) names an unknown node")

    def preds(self) -> dict:
        out = {k: [] for k in self.nodes}
        for a, b in self.edges:
            out[b].append(a)
        return out

    def succs(self) -> dict:
        out = {k: [] for k in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return out

    def topo_order(self) -> list:
        """Kahn order with ties broken by node id; raises on a cycle."""
        indeg = {k: 0 for k in self.nodes}
        for _, b in self.edges:
            indeg[b] += 1
        succ = self.succs()
        ready = [k for k, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            u = heapq.heappop(ready)
            order.append(u)
            for v in succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(ready, v)
        if len(order) != len(self.nodes):
            raise TaskGraphError("task graph has a cycle")
        return order

    def reaches(self, src: str, dst: str) -> bool:
        succ = self.succs()
        stack, seen = [src], {src}
        while stack:
            u = stack.pop()
            if u == dst:
                return True
            for v in succ[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def to_dict(self) -> dict:
        nodes = []
        for n in self.nodes.values():
            d = {"id": n.id, "kind": n.kind}
            if n.kind == "compute":
                d["duration_s"] = n.duration_s
            else:
                d["comm"] = n.comm.to_dict()
            if n.layer is not None:
                d["layer"] = n.layer
            nodes.append(d)
        return {"nodes": nodes, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskGraph":
        nodes = {}
        for i, d in enumerate(doc["nodes"]):
            try:
                comm = CommSpec.from_dict(d["comm"]) if d.get("comm") is not None else None
                node = TaskNode(str(d["id"]), d["kind"], float(d.get("duration_s", 0.0)), comm, d.get("layer"))
            except (KeyError, TypeError, ValueError) as e:
                raise TaskGraphError(f"nodes[{i}]: {e}") from e
            if node.id in nodes:
                raise TaskGraphError(f"nodes[{i}]: duplicate id {node.id!r}")
            nodes[node.id] = node
        return cls(nodes, [tuple(e) for e in doc.get("edges", [])])

    @classmethod
    def from_json(cls, text: str) -> "TaskGraph":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# -- tagging --------------------------------------------------------------------

def classify_pattern(pattern: Sequence[tuple]) -> str:
    """Label a raw transfer pattern.

    Every participant sending the same reduction-flagged volume to at least one
    peer and receiving from at least one is an all-reduce; every ordered pair
    of participants with equal sizes is an all-to-all; anything else is L-to-L.
    """
    if not pattern:
        return "l_to_l"
    pairs = {(s, d) for s, d, *_ in pattern}
    ranks = {r for p in pairs for r in p}
    if len(pairs) != len(pattern) or len(ranks) < 2:
        return "l_to_l"
    sizes = {p[2] if len(p) > 2 else 0.0 for p in pattern}
    reduce = [bool(p[3]) if len(p) > 3 else False for p in pattern]
    if all(reduce) and len(ranks) > 2:
        sent = {r: 0.0 for r in ranks}
        recv = {r: 0 for r in ranks}
        for s, d, w, *_ in pattern:
            sent[s] += w
            recv[d] += 1
        if len(set(sent.values())) == 1 and all(recv.values()):
            return "all_reduce"
    if not any(reduce) and len(ranks) > 2 and len(sizes) == 1:
        if pairs == {(a, b) for a in ranks for b in ranks if a != b}:
            return "all_to_all"
    return "l_to_l"


def tag_comm_nodes(g: TaskGraph) -> TaskGraph:
    """Label every untagged comm node from its raw pattern."""
    nodes = {}
    for k, n in g.nodes.items():
        if n.kind == "comm" and n.comm.primitive is None:
            label = classify_pattern(n.comm.pattern)
            b = n.comm.bytes
            if not b and n.comm.pattern:
                if label == "l_to_l":
                    b = max(p[2] for p in n.comm.pattern)
                else:
                    src = n.comm.pattern[0][0]
                    b = sum(p[2] for p in n.comm.pattern if p[0] == src)
            n = TaskNode(n.id, n.kind, n.duration_s, CommSpec(label, b, n.comm.ranks, n.comm.pattern), n.layer)
        nodes[k] = n
    return TaskGraph(nodes, list(g.edges), list(g.warnings))


# -- co-scheduling --------------------------------------------------------------

def ready_times(g: TaskGraph, durations: Optional[dict] = None) -> dict:
    """Earliest start of each node; comm nodes default to zero duration."""
    dur = durations or {}
    preds = g.preds()
    start, finish = {}, {}
    for u in g.topo_order():
        start[u] = max((finish[p] for p in preds[u]), default=0.0)
        finish[u] = start[u] + dur.get(u, g.nodes[u].duration_s)
    return start


def coschedule(g: TaskGraph, epsilon: float = 0.0, durations: Optional[dict] = None) -> TaskGraph:
    """Serialize L-to-L transfers ahead of all-reduces that become ready together.

    Two comm nodes pair up when their layers match (or both are unset) and
    their earliest starts differ by at most ``epsilon``.  An edge that would
    close a cycle is skipped and noted in ``warnings``.
    """
    start = ready_times(g, durations)
    out = TaskGraph(dict(g.nodes), list(g.edges), list(g.warnings))
    comm = [n for n in g.nodes.values() if n.kind == "comm"]
    l2l = [n for n in comm if n.comm.primitive == "l_to_l"]
    ars = [n for n in comm if n.comm.primitive == "all_reduce"]
    for a in l2l:
        for b in ars:
            if a.layer != b.layer or abs(start[a.id] - start[b.id]) > epsilon:
                continue
            if (a.id, b.id) in set(out.edges):
                continue
            if out.reaches(b.id, a.id):
                msg = f"skipped {a.id} -> {b.id}: would create a cycle"
                log.warning(msg)
                out.warnings.append(msg)
                continue
            out = TaskGraph(out.nodes, out.edges + [(a.id, b.id)], out.warnings)
    return out


# -- communication valuation ----------------------------------------------------

def bucket_dims(t: Topology) -> tuple:
    """Dims for the bucket baseline: the topology's own grid shape, else a 1D ring."""
    if t.dims and math.prod(t.dims) == t.n and all(d >= 2 for d in t.dims):
        return tuple(t.dims)
    return (t.n,)


def _relabel(s, ranks, n):
    from .collectives import Schedule

    if tuple(ranks) == tuple(range(n)):
        return s
    rounds = [[(ranks[a], ranks[b]) for a, b in r] for r in s.rounds]
    return Schedule(n, s.primitive, s.algorithm, rounds, s.sizes)


@dataclass
class CommValue:
    duration_s: float
    algorithm: str
    n_reconfigs: int = 0
    n_rounds: int = 0


class Backend:
    """Values comm nodes.  ``name`` is ``"pccl"`` or a baseline algorithm
    (``ring``, ``rhd``, ``bucket``) run on the fixed topology ``t0``.

    All-reduce is valued as twice the reduce-scatter of the same buffer.
    Under pccl, each collective is planned from the topology the previous
    collective left behind, with ``t0`` as the standing fallback, and L-to-L
    transfers get a direct circuit.
    """

    def __init__(self, name: str, t0: Topology, p: CostParams, pccl_input: str = "rhd"):
        if name not in BASELINES + ("pccl",):
            raise ValueError(f"unknown backend {name!r}")
        self.name, self.t0, self.p = name, t0, p
        self.pccl_input = pccl_input
        self.state = t0
        self._cache = {}

    def reset(self):
        self.state = self.t0

    def _schedule(self, algorithm, primitive, ranks, nbytes):
        n = len(ranks)
        if primitive == "all_to_all":
            s = dex_schedule(n, nbytes)
        else:
            dims = bucket_dims(self.t0) if n == self.t0.n else (n,)
            s = make_schedule(algorithm, primitive, n, nbytes, dims=dims)
        return _relabel(s, ranks, self.t0.n)

    def value(self, spec: CommSpec) -> CommValue:
        prim = spec.primitive
        if prim not in COMM_LABELS:
            raise TaskGraphError(f"comm node is not tagged (primitive={prim!r})")
        ranks = spec.ranks
        p = self.p

        if prim == "l_to_l":
            pairs = [(s, d) for s, d, *_ in spec.pattern] or list(zip(ranks, ranks[1:]))
            if self.name == "pccl":
                return CommValue(p.alpha + p.beta * spec.bytes, "direct", 0, 1)
            rc = round_cost(self.t0, pairs, spec.bytes, p)
            return CommValue(rc.time, "fixed", 0, 1)

        factor = 2.0 if prim == "all_reduce" else 1.0
        base_prim = "reduce_scatter" if prim == "all_reduce" else prim
        algo = "dex" if prim == "all_to_all" else (self.pccl_input if self.name == "pccl" else self.name)

        if self.name != "pccl":
            key = (algo, base_prim, ranks, spec.bytes)
            if key not in self._cache:
                s = self._schedule(algo, base_prim, ranks, spec.bytes)
                self._cache[key] = (schedule_cost(self.t0, s, p)[0], len(s))
            t, k = self._cache[key]
            return CommValue(factor * t, algo, 0, k)

        key = (self.state, algo, base_prim, ranks, spec.bytes)
        if key not in self._cache:
            s = self._schedule(algo, base_prim, ranks, spec.bytes)
            standard = [] if self.state == self.t0 else [self.t0]
            pl = plan(PlannerInput(self.state, standard, s, p))
            self._cache[key] = (pl.total_time, pl.n_reconfigs, len(s), pl.final_topology)
        t, nrec, k, final = self._cache[key]
        self.state = final
        return CommValue(factor * t, algo, int(factor) * nrec, k)


# -- simulation -----------------------------------------------------------------

@dataclass
class IterationReport:
    backend: str
    makespan: float
    start: dict
    finish: dict
    comm: list

    @property
    def throughput(self) -> float:
        return 1.0 / self.makespan if self.makespan > 0 else math.inf

    @property
    def n_reconfigs(self) -> int:
        return sum(c["n_reconfigs"] for c in self.comm)

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "makespan_s": self.makespan,
            "throughput_per_s": self.throughput,
            "n_reconfigs": self.n_reconfigs,
            "nodes": [
                {"id": k, "start_s": self.start[k], "finish_s": self.finish[k]} for k in sorted(self.start)
            ],
            "comm": self.comm,
        }


def simulate(g: TaskGraph, backend: Backend | Callable, t0: Topology = None, p: CostParams = None) -> IterationReport:
    """List-schedule the graph with unlimited resources.

    Nodes start as soon as their predecessors finish; ties are taken in node
    id order, which also fixes the order in which pccl plans collectives.
    ``backend`` may be a :class:`Backend` or a backend name (then ``t0`` and
    ``p`` are required).
    """
    if isinstance(backend, str):
        backend = Backend(backend, t0, p or CostParams())
    backend.reset()
    order = g.topo_order()  # raises on cycles
    preds, succ = g.preds(), g.succs()
    waiting = {k: len(preds[k]) for k in g.nodes}
    ready_at = {k: 0.0 for k in g.nodes}
    heap = [(0.0, k) for k in order if waiting[k] == 0]
    heapq.heapify(heap)
    start, finish, comm = {}, {}, []
    while heap:
        t, u = heapq.heappop(heap)
        node = g.nodes[u]
        if node.kind == "comm":
            cv = backend.value(node.comm)
            dur = cv.duration_s
            comm.append(
                {
                    "id": u,
                    "primitive": node.comm.primitive,
                    "algorithm": cv.algorithm,
                    "duration_s": dur,
                    "n_reconfigs": cv.n_reconfigs,
                    "rounds": cv.n_rounds,
                }
            )
        else:
            dur = node.duration_s
        start[u], finish[u] = t, t + dur
        for v in succ[u]:
            ready_at[v] = max(ready_at[v], finish[u])
            waiting[v] -= 1
            if waiting[v] == 0:
                heapq.heappush(heap, (ready_at[v], v))
    makespan = max(finish.values(), default=0.0)
    return IterationReport(backend.name, makespan, start, finish, comm)


# -- fixture --------------------------------------------------------------------

def transformer_graph(
    n_ranks: int,
    n_layers: int = 12,
    n_stages: int = 4,
    fwd_s: float = 150e-6,
    bwd_s: float = 300e-6,
    activation_bytes: float = 4 * MB,
    min_grad_mb: int = 1,
    max_grad_mb: int = 64,
) -> TaskGraph:
    """Layered forward/backward graph with pipeline hand-offs and gradient all-reduces.

    Layers are split evenly over ``n_stages`` pipeline stages; crossing a
    stage boundary costs an L-to-L transfer from each rank of one stage block
    to the matching rank of the next.  Each backward layer emits a gradient
    all-reduce over all ranks, sized on a power-of-two ladder between
    ``min_grad_mb`` and ``max_grad_mb``.  An optimizer step waits for every
    all-reduce.
    """
    if n_layers < 1 or n_stages < 1 or n_ranks % n_stages:
        raise TaskGraphError("need n_layers >= 1 and n_stages dividing n_ranks")
    nodes, edges = {}, []
    per_stage = max(1, math.ceil(n_layers / n_stages))
    block = n_ranks // n_stages
    stage = [min(i // per_stage, n_stages - 1) for i in range(n_layers)]
    lo, hi = math.log2(min_grad_mb), math.log2(max_grad_mb)

    def add(node):
        nodes[node.id] = node
        return node.id

    def handoff(nid, s_from, s_to, layer):
        pattern = tuple((s_from * block + k, s_to * block + k, activation_bytes, False) for k in range(block))
        return add(TaskNode(nid, "comm", comm=CommSpec(None, activation_bytes, (), pattern), layer=layer))

    prev = None
    for i in range(n_layers):
        f = add(TaskNode(f"f{i:03d}", "compute", fwd_s, layer=i))
        if prev is not None:
            if stage[i] != stage[i - 1]:
                h = handoff(f"f{i:03d}_in", stage[i - 1], stage[i], i)
                edges += [(prev, h), (h, f)]
            else:
                edges.append((prev, f))
        prev = f

    grads = []
    for i in reversed(range(n_layers)):
        b = add(TaskNode(f"b{i:03d}", "compute", bwd_s, layer=i))
        edges.append((prev, b))
        mb = 2 ** round(lo + (hi - lo) * i / max(1, n_layers - 1))
        pattern = tuple(
            (r, (r + 1) % n_ranks, mb * MB, True) for r in range(n_ranks)
        )
        ar = add(TaskNode(f"b{i:03d}_ar", "comm", comm=CommSpec(None, mb * MB, tuple(range(n_ranks)), pattern), layer=i))
        edges.append((b, ar))
        grads.append(ar)
        prev = b
        if i > 0 and stage[i] != stage[i - 1]:
            h = handoff(f"b{i:03d}_out", stage[i], stage[i - 1], i)
            edges.append((b, h))
            prev = h
    opt = add(TaskNode("opt", "compute", fwd_s))
    edges += [(prev, opt)] + [(a, opt) for a in grads]
    return TaskGraph(nodes, edges)
