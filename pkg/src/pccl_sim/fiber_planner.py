"""Inter-server circuit routing that minimizes the fibers needed per link.

Every request needs one path through the server graph.  The number of fibers
a link needs is the number of circuits crossing it (plus circuits already
there), so the objective is the maximum link load ``z``.

Small instances are solved by exhaustive search.  Larger ones use a binary
search on ``z`` in which each candidate is tested by negotiated-congestion
rip-up and reroute; the result always comes with a feasible witness, and
optimality is certified when ``z`` meets a cut lower bound.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Optional, Sequence


class InfeasibleError(ValueError):
    """Some request has no path between its endpoints."""


class ServerGraph:
    """Servers joined by fiber links.

    A link is undirected; by default circuits in both directions share its
    fibers.  With ``per_direction=True`` each direction is counted
    separately.  ``edge_count`` holds circuits already on a link (keyed by
    ``(u, v)``, either orientation).  ``coords`` is optional and, for grid
    layouts, enables row/column cut bounds.
    """

    def __init__(self, n: int, links, edge_count=None, coords=None, per_direction: bool = False):
        self.n = n
        self.per_direction = per_direction
        self.links = sorted({(min(u, v), max(u, v)) for u, v in links if u != v})
        for u, v in self.links:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"link ({u}, {v}) out of range")
        self.adj = [[] for _ in range(n)]
        for u, v in self.links:
            self.adj[u].append(v)
            self.adj[v].append(u)
        for a in self.adj:
            a.sort()
        self.edge_count = defaultdict(int)
        for (u, v), c in (edge_count or {}).items():
            if c < 0:
                raise ValueError("edge_count must be non-negative")
            self.edge_count[self.key(u, v)] += c
        self.coords = coords

    @classmethod
    def grid(cls, width: int, height: int, **kw) -> "ServerGraph":
        links = []
        for y in range(height):
            for x in range(width):
                i = y * width + x
                if x + 1 < width:
                    links.append((i, i + 1))
                if y + 1 < height:
                    links.append((i, i + width))
        coords = [(i % width, i // width) for i in range(width * height)]
        return cls(width * height, links, coords=coords, **kw)

    def key(self, u: int, v: int) -> tuple:
        """Capacity key of a traversal ``u -> v``."""
        if self.per_direction:
            return (u, v)
        return (u, v) if u < v else (v, u)

    def keys(self) -> list:
        if self.per_direction:
            return [(u, v) for a, b in self.links for u, v in ((a, b), (b, a))]
        return list(self.links)

    def has_arc(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in set(self.links)

    def reachable(self, src: int) -> set:
        seen = {src}
        q = deque([src])
        while q:
            u = q.popleft()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    q.append(v)
        return seen


@dataclass
class FiberPlan:
    paths: list
    z: int
    loads: dict
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> list:
        """Per-request set of arcs ``(u, v)`` used, i.e. the 0/1 flow indicators."""
        return [set(zip(p, p[1:])) for p in self.paths]

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "paths": [list(p) for p in self.paths],
            "loads": [[u, v, c] for (u, v), c in sorted(self.loads.items())],
            "meta": self.meta,
        }


def _loads(g: ServerGraph, paths) -> dict:
    load = defaultdict(int)
    for k, c in g.edge_count.items():
        load[k] += c
    for p in paths:
        for u, v in zip(p, p[1:]):
            load[g.key(u, v)] += 1
    return dict(load)


def _dijkstra(g: ServerGraph, src: int, dst: int, cost) -> list:
    dist = {src: 0.0}
    prev = {}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == dst:
            break
        if d > dist[u]:
            continue
        for v in g.adj[u]:
            nd = d + cost(u, v)
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def lower_bound(g: ServerGraph, requests) -> int:
    """Cut bound on ``z``: node cuts, existing counts and, on grids, every
    straight row/column cut.
    """
    lb = max(g.edge_count.values(), default=0)
    lb = max(lb, 1 if requests else 0)
    # node cuts
    for v in range(g.n):
        deg = len(g.adj[v])
        if not deg:
            continue
        existing = sum(g.edge_count.get(g.key(v, w), 0) for w in g.adj[v])
        if g.per_direction:
            out_d = sum(1 for s, _ in requests if s == v)
            in_d = sum(1 for _, d in requests if d == v)
            out_e = sum(g.edge_count.get((v, w), 0) for w in g.adj[v])
            in_e = sum(g.edge_count.get((w, v), 0) for w in g.adj[v])
            lb = max(lb, math.ceil((out_d + out_e) / deg), math.ceil((in_d + in_e) / deg))
        else:
            touching = sum(1 for s, d in requests if v in (s, d))
            lb = max(lb, math.ceil((touching + existing) / deg))
    # straight cuts on grid layouts
    if g.coords is not None:
        for axis in (0, 1):
            values = sorted({c[axis] for c in g.coords})
            for cut in values[:-1]:
                side = [c[axis] <= cut for c in g.coords]
                crossing = [(u, v) for u, v in g.links if side[u] != side[v]]
                if not crossing:
                    continue
                fwd = sum(1 for s, d in requests if side[s] and not side[d])
                bwd = sum(1 for s, d in requests if side[d] and not side[s])
                if g.per_direction:
                    ef = sum(g.edge_count.get((u, v) if side[u] else (v, u), 0) for u, v in crossing)
                    eb = sum(g.edge_count.get((v, u) if side[u] else (u, v), 0) for u, v in crossing)
                    lb = max(lb, math.ceil((fwd + ef) / len(crossing)), math.ceil((bwd + eb) / len(crossing)))
                else:
                    ex = sum(g.edge_count.get((u, v), 0) for u, v in crossing)
                    lb = max(lb, math.ceil((fwd + bwd + ex) / len(crossing)))
    return lb


def _simple_paths(g: ServerGraph, src: int, dst: int, limit: int) -> list:
    out = []
    stack = [(src, [src])]
    while stack and len(out) < limit:
        u, path = stack.pop()
        if u == dst:
            out.append(path)
            continue
        for v in reversed(g.adj[u]):
            if v not in path:
                stack.append((v, path + [v]))
    return sorted(out, key=lambda p: (len(p), p))


def _exhaustive(g: ServerGraph, requests, upper: int) -> Optional[list]:
    options = [_simple_paths(g, s, d, 10_000) for s, d in requests]
    order = sorted(range(len(requests)), key=lambda i: len(options[i]))
    best = [upper, None]
    load = defaultdict(int, g.edge_count)
    chosen = [None] * len(requests)

    def rec(k, cur):
        if cur >= best[0]:
            return
        if k == len(order):
            best[0], best[1] = cur, list(chosen)
            return
        i = order[k]
        for p in options[i]:
            keys = [g.key(u, v) for u, v in zip(p, p[1:])]
            for key in keys:
                load[key] += 1
            chosen[i] = p
            rec(k + 1, max(cur, max(load[key] for key in keys)))
            for key in keys:
                load[key] -= 1

    rec(0, max(g.edge_count.values(), default=0))
    return best[1]


def _negotiate(g, requests, cap, start, rng, passes):
    """Rip-up and reroute until every link load is within ``cap``."""
    paths = [list(p) for p in start]
    load = defaultdict(int, _loads(g, paths))
    hist = defaultdict(float)
    for it in range(passes):
        over = {k for k, c in load.items() if c > cap}
        if not over:
            return paths
        for k in over:
            hist[k] += 1.0
        pres = 1.0 + it
        todo = [i for i, p in enumerate(paths) if any(g.key(u, v) in over for u, v in zip(p, p[1:]))]
        rng.shuffle(todo)
        for i in todo:
            for u, v in zip(paths[i], paths[i][1:]):
                load[g.key(u, v)] -= 1

            def cost(u, v):
                k = g.key(u, v)
                excess = max(0, load[k] + 1 - cap)
                return (1.0 + hist[k]) * (1.0 + pres * excess * 4.0) + load[k] / (cap + 1)

            paths[i] = _dijkstra(g, requests[i][0], requests[i][1], cost)
            for u, v in zip(paths[i], paths[i][1:]):
                load[g.key(u, v)] += 1
    return paths if all(c <= cap for c in load.values()) else None


def _greedy(g, requests):
    load = defaultdict(int, g.edge_count)
    paths = []
    for s, d in requests:
        p = _dijkstra(g, s, d, lambda u, v: 1.0 + 2.0 * load[g.key(u, v)])
        for u, v in zip(p, p[1:]):
            load[g.key(u, v)] += 1
        paths.append(p)
    return paths


def plan_fibers(
    g: ServerGraph,
    requests: Sequence[tuple[int, int]],
    seed: int = 0,
    passes: int = 60,
    restarts: int = 2,
    exhaustive_limit: tuple = (6, 6),
) -> FiberPlan:
    """Route every request, minimizing the maximum link load ``z``.

    ``meta`` records the lower bound, the method used and whether ``z`` is
    certified optimal.
    """
    requests = [(int(s), int(d)) for s, d in requests]
    for s, d in requests:
        if not (0 <= s < g.n and 0 <= d < g.n):
            raise ValueError(f"request ({s}, {d}) has an endpoint outside the graph")
        if s == d:
            raise ValueError(f"request ({s}, {d}) has identical endpoints")
    comps = {}
    for s, d in requests:
        if s not in comps:
            comps[s] = g.reachable(s)
        if d not in comps[s]:
            raise InfeasibleError(f"no path from {s} to {d}")

    lb = lower_bound(g, requests)
    rng = random.Random(seed)
    best = _greedy(g, requests)
    z_best = max(_loads(g, best).values(), default=0)
    method = "negotiated"

    max_servers, max_requests = exhaustive_limit
    if g.n <= max_servers and len(requests) <= max_requests:
        exact = _exhaustive(g, requests, z_best + 1)
        if exact is not None:
            best = exact
            z_best = max(_loads(g, best).values(), default=0)
        method = "exhaustive"
    else:
        lo = lb
        while lo < z_best:
            mid = (lo + z_best) // 2
            found = None
            for _ in range(restarts):
                found = _negotiate(g, requests, mid, best, rng, passes)
                if found is not None:
                    break
            if found is None:
                lo = mid + 1
            else:
                best = found
                z_best = max(_loads(g, best).values(), default=0)

    loads = _loads(g, best)
    return FiberPlan(
        paths=best,
        z=z_best,
        loads=loads,
        meta={
            "lower_bound": lb,
            "method": method,
            "certified_optimal": method == "exhaustive" or z_best == lb,
            "seed": seed,
        },
    )


def verify_plan(g: ServerGraph, requests, plan: FiberPlan) -> bool:
    """Check source, destination and conservation constraints per request and
    that ``plan.z`` bounds every link load including existing circuits.
    """
    x = plan.x
    if len(x) != len(requests):
        return False
    load = defaultdict(int, g.edge_count)
    for arcs, (s, d) in zip(x, requests):
        net = defaultdict(int)
        out_s = in_s = in_d = out_d = 0
        for u, v in arcs:
            if not g.has_arc(u, v):
                return False
            net[u] += 1
            net[v] -= 1
            out_s += u == s
            in_s += v == s
            in_d += v == d
            out_d += u == d
            load[g.key(u, v)] += 1
        if (out_s, in_s, in_d, out_d) != (1, 0, 1, 0):
            return False
        if any(net[v] != 0 for v in net if v not in (s, d)):
            return False
    return all(plan.z >= c for c in load.values())


def plan_fibers_per_wavelength(g: ServerGraph, requests, wavelengths, **kw) -> tuple[dict, dict]:
    """Plan each wavelength channel independently.

    Returns ``(plans, fibers)`` where ``fibers[link]`` sums the per-wavelength
    loads on that link.
    """
    groups = defaultdict(list)
    for req, lam in zip(requests, wavelengths):
        groups[lam].append(req)
    plans = {lam: plan_fibers(g, reqs, **kw) for lam, reqs in sorted(groups.items())}
    fibers = defaultdict(int)
    for p in plans.values():
        for k, c in p.loads.items():
            fibers[k] += c
    return plans, dict(fibers)


def random_requests(n_servers: int, count: int, seed: int = 0) -> list:
    """Uniform endpoints drawn with replacement, rejecting ``src == dst``."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        s, d = rng.randrange(n_servers), rng.randrange(n_servers)
        if s != d:
            out.append((s, d))
    return out


def requests_from_json(text: str) -> list:
    doc = json.loads(text)
    reqs = doc["requests"] if isinstance(doc, dict) else doc
    return [(int(r[0]), int(r[1])) for r in reqs]
