"""Slow reference implementations for tests.

Nothing here imports another module of this package: inputs are plain
integers, tuples and lists, so the oracles stay independent of the code
they check.
"""

from __future__ import annotations

import itertools
from collections import Counter, deque


class InterpreterFault(RuntimeError):
    """A transfer moved a chunk its sender does not hold."""


# -- graphs ---------------------------------------------------------------------

def _adjacency(n, edges):
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def all_pairs_distances(n, edges):
    """Floyd-Warshall hop distances; ``None`` marks unreachable pairs."""
    inf = float("inf")
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for u, v in edges:
        d[u][v] = d[v][u] = 1
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik == inf:
                continue
            di = d[i]
            for j in range(n):
                if dik + dk[j] < di[j]:
                    di[j] = dik + dk[j]
    return [[None if x == inf else int(x) for x in row] for row in d]


def all_shortest_paths(n, edges, src, dst):
    """Every minimum-hop path, by layered BFS and backtracking."""
    adj = _adjacency(n, edges)
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    if dst not in dist:
        return []
    out = []

    def back(path):
        u = path[-1]
        if u == src:
            out.append(path[::-1])
            return
        for v in adj[u]:
            if dist.get(v) == dist[u] - 1:
                back(path + [v])

    back([dst])
    return out


def lexmin_shortest_path(n, edges, src, dst):
    paths = all_shortest_paths(n, edges, src, dst)
    return min(paths) if paths else None


def round_cost_oracle(n, edges, transfers, w, alpha, beta, penalty, directed=True):
    """(dilation, congestion, time) with lexicographically smallest shortest paths."""
    use = Counter()
    dil = 0
    for s, d in transfers:
        p = lexmin_shortest_path(n, edges, s, d)
        if p is None:
            return 0, 0, penalty
        dil = max(dil, len(p) - 1)
        for a, b in zip(p, p[1:]):
            use[(a, b) if directed else (min(a, b), max(a, b))] += 1
    cong = max(use.values(), default=0)
    return dil, cong, alpha * dil + beta * cong * w


# -- plan enumeration -----------------------------------------------------------

def plan_oracle(n, g0_edges, standard_edges, rounds, sizes, alpha, beta, r, penalty, directed=True):
    """Minimum total time over every legal per-round topology sequence.

    Candidates are ``[g0, *standard, derived_0, ...]``; a derived topology may
    only be chosen in its own round or held from there.
    """
    derived = [frozenset((min(s, d), max(s, d)) for s, d in rd) for rd in rounds]
    cands = [frozenset(map(lambda e: (min(e), max(e)), g0_edges))]
    cands += [frozenset(map(lambda e: (min(e), max(e)), s)) for s in standard_edges]
    base = len(cands)
    cands += derived
    cost = {}
    best = None
    for seq in itertools.product(range(len(cands)), repeat=len(rounds)):
        ok = True
        for i, k in enumerate(seq):
            if k >= base:
                o = k - base
                if o > i or any(seq[j] != k for j in range(o, i)):
                    ok = False
                    break
        if not ok:
            continue
        total, prev = 0.0, cands[0]
        for i, k in enumerate(seq):
            if (k, i) not in cost:
                cost[(k, i)] = round_cost_oracle(n, cands[k], rounds[i], sizes[i], alpha, beta, penalty, directed)[2]
            total += cost[(k, i)] + (0.0 if cands[k] == prev else r)
            prev = cands[k]
        if best is None or total < best:
            best = total
    return best


# -- chunk interpreter ----------------------------------------------------------

def interpret_schedule(n, primitive, rounds, payloads):
    """Replay chunk movements and return the final per-rank state.

    State maps rank -> {chunk: Counter(contributing ranks)}.  Reduction
    transfers add the sender's contributions into the receiver's; gather
    transfers copy; all-to-all transfers move.  For all-reduce the first half
    of the rounds reduce and the second half gather.
    """
    if primitive == "all_to_all":
        state = {r: {(r, j): Counter({r: 1}) for j in range(n) if j != r} for r in range(n)}
    elif primitive == "all_gather":
        state = {r: {r: Counter(range(n))} for r in range(n)}
    else:
        state = {r: {c: Counter({r: 1}) for c in range(n)} for r in range(n)}

    half = len(rounds) // 2
    for i, rd in enumerate(rounds):
        mode = {
            "reduce_scatter": "reduce",
            "all_gather": "copy",
            "all_to_all": "move",
            "all_reduce": "reduce" if i < half else "copy",
        }[primitive]
        staged = []
        for s, d in rd:
            for c in payloads[i][(s, d)]:
                if c not in state[s]:
                    raise InterpreterFault(f"round {i}: rank {s} does not hold chunk {c}")
                staged.append((s, d, c, Counter(state[s][c])))
        # all sends in a round read the state at the start of the round
        for s, d, c, tok in staged:
            if mode == "reduce":
                state[d].setdefault(c, Counter())
                state[d][c] = state[d][c] + tok
            elif mode == "copy":
                state[d][c] = tok
            else:
                del state[s][c]
                state[d][c] = tok
    return state


def postcondition_holds(n, primitive, state) -> bool:
    full = Counter(range(n))
    if primitive == "reduce_scatter":
        return all(state[r].get(r) == full for r in range(n))
    if primitive in ("all_gather", "all_reduce"):
        return all(state[r].get(c) == full for r in range(n) for c in range(n))
    if primitive == "all_to_all":
        return all(set(state[j]) == {(i, j) for i in range(n) if i != j} for j in range(n))
    raise ValueError(primitive)


# -- DAG ------------------------------------------------------------------------

def longest_path(durations: dict, edges) -> float:
    """Heaviest node-weighted path through a DAG, by memoized recursion."""
    succ = {k: [] for k in durations}
    for a, b in edges:
        succ[a].append(b)
    memo = {}

    def tail(u):
        if u not in memo:
            memo[u] = durations[u] + max((tail(v) for v in succ[u]), default=0.0)
        return memo[u]

    return max((tail(u) for u in durations), default=0.0)


# -- fibers ---------------------------------------------------------------------

def _simple_paths(adj, s, d, path=None):
    path = path or [s]
    if path[-1] == d:
        yield list(path)
        return
    for v in sorted(adj[path[-1]]):
        if v not in path:
            path.append(v)
            yield from _simple_paths(adj, s, d, path)
            path.pop()


def fiber_optimum(n, links, requests, edge_count=None, per_direction=False):
    """Minimum max-link load over every combination of simple paths.

    Depth-first over requests, abandoning a branch once its load reaches the
    best complete assignment found so far.
    """
    adj = _adjacency(n, links)
    options = [sorted(_simple_paths(adj, s, d), key=len) for s, d in requests]
    if any(not o for o in options):
        return None

    def key(u, v):
        return (u, v) if per_direction else (min(u, v), max(u, v))

    load = Counter()
    for (u, v), c in (edge_count or {}).items():
        load[key(u, v)] += c
    best = [None]

    def rec(i, cur):
        if best[0] is not None and cur >= best[0]:
            return
        if i == len(options):
            best[0] = cur
            return
        for p in options[i]:
            keys = [key(u, v) for u, v in zip(p, p[1:])]
            for k in keys:
                load[k] += 1
            rec(i + 1, max([cur] + [load[k] for k in keys]))
            for k in keys:
                load[k] -= 1

    rec(0, max(load.values(), default=0))
    return best[0]
