"""Logical scale-up topologies and the deterministic shortest-path policy.

A :class:`Topology` is a simple undirected graph over GPU ranks ``0..n-1``.
Every edge is one contention-free circuit with uniform bandwidth, so all
routing in this package is hop-count based.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

KINDS = ("ring", "torus2d", "torus3d", "grid2d", "grid3d", "round_derived", "custom")
_NDIMS = {"ring": 1, "torus2d": 2, "torus3d": 3, "grid2d": 2, "grid3d": 3}


class TopologyError(ValueError):
    """Invalid topology parameters or a malformed topology document."""


def _norm(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph over ranks ``0..n-1``.

    Edges are stored normalized as ``(min, max)`` pairs.  Instances are
    immutable; equality and hashing use ``(n, edges)`` only, so two
    topologies with the same circuits compare equal regardless of ``kind``.
    """

    n: int
    edges: frozenset
    kind: str = field(default="custom", compare=False)
    dims: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError(f"n must be positive, got {self.n}")
        if self.kind not in KINDS:
            raise TopologyError(f"unknown topology kind {self.kind!r}")
        norm = set()
        for u, v in self.edges:
            if u == v:
                raise TopologyError(f"self-loop on rank {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise TopologyError(f"edge ({u}, {v}) out of range for n={self.n}")
            norm.add(_norm(int(u), int(v)))
        object.__setattr__(self, "edges", frozenset(norm))
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
            if self.kind in _NDIMS and math.prod(self.dims) != self.n:
                raise TopologyError(f"product of dims {self.dims} != n={self.n}")
        if self.kind == "ring" and self.n >= 3:
            if len(self.edges) != self.n or any(len(a) != 2 for a in self.adjacency):
                raise TopologyError("ring must be a single n-cycle")

    @cached_property
    def adjacency(self) -> tuple:
        """Sorted neighbor tuples, indexed by rank."""
        adj = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def has_edge(self, u: int, v: int) -> bool:
        return _norm(u, v) in self.edges

    def is_connected(self) -> bool:
        return len(bfs_tree(self, 0)) == self.n

    def __repr__(self):
        dims = f", dims={self.dims}" if self.dims else ""
        return f"Topology(kind={self.kind!r}, n={self.n}, |E|={len(self.edges)}{dims})"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "kind": self.kind,
            "dims": list(self.dims) if self.dims else [],
            "edges": [list(e) for e in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Topology":
        try:
            n = int(doc["n"])
            edges = [tuple(e) for e in doc["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise TopologyError(f"malformed topology document: {exc}") from exc
        for e in edges:
            if len(e) != 2:
                raise TopologyError(f"edge {list(e)} is not a pair")
        if len({_norm(u, v) for u, v in edges if u != v}) != len(edges):
            raise TopologyError("duplicate edges in topology document")
        dims = tuple(doc.get("dims") or ()) or None
        return cls(n=n, edges=frozenset(edges), kind=doc.get("kind", "custom"), dims=dims)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls.from_dict(json.loads(text))


def make_topology(kind: str, dims: Sequence[int]) -> Topology:
    """Build a ring, torus or grid topology.

    Ranks are laid out row-major with the first dimension varying fastest,
    i.e. ``rank = c0 + d0*c1 + d0*d1*c2``.  A grid is the torus without its
    wraparound links.  Size-2 dimensions collapse the wraparound onto the
    direct link, which is deduplicated.

    >>> sorted(make_topology("ring", [4]).edges)
    [(0, 1), (0, 3), (1, 2), (2, 3)]
    """
    if kind not in _NDIMS:
        raise TopologyError(f"cannot generate topology of kind {kind!r}")
    dims = tuple(int(d) for d in dims)
    if len(dims) == 0 or any(d < 2 for d in dims):
        raise TopologyError(f"dims must be nonempty with every dim >= 2, got {dims}")
    if len(dims) != _NDIMS[kind]:
        raise TopologyError(f"{kind} needs {_NDIMS[kind]} dims, got {len(dims)}")
    if kind == "ring" and dims[0] < 3:
        # a 2-ring is a single link; report it as a custom graph
        return Topology(n=2, edges=frozenset({(0, 1)}), kind="custom", dims=dims)

    wrap = kind.startswith("torus") or kind == "ring"
    n = math.prod(dims)
    strides = [math.prod(dims[:k]) for k in range(len(dims))]
    edges = set()
    for rank in range(n):
        for k, (size, stride) in enumerate(zip(dims, strides)):
            c = (rank // stride) % size
            if c + 1 < size:
                edges.add(_norm(rank, rank + stride))
            elif wrap:
                edges.add(_norm(rank, rank - c * stride))
    return Topology(n=n, edges=frozenset(e for e in edges if e[0] != e[1]), kind=kind, dims=dims)


def round_topology(transfers: Iterable[tuple[int, int]], n: int) -> Topology:
    """Topology whose circuits are exactly the communicating pairs of one round."""
    edges = frozenset(_norm(s, d) for s, d in transfers if s != d)
    return Topology(n=n, edges=edges, kind="round_derived")


def bfs_tree(t: Topology, src: int) -> dict:
    """Parent map of the breadth-first tree rooted at ``src``.

    Neighbors are expanded in ascending rank order and a node keeps the
    first parent that discovers it, which fixes the tie-break between
    equal-length paths (lowest next rank first).
    """
    parent = {src: None}
    queue = deque([src])
    adj = t.adjacency
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    return parent


def path_from_tree(parent: dict, dst: int) -> Optional[list]:
    if dst not in parent:
        return None
    path = [dst]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def shortest_path(t: Topology, src: int, dst: int, tie_break: str = "lowest") -> Optional[list]:
    """Minimum-hop path from ``src`` to ``dst``, or ``None`` if disconnected.

    Only the ``"lowest"`` tie-break policy is supported.
    """
    if tie_break != "lowest":
        raise TopologyError(f"unsupported tie-break policy {tie_break!r}")
    if not (0 <= src < t.n and 0 <= dst < t.n):
        raise TopologyError(f"rank out of range for n={t.n}")
    return path_from_tree(bfs_tree(t, src), dst)


def default_dims(kind: str, n: int) -> tuple:
    """Near-cubic dimensions for ``n`` ranks, largest dimension last.

    >>> default_dims("torus3d", 128)
    (4, 4, 8)
    """
    k = _NDIMS.get(kind)
    if k is None:
        raise TopologyError(f"no default dims for kind {kind!r}")
    dims = []
    rest = n
    for left in range(k, 0, -1):
        d = round(rest ** (1.0 / left))
        while d > 1 and rest % d:
            d -= 1
        if left == 1:
            d = rest
        dims.append(d)
        rest //= d
    dims.sort()
    if math.prod(dims) != n or any(d < 2 for d in dims):
        raise TopologyError(f"cannot split n={n} into {k} dims >= 2")
    return tuple(dims)
