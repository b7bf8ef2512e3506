"""Circuit routing over an MZI mesh with a per-wavelength edge reuse limit.

Each request is routed on a weighted shortest path.  A path is valid when
none of its waveguides would carry more than ``max_overlap`` circuits of the
request's wavelength; otherwise the overused waveguides on that path are
penalized and the search is repeated, up to ``trials`` times.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

TRIALS = 16
PENALIZE_FACTOR = 2.0
MAX_OVERLAP = 1

Node = tuple  # (x, y)


@dataclass(frozen=True)
class RouteRequest:
    src: Node
    dst: Node
    wavelength: int = 0


@dataclass
class RouteResult:
    request: RouteRequest
    path: Optional[list]

    @property
    def valid(self) -> bool:
        return self.path is not None


class MeshGraph:
    """``width x height`` grid of MZIs joined by waveguides (4-neighbor).

    ``removed`` lists waveguides absent from the mesh, as pairs of ``(x, y)``
    nodes; it is used to model cuts and irregular meshes.
    """

    def __init__(self, width: int, height: int, removed: Iterable[tuple[Node, Node]] = ()):
        if width < 1 or height < 1:
            raise ValueError("mesh dimensions must be positive")
        self.width, self.height = width, height
        gone = {frozenset((tuple(a), tuple(b))) for a, b in removed}
        edges = []
        for y in range(height):
            for x in range(width):
                if x + 1 < width and frozenset(((x, y), (x + 1, y))) not in gone:
                    edges.append((self.node_id((x, y)), self.node_id((x + 1, y))))
                if y + 1 < height and frozenset(((x, y), (x, y + 1))) not in gone:
                    edges.append((self.node_id((x, y)), self.node_id((x, y + 1))))
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.edge_index = {(int(u), int(v)): i for i, (u, v) in enumerate(self.edges)}
        self.edge_index.update({(v, u): i for (u, v), i in list(self.edge_index.items())})
        self.weights = np.ones(len(self.edges))
        self._penalty = np.ones(len(self.edges))
        self.counts = defaultdict(lambda: np.zeros(len(self.edges), dtype=np.int64))

        # csr positions -> edge index, so weights can be refreshed in place
        n = width * height
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        tag = np.concatenate([np.arange(len(self.edges))] * 2) + 1.0
        self._csr = csr_matrix((tag, (rows, cols)), shape=(n, n))
        self._pos_edge = self._csr.data.astype(np.int64) - 1

    @property
    def n_nodes(self) -> int:
        return self.width * self.height

    def node_id(self, node: Node) -> int:
        x, y = node
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"node {tuple(node)} is off the {self.width}x{self.height} mesh")
        return y * self.width + x

    def node_at(self, i: int) -> Node:
        return (i % self.width, i // self.width)

    def path_edges(self, path: Sequence[Node]) -> list:
        ids = [self.node_id(p) for p in path]
        return [self.edge_index[(a, b)] for a, b in zip(ids, ids[1:])]

    def edge_counts(self) -> dict:
        """Nonzero ``((node, node), wavelength) -> count`` entries."""
        out = {}
        for lam, arr in sorted(self.counts.items()):
            for i in np.flatnonzero(arr):
                u, v = self.edges[i]
                out[((self.node_at(u), self.node_at(v)), lam)] = int(arr[i])
        return out

    def shortest_path(self, src: Node, dst: Node) -> Optional[list]:
        s, t = self.node_id(src), self.node_id(dst)
        if s == t:
            return [tuple(src)]
        self._csr.data = self.weights[self._pos_edge]
        dist, pred = dijkstra(self._csr, directed=True, indices=s, return_predecessors=True)
        if not np.isfinite(dist[t]):
            return None
        path = [t]
        while path[-1] != s:
            path.append(int(pred[path[-1]]))
        return [self.node_at(i) for i in reversed(path)]

    def _refresh(self, idx):
        total = sum(arr[idx] for arr in self.counts.values())
        self.weights[idx] = self._penalty[idx] * (1 + total)


def route_all(
    g: MeshGraph,
    pairs: Sequence[RouteRequest],
    max_overlap: int = MAX_OVERLAP,
    penalize_factor: float = PENALIZE_FACTOR,
    trials: int = TRIALS,
) -> tuple[list, dict]:
    """Route requests in order, committing each valid path onto ``g``.

    Returns ``(routes, edge_counts)``; requests that found no valid path within
    ``trials`` searches come back with ``path=None``.
    """
    if trials < 1 or max_overlap < 1 or penalize_factor <= 1:
        raise ValueError("need trials >= 1, max_overlap >= 1 and penalize_factor > 1")
    for req in pairs:
        g.node_id(req.src)
        g.node_id(req.dst)

    routes = []
    for req in pairs:
        committed = None
        counts = g.counts[req.wavelength]
        for _ in range(trials):
            path = g.shortest_path(req.src, req.dst)
            if path is None:
                break
            idx = np.array(g.path_edges(path), dtype=np.int64)
            over = idx[counts[idx] + 1 > max_overlap]
            if over.size == 0:
                committed = path
                counts[idx] += 1
                g._refresh(idx)
                break
            g._penalty[over] *= penalize_factor
            g._refresh(over)
        routes.append(RouteResult(req, committed))
    return routes, g.edge_counts()


def validate_routes(g: MeshGraph, routes: Sequence[RouteResult], max_overlap: int = MAX_OVERLAP) -> bool:
    """True iff every route is a connected mesh path between its endpoints and
    no (waveguide, wavelength) pair carries more than ``max_overlap`` circuits.
    """
    load = defaultdict(int)
    for r in routes:
        if r.path is None:
            continue
        path = [tuple(p) for p in r.path]
        if path[0] != tuple(r.request.src) or path[-1] != tuple(r.request.dst):
            return False
        try:
            ids = [g.node_id(p) for p in path]
        except ValueError:
            return False
        for a, b in zip(ids, ids[1:]):
            e = g.edge_index.get((a, b))
            if e is None:
                return False
            load[(e, r.request.wavelength)] += 1
    return all(c <= max_overlap for c in load.values())


def random_requests(width: int, height: int, count: int, seed: int = 0, wavelengths: int = 1) -> list:
    """Uniform random requests with distinct endpoints."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        a, b = rng.integers(0, width * height, size=2)
        if a == b:
            continue
        lam = int(rng.integers(0, wavelengths))
        out.append(RouteRequest((int(a % width), int(a // width)), (int(b % width), int(b // width)), lam))
    return out


def requests_from_json(text: str) -> tuple[tuple, list]:
    doc = json.loads(text)
    reqs = [RouteRequest(tuple(r["src"]), tuple(r["dst"]), int(r.get("wavelength", 0))) for r in doc["requests"]]
    return tuple(doc.get("mesh", ())), reqs


def routes_to_dict(routes: Sequence[RouteResult]) -> dict:
    return {
        "routes": [
            {
                "src": list(r.request.src),
                "dst": list(r.request.dst),
                "wavelength": r.request.wavelength,
                "path": [list(p) for p in r.path] if r.path is not None else None,
            }
            for r in routes
        ],
        "unrouted": sum(1 for r in routes if r.path is None),
    }
