"""Extended alpha-beta cost with per-round congestion and dilation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

from .collectives import Schedule
from .topology import Topology, bfs_tree, path_from_tree

# 1 GB/s in bytes/s; bandwidths in this package are decimal.
GB = 1e9
US = 1e-6


@dataclass(frozen=True)
class CostParams:
    """Cost coefficients.

    ``directed_edge_capacity`` selects how congestion is counted: when true
    (default) each circuit is full duplex and only same-direction transfers
    share capacity; when false every traversal of an undirected edge counts.
    """

    alpha: float = 3 * US
    beta: float = 1 / (450 * GB)
    reconf_delay: float = 5 * US
    disconnect_penalty: float = 1e6
    directed_edge_capacity: bool = True

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.reconf_delay < 0:
            raise ValueError("alpha, beta and reconf_delay must be non-negative")
        if self.disconnect_penalty <= 0:
            raise ValueError("disconnect_penalty must be positive")

    def with_reconf(self, r: float) -> "CostParams":
        return CostParams(self.alpha, self.beta, r, self.disconnect_penalty, self.directed_edge_capacity)


@dataclass(frozen=True)
class RoundCost:
    dilation: int
    congestion: int
    time: float
    connected: bool
    alpha_term: float = 0.0
    beta_term: float = 0.0


@lru_cache(maxsize=1 << 16)
def _tree(t: Topology, src: int) -> dict:
    return bfs_tree(t, src)


@lru_cache(maxsize=1 << 18)
def _round_factors(t: Topology, transfers: tuple, directed: bool):
    """(dilation, congestion) for one round, or None if some pair is disconnected."""
    usage = {}
    dilation = 0
    for s, d in transfers:
        path = path_from_tree(_tree(t, s), d)
        if path is None:
            return None
        dilation = max(dilation, len(path) - 1)
        for u, v in zip(path, path[1:]):
            key = (u, v) if directed or u < v else (v, u)
            usage[key] = usage.get(key, 0) + 1
    return dilation, max(usage.values(), default=0)


def round_cost(t: Topology, transfers: Iterable[tuple[int, int]], w: float, p: CostParams) -> RoundCost:
    """Cost of one barrier round on a fixed topology.

    Each transfer follows the deterministic shortest path; dilation is the
    longest path in hops and congestion the most-used link.  The round costs
    ``alpha*dilation + beta*congestion*w``, or the disconnect penalty when any
    pair has no path.
    """
    transfers = tuple(sorted(transfers))
    for s, d in transfers:
        if not (0 <= s < t.n and 0 <= d < t.n):
            raise ValueError(f"transfer ({s}, {d}) out of range for n={t.n}")
    factors = _round_factors(t, transfers, p.directed_edge_capacity)
    if factors is None:
        return RoundCost(0, 0, p.disconnect_penalty, False)
    dil, cong = factors
    a, b = p.alpha * dil, p.beta * cong * w
    return RoundCost(dil, cong, a + b, True, a, b)


def schedule_cost(t: Topology, s: Schedule, p: CostParams) -> tuple[float, list]:
    """Total time of a schedule that never reconfigures away from ``t``."""
    if s.n_ranks != t.n:
        raise ValueError(f"schedule has {s.n_ranks} ranks but topology has {t.n}")
    per_round = [round_cost(t, r, w, p) for r, w in zip(s.rounds, s.sizes)]
    return sum(rc.time for rc in per_round), per_round


def effective_bandwidth(link_bw: float, overlaps: int) -> float:
    """Per-transfer bandwidth when ``overlaps`` transfers share one link."""
    if overlaps < 1:
        raise ValueError(f"overlaps must be >= 1, got {overlaps}")
    return link_bw / overlaps


def ideal_cost(s: Schedule, p: CostParams) -> float:
    """Congestion- and dilation-free time: one ``alpha + beta*w`` per nonempty round."""
    return sum(p.alpha + p.beta * w for r, w in zip(s.rounds, s.sizes) if r)
