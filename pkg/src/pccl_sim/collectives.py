"""Round-by-round transfer schedules for ring, RHD, bucket and DEX collectives.

Every generated :class:`Schedule` also records which chunks each transfer
carries.  Chunk ids are ranks for reduce-scatter/all-gather (chunk ``i`` ends
up owned by rank ``i``) and ``(origin, dest)`` pairs for all-to-all.  The
cost model ignores payloads; they exist so a data-flow interpreter can check
postconditions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

PRIMITIVES = ("reduce_scatter", "all_gather", "all_reduce", "all_to_all")
ALGORITHMS = ("ring", "rhd", "bucket", "dex", "custom")


class ScheduleError(ValueError):
    """Invalid generator parameters or a malformed schedule."""


class UnsupportedError(ScheduleError):
    """The algorithm is not defined for the requested rank count."""


@dataclass(frozen=True)
class Schedule:
    """Ordered rounds of directed ``(src, dst)`` transfers with one size per round.

    ``payloads`` is optional; when present, ``payloads[i][(s, d)]`` is the
    tuple of chunk ids moved by that transfer in round ``i``.
    """

    n_ranks: int
    primitive: str
    algorithm: str
    rounds: tuple
    sizes: tuple
    payloads: Optional[tuple] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        rounds = tuple(tuple(sorted((int(s), int(d)) for s, d in r)) for r in self.rounds)
        object.__setattr__(self, "rounds", rounds)
        object.__setattr__(self, "sizes", tuple(float(w) for w in self.sizes))
        if self.primitive not in PRIMITIVES:
            raise ScheduleError(f"unknown primitive {self.primitive!r}")
        if len(self.sizes) != len(rounds):
            raise ScheduleError("sizes and rounds differ in length")
        for i, r in enumerate(rounds):
            if len(set(r)) != len(r):
                raise ScheduleError(f"duplicate transfer in round {i}")
            for s, d in r:
                if s == d or not (0 <= s < self.n_ranks and 0 <= d < self.n_ranks):
                    raise ScheduleError(f"bad transfer ({s}, {d}) in round {i}")
        if any(w <= 0 for w in self.sizes):
            raise ScheduleError("round sizes must be positive")
        if self.payloads is not None and len(self.payloads) != len(rounds):
            raise ScheduleError("payloads and rounds differ in length")

    def __len__(self):
        return len(self.rounds)

    @property
    def total_bytes_per_rank(self) -> dict:
        sent = {r: 0.0 for r in range(self.n_ranks)}
        for r, w in zip(self.rounds, self.sizes):
            for s, _ in r:
                sent[s] += w
        return sent

    def to_dict(self) -> dict:
        rounds = []
        for i, (r, w) in enumerate(zip(self.rounds, self.sizes)):
            entry = {"size_bytes": _num(w), "transfers": [list(t) for t in r]}
            if self.payloads is not None:
                entry["chunks"] = [_jsonable(self.payloads[i][t]) for t in r]
            rounds.append(entry)
        return {
            "n": self.n_ranks,
            "algorithm": self.algorithm,
            "primitive": self.primitive,
            "rounds": rounds,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Schedule":
        try:
            rounds, sizes, payloads = [], [], []
            for entry in doc["rounds"]:
                transfers = [tuple(t) for t in entry["transfers"]]
                rounds.append(transfers)
                sizes.append(entry["size_bytes"])
                if "chunks" in entry:
                    payloads.append(
                        {t: tuple(_unjson(c) for c in ch) for t, ch in zip(transfers, entry["chunks"])}
                    )
            has_payload = payloads and len(payloads) == len(rounds)
            return cls(
                n_ranks=int(doc["n"]),
                primitive=doc["primitive"],
                algorithm=doc.get("algorithm", "custom"),
                rounds=tuple(rounds),
                sizes=tuple(sizes),
                payloads=tuple(payloads) if has_payload else None,
            )
        except (KeyError, TypeError) as exc:
            raise ScheduleError(f"malformed schedule document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))


def _num(w: float):
    return int(w) if float(w).is_integer() else w


def _jsonable(chunks):
    return [list(c) if isinstance(c, tuple) else c for c in chunks]


def _unjson(c):
    return tuple(c) if isinstance(c, list) else c


def _build(n, primitive, algorithm, steps):
    """steps: list of (size, {(s, d): chunks})."""
    rounds = tuple(tuple(sorted(p)) for _, p in steps)
    payloads = tuple(dict(p) for _, p in steps)
    sizes = tuple(w for w, _ in steps)
    return Schedule(n, primitive, algorithm, rounds, sizes, payloads)


def _check_primitive(primitive, allowed):
    if primitive not in allowed:
        raise ScheduleError(f"primitive {primitive!r} not supported here; expected one of {allowed}")


def _log2(n: int, algorithm: str) -> int:
    if n < 2 or n & (n - 1):
        raise UnsupportedError(f"{algorithm} needs a power-of-two rank count >= 2, got {n}")
    return n.bit_length() - 1


# -- ring ---------------------------------------------------------------------

def _ring_rs_steps(n, chunk):
    # step k: rank i forwards its partial of chunk (i-k-1) to i+1
    return [
        (chunk, {(i, (i + 1) % n): ((i - k - 1) % n,) for i in range(n)})
        for k in range(n - 1)
    ]


def _ring_ag_steps(n, chunk):
    return [
        (chunk, {(i, (i + 1) % n): ((i - k) % n,) for i in range(n)})
        for k in range(n - 1)
    ]


def ring_schedule(n: int, primitive: str, total_bytes: float) -> Schedule:
    """Unidirectional ring: ``n-1`` rounds per phase, ``total_bytes/n`` per round."""
    _check_primitive(primitive, ("reduce_scatter", "all_gather", "all_reduce"))
    if n < 2:
        raise ScheduleError(f"ring needs n >= 2, got {n}")
    chunk = total_bytes / n
    steps = []
    if primitive in ("reduce_scatter", "all_reduce"):
        steps += _ring_rs_steps(n, chunk)
    if primitive in ("all_gather", "all_reduce"):
        steps += _ring_ag_steps(n, chunk)
    return _build(n, primitive, "ring", steps)


# -- recursive halving / doubling ---------------------------------------------

def _rhd_rs_steps(n, total_bytes, distances):
    resp = {r: set(range(n)) for r in range(n)}
    steps = []
    for dist in distances:
        moves = {}
        for r in range(n):
            p = r ^ dist
            moves[(r, p)] = tuple(sorted(c for c in resp[r] if (c & dist) != (r & dist)))
        for (r, _), sent in moves.items():
            resp[r].difference_update(sent)
        steps.append((total_bytes * len(next(iter(moves.values()))) / n, moves))
    return steps


def _rhd_ag_steps(n, total_bytes, distances):
    held = {r: {r} for r in range(n)}
    steps = []
    for dist in distances:
        moves = {(r, r ^ dist): tuple(sorted(held[r])) for r in range(n)}
        for (r, p), sent in moves.items():
            held[p].update(sent)
        steps.append((total_bytes * len(moves[(0, dist)]) / n, moves))
    return steps


def rhd_schedule(n: int, primitive: str, total_bytes: float) -> Schedule:
    """Recursive halving (reduce-scatter) and recursive doubling (all-gather).

    All-gather exchanges at XOR distances 1, 2, 4, ... with sizes growing from
    ``total_bytes/n`` to ``total_bytes/2``; reduce-scatter is its mirror image
    (distances ``n/2`` down to 1, sizes halving from ``total_bytes/2``).
    """
    _check_primitive(primitive, ("reduce_scatter", "all_gather", "all_reduce"))
    levels = _log2(n, "rhd")
    up = [1 << k for k in range(levels)]
    steps = []
    if primitive in ("reduce_scatter", "all_reduce"):
        steps += _rhd_rs_steps(n, total_bytes, list(reversed(up)))
    if primitive in ("all_gather", "all_reduce"):
        steps += _rhd_ag_steps(n, total_bytes, up)
    return _build(n, primitive, "rhd", steps)


# -- bucket (dimension-ordered multi-ring) ------------------------------------

def _coords(rank, dims):
    out = []
    for d in dims:
        out.append(rank % d)
        rank //= d
    return tuple(out)


def _shift(rank, dims, axis, delta):
    c = list(_coords(rank, dims))
    c[axis] = (c[axis] + delta) % dims[axis]
    r, stride = 0, 1
    for x, d in zip(c, dims):
        r += x * stride
        stride *= d
    return r


def bucket_schedule(dims: Sequence[int], primitive: str, total_bytes: float) -> Schedule:
    """Dimension-ordered bucket algorithm for a torus with the given dims.

    Reduce-scatter runs a ring reduce-scatter along dimension 0 on the full
    buffer, then along dimension 1 on the resulting shard, and so on; every
    ring in a dimension runs at once.  All-gather replays this in reverse
    dimension order.  Only torus-neighbor links are used.
    """
    _check_primitive(primitive, ("reduce_scatter", "all_gather", "all_reduce"))
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 2 for d in dims):
        raise ScheduleError(f"bucket dims must be nonempty with every dim >= 2, got {dims}")
    n = math.prod(dims)
    chunk = total_bytes / n
    coords = [_coords(r, dims) for r in range(n)]
    steps = []

    if primitive in ("reduce_scatter", "all_reduce"):
        resp = {r: set(range(n)) for r in range(n)}
        for axis, size in enumerate(dims):
            groups = {
                r: {g: tuple(sorted(c for c in resp[r] if coords[c][axis] == g)) for g in range(size)}
                for r in range(n)
            }
            for k in range(size - 1):
                moves = {}
                for r in range(n):
                    i = coords[r][axis]
                    moves[(r, _shift(r, dims, axis, 1))] = groups[r][(i - k - 1) % size]
                steps.append((chunk * len(moves[(0, _shift(0, dims, axis, 1))]), moves))
            for r in range(n):
                resp[r] = set(groups[r][coords[r][axis]])

    if primitive in ("all_gather", "all_reduce"):
        held = {r: {r} for r in range(n)}
        for axis in reversed(range(len(dims))):
            size = dims[axis]
            for k in range(size - 1):
                moves = {}
                for r in range(n):
                    i = coords[r][axis]
                    g = (i - k) % size
                    moves[(r, _shift(r, dims, axis, 1))] = tuple(
                        sorted(c for c in held[r] if coords[c][axis] == g)
                    )
                for (r, p), sent in moves.items():
                    held[p].update(sent)
                steps.append((chunk * len(moves[(0, _shift(0, dims, axis, 1))]), moves))

    return _build(n, primitive, "bucket", steps)


# -- direct-exchange hypercube all-to-all -------------------------------------

def dex_schedule(n: int, total_bytes: float) -> Schedule:
    """Hypercube all-to-all: ``log2 n`` rounds of XOR-partner exchanges.

    ``total_bytes`` is the per-rank buffer; every round moves half of it.
    """
    levels = _log2(n, "dex")
    held = {r: {(r, j) for j in range(n)} for r in range(n)}
    steps = []
    for k in range(levels):
        bit = 1 << k
        moves = {}
        for r in range(n):
            p = r ^ bit
            moves[(r, p)] = tuple(sorted(c for c in held[r] if (c[1] & bit) == (p & bit)))
        for (r, p), sent in moves.items():
            held[r].difference_update(sent)
        for (r, p), sent in moves.items():
            held[p].update(sent)
        steps.append((total_bytes / 2, moves))
    return _build(n, "all_to_all", "dex", steps)


# -- Tx/Rx feasibility ----------------------------------------------------------

def split_rounds(s: Schedule, tx_per_gpu: int = 1, rx_per_gpu: int = 1) -> Schedule:
    """Split rounds so no rank exceeds its transmitter/receiver count.

    Transfers are packed greedily, in ``(src, dst)`` order, into the earliest
    sub-round with spare Tx at the source and spare Rx at the destination.
    Feasible rounds come back unchanged.
    """
    if tx_per_gpu < 1 or rx_per_gpu < 1:
        raise ScheduleError("tx_per_gpu and rx_per_gpu must be >= 1")
    rounds, sizes, payloads = [], [], []
    for i, (r, w) in enumerate(zip(s.rounds, s.sizes)):
        subs, tx, rx = [], [], []
        for src, dst in r:
            for k in range(len(subs) + 1):
                if k == len(subs):
                    subs.append([])
                    tx.append({})
                    rx.append({})
                if tx[k].get(src, 0) < tx_per_gpu and rx[k].get(dst, 0) < rx_per_gpu:
                    subs[k].append((src, dst))
                    tx[k][src] = tx[k].get(src, 0) + 1
                    rx[k][dst] = rx[k].get(dst, 0) + 1
                    break
        for sub in subs:
            rounds.append(tuple(sub))
            sizes.append(w)
            if s.payloads is not None:
                payloads.append({t: s.payloads[i][t] for t in sub})
    return Schedule(
        s.n_ranks, s.primitive, s.algorithm, tuple(rounds), tuple(sizes),
        tuple(payloads) if s.payloads is not None else None,
    )


def make_schedule(algorithm: str, primitive: str, n: int, total_bytes: float,
                  dims: Optional[Sequence[int]] = None) -> Schedule:
    """Dispatch to a generator by name; ``dims`` is required for bucket."""
    if algorithm == "ring":
        return ring_schedule(n, primitive, total_bytes)
    if algorithm == "rhd":
        return rhd_schedule(n, primitive, total_bytes)
    if algorithm == "bucket":
        if dims is None:
            raise ScheduleError("bucket needs dims")
        if math.prod(dims) != n:
            raise ScheduleError(f"bucket dims {tuple(dims)} do not multiply to n={n}")
        return bucket_schedule(dims, primitive, total_bytes)
    if algorithm == "dex":
        if primitive != "all_to_all":
            raise ScheduleError("dex only implements all_to_all")
        return dex_schedule(n, total_bytes)
    raise ScheduleError(f"unknown algorithm {algorithm!r}")
