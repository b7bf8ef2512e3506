"""Per-round topology selection that trades reconfiguration delay against
congestion and dilation.

Candidate topologies are indexed ``[g0, *standard_set, derived_0, derived_1, ...]``
where ``derived_i`` connects exactly the pairs communicating in round ``i``.
A round may keep the previous round's topology, switch to ``g0`` or any
standard topology, or switch to its own derived topology.  A derived
topology can therefore only be adopted in its own round and held afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .collectives import Schedule
from .cost_model import CostParams, RoundCost, ideal_cost, round_cost
from .topology import Topology, round_topology


class PlannerError(ValueError):
    pass


class InstanceTooLarge(PlannerError):
    pass


@dataclass
class PlannerInput:
    g0: Topology
    standard_set: Sequence[Topology]
    schedule: Schedule
    params: CostParams

    def __post_init__(self):
        self.standard_set = list(self.standard_set)
        n = self.schedule.n_ranks
        for t in [self.g0, *self.standard_set]:
            if t.n != n:
                raise PlannerError(f"topology has {t.n} ranks, schedule has {n}")
        for t in self.standard_set:
            if not t.is_connected():
                raise PlannerError(f"standard topology {t!r} is not connected")

    def candidates(self) -> list:
        derived = [round_topology(r, self.schedule.n_ranks) for r in self.schedule.rounds]
        return [self.g0, *self.standard_set, *derived]

    @property
    def first_derived(self) -> int:
        return 1 + len(self.standard_set)


@dataclass(frozen=True)
class PlanRound:
    choice: int
    cost: RoundCost
    reconf: bool
    reconf_s: float

    @property
    def comm_s(self) -> float:
        return self.cost.time

    @property
    def time(self) -> float:
        return self.cost.time + self.reconf_s


@dataclass
class ReconfigPlan:
    choices: tuple
    per_round: list
    total_time: float
    n_reconfigs: int
    topologies: list = field(repr=False, default_factory=list)

    @property
    def reconfig_rounds(self) -> list:
        return [i for i, pr in enumerate(self.per_round) if pr.reconf]

    @property
    def final_topology(self) -> Topology:
        if not self.choices:
            return self.topologies[0]
        return self.topologies[self.choices[-1]]

    def breakdown(self) -> dict:
        """Seconds spent on alpha, beta and reconfiguration terms."""
        return {
            "alpha_s": sum(pr.cost.alpha_term for pr in self.per_round),
            "beta_s": sum(pr.cost.beta_term for pr in self.per_round),
            "reconf_s": sum(pr.reconf_s for pr in self.per_round),
        }

    def to_dict(self) -> dict:
        return {
            "choices": list(self.choices),
            "reconfig_rounds": self.reconfig_rounds,
            "total_s": self.total_time,
            "per_round": [
                {
                    "dilation": pr.cost.dilation,
                    "congestion": pr.cost.congestion,
                    "comm_s": pr.comm_s,
                    "reconf_s": pr.reconf_s,
                }
                for pr in self.per_round
            ],
        }


def _class_ids(cands: list) -> list:
    seen = {}
    return [seen.setdefault((t.n, t.edges), len(seen)) for t in cands]


def reconf_indicator(topologies: Sequence[Topology], prev_choice: int, cur_choice: int, r: float) -> float:
    """Reconfiguration charge between consecutive choices: 0 for the same graph, else ``r``."""
    return 0.0 if topologies[prev_choice] == topologies[cur_choice] else r


def _check_penalty(inp: PlannerInput):
    p = inp.params
    bound = ideal_cost(inp.schedule, p) + len(inp.schedule) * p.reconf_delay
    if p.disconnect_penalty <= bound:
        raise PlannerError(
            f"disconnect_penalty {p.disconnect_penalty} does not dominate feasible cost {bound}"
        )


def _assemble(inp, cands, choices, comm) -> ReconfigPlan:
    r = inp.params.reconf_delay
    cls = _class_ids(cands)
    prev = 0
    per_round, total, n_rec = [], 0.0, 0
    for i, j in enumerate(choices):
        rc = comm(j, i)
        changed = cls[j] != cls[prev]
        rs = r if changed else 0.0
        total += rc.time + rs
        n_rec += changed
        per_round.append(PlanRound(j, rc, changed, rs))
        prev = j
    return ReconfigPlan(tuple(choices), per_round, total, n_rec, cands)


def _comm_fn(inp, cands):
    cache = {}
    s, p = inp.schedule, inp.params

    def comm(j, i):
        key = (j, i)
        if key not in cache:
            cache[key] = round_cost(cands[j], s.rounds[i], s.sizes[i], p)
        return cache[key]

    return comm


def plan(inp: PlannerInput) -> ReconfigPlan:
    """Cost-minimal topology choice per round, by dynamic programming.

    The state after round ``i`` is the topology in use.  Ties are broken
    toward fewer reconfigurations, then lexicographically smaller choice
    sequences.
    """
    _check_penalty(inp)
    cands = inp.candidates()
    cls = _class_ids(cands)
    base = inp.first_derived
    r = inp.params.reconf_delay
    comm = _comm_fn(inp, cands)

    # state -> (cost, n_reconfigs, choices)
    states = {0: (0.0, 0, ())}
    for i in range(len(inp.schedule)):
        fixed = list(range(base)) + [base + i]
        nxt = {}
        for prev, (cost, n_rec, choices) in states.items():
            options = fixed if prev < base or prev == base + i else fixed + [prev]
            for j in options:
                changed = cls[j] != cls[prev]
                key = (cost + (comm(j, i).time + (r if changed else 0.0)), n_rec + changed, choices + (j,))
                if j not in nxt or key < nxt[j]:
                    nxt[j] = key
        states = nxt
    _, _, best = min(states.values())
    return _assemble(inp, cands, best, comm)


def brute_force_plan(inp: PlannerInput, max_rounds: int = 10, max_standard: int = 3) -> ReconfigPlan:
    """Exhaustive enumeration of every choice sequence allowed by the
    one-topology-per-round and topology-dependency rules.  Test oracle for
    :func:`plan`.
    """
    rounds = len(inp.schedule)
    if rounds > max_rounds or len(inp.standard_set) > max_standard:
        raise InstanceTooLarge(
            f"brute force limited to {max_rounds} rounds and {max_standard} standard topologies"
        )
    _check_penalty(inp)
    cands = inp.candidates()
    base = inp.first_derived
    r = inp.params.reconf_delay
    comm = _comm_fn(inp, cands)

    def valid(seq):
        for i, k in enumerate(seq):
            if k >= base:
                origin = k - base
                if origin > i or any(seq[j] != k for j in range(origin, i)):
                    return False
        return True

    best = None

    def extend(seq):
        nonlocal best
        i = len(seq)
        if i == rounds:
            total, n_rec, prev = 0.0, 0, 0
            for t, j in enumerate(seq):
                rs = reconf_indicator(cands, prev, j, r)
                total += comm(j, t).time + rs
                n_rec += cands[prev] != cands[j]
                prev = j
            key = (total, n_rec, tuple(seq))
            if best is None or key < best:
                best = key
            return
        for j in range(i + base + 1):
            seq.append(j)
            if valid(seq):
                extend(seq)
            seq.pop()

    extend([])
    return _assemble(inp, cands, best[2], comm)


def validate_plan(inp: PlannerInput, p: ReconfigPlan) -> bool:
    """Re-check one choice per round, the dependency rule and the cost sum."""
    base = inp.first_derived
    if len(p.choices) != len(inp.schedule):
        return False
    for i, k in enumerate(p.choices):
        if not 0 <= k < base + i + 1:
            return False
        if k >= base:
            origin = k - base
            if any(p.choices[j] != k for j in range(origin, i)):
                return False
    cands = inp.candidates()
    r = inp.params.reconf_delay
    total, prev = 0.0, 0
    for i, k in enumerate(p.choices):
        s = inp.schedule
        total += round_cost(cands[k], s.rounds[i], s.sizes[i], inp.params).time
        total += reconf_indicator(cands, prev, k, r)
        prev = k
    return abs(total - p.total_time) <= 1e-12 * max(1.0, abs(total))
