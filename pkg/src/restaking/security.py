"""Security decisions for restaking graphs and single PoS protocols."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType

import numpy as np

from . import _kernels, accel
from .errors import CapacityError, DegenerateInputError
from .model import (
    PoSInstance,
    RestakingGraph,
    StakeVector,
    attack_profit,
    maximal_attack_set,
    service_stake,
)

DEFAULT_CAP = 24

__all__ = [
    "DEFAULT_CAP",
    "Witness",
    "SecurityVerdict",
    "SufficiencyReport",
    "is_secure_exact",
    "satisfies_sufficient_condition",
    "pos_is_secure",
    "min_attacking_subset",
]


@dataclass(frozen=True)
class Witness:
    validators: frozenset[str]
    attacked: frozenset[str]
    profit: Fraction


@dataclass(frozen=True)
class SecurityVerdict:
    secure: bool
    witness: Witness | None = None

    def __post_init__(self):
        if self.secure != (self.witness is None):
            raise ValueError("an insecure verdict needs a witness and a secure one must not have one")

    def __bool__(self) -> bool:
        return self.secure


@dataclass(frozen=True)
class SufficiencyReport:
    holds: bool
    slack: Mapping[str, Fraction]
    required: Mapping[str, Fraction]


def _scaled_problem(graph: RestakingGraph, stakes: StakeVector, backend):
    """Integer form of the attack game over services that carry value."""
    stakes.check_against(graph)
    kept = [s for s in graph.services if s.value > 0]
    for s in kept:
        if service_stake(graph, stakes, s.id) == 0:
            raise DegenerateInputError(f"service {s.id} has positive value but zero backing stake")
    scale = accel.common_denominator([stakes[v] for v in graph.validators] + [s.value for s in kept])
    st = [stakes[v] * scale for v in graph.validators]
    vals = [s.value * scale for s in kept]
    vidx = {v: i for i, v in enumerate(graph.validators)}
    adj = np.zeros((graph.n, len(kept)), dtype=np.bool_)
    tots = []
    for j, s in enumerate(kept):
        tot = 0
        for v in graph.neighbors(s.id):
            adj[vidx[v], j] = True
            tot += st[vidx[v]]
        tots.append(int(tot))
    thr = [s.alpha.numerator * t for s, t in zip(kept, tots)]
    den = [s.alpha.denominator for s in kept]
    magnitude = max([int(sum(st)), int(sum(vals)), 1] + [t * d for t, d in zip(tots, den)] + thr)
    b = accel.pick(backend, magnitude)
    return b, (accel.int_array(st, b), accel.int_array(vals, b), adj,
               accel.int_array(thr, b), accel.int_array(den, b))


def _stake_order(graph: RestakingGraph, stakes: StakeVector) -> list[int]:
    return sorted(range(graph.n), key=lambda i: (-stakes[graph.validators[i]], i))


def _shrink(graph, stakes, members: list[str]) -> frozenset[str]:
    # drop members in order while the coalition stays profitable
    w = list(members)
    for v in list(members):
        trial = [x for x in w if x != v]
        if trial and attack_profit(graph, stakes, trial) > 0:
            w = trial
    return frozenset(w)


def is_secure_exact(
    graph: RestakingGraph,
    stakes: StakeVector,
    *,
    cap: int = DEFAULT_CAP,
    prune: bool = True,
    exhaustive: bool = False,
    backend: str | None = None,
) -> SecurityVerdict:
    """Decide whether any coalition attacks profitably.

    With ``prune`` (default) a branch and bound over validators sorted by
    descending stake is used; ``prune=False`` scans every subset and serves as
    the reference. The default witness is the first profitable coalition found,
    reduced to an inclusion-minimal one. ``exhaustive=True`` instead returns a
    maximum-profit coalition (pruned search only).
    """
    if graph.n > cap:
        raise CapacityError(
            f"{graph.n} validators exceeds the enumeration cap of {cap}; "
            "use the sufficient condition or a construction certificate instead, or raise the cap"
        )
    b, (st, vals, adj, thr, den) = _scaled_problem(graph, stakes, backend)
    if vals.shape[0] == 0:
        return SecurityVerdict(True)
    if prune:
        order_list = _stake_order(graph, stakes)
        order = np.array(order_list, dtype=np.int64)
        found, mask, _ = accel.kernel("coalition_search", b)(st, vals, adj, thr, den, order, exhaustive)
        if not found:
            return SecurityVerdict(True)
        members = [graph.validators[i] for i in order_list if mask[i]]
    else:
        if b == "numba":
            hit = accel.kernel("coalition_enumerate", b)(st, vals, adj, thr, den)
        else:
            hit = _kernels.coalition_enumerate_numpy(st, vals, adj, thr, den)
        if hit < 0:
            return SecurityVerdict(True)
        members = [v for i, v in enumerate(graph.validators) if (hit >> i) & 1]
    w = frozenset(members) if exhaustive else _shrink(graph, stakes, members)
    return SecurityVerdict(False, Witness(w, maximal_attack_set(graph, stakes, w), attack_profit(graph, stakes, w)))


def satisfies_sufficient_condition(graph: RestakingGraph, stakes: StakeVector) -> SufficiencyReport:
    """Per-validator linear check: stake covers its pro-rata share of value/alpha on every service."""
    stakes.check_against(graph)
    per_unit = {}
    for s in graph.services:
        if not graph.neighbors(s.id):
            continue
        tot = service_stake(graph, stakes, s.id)
        if tot == 0:
            raise DegenerateInputError(f"service {s.id} has zero total stake")
        per_unit[s.id] = s.value / s.alpha / tot
    slack, required = {}, {}
    for v in graph.validators:
        req = sum((stakes[v] * per_unit[s] for s in graph.neighbors(v)), Fraction(0))
        required[v] = req
        slack[v] = stakes[v] - req
    return SufficiencyReport(all(x >= 0 for x in slack.values()),
                             MappingProxyType(slack), MappingProxyType(required))


def min_attacking_subset(pos: PoSInstance, *, cap: int = DEFAULT_CAP,
                         backend: str | None = None) -> tuple[frozenset[str], Fraction] | None:
    """Cheapest set of validators whose share strictly exceeds alpha, or ``None``."""
    live = [(v, c) for v, c in pos.allocation.items() if c > 0]
    if not live:
        return None
    if len(live) > cap:
        raise CapacityError(f"protocol {pos.service} has {len(live)} staked validators, cap is {cap}")
    scale = accel.common_denominator([c for _, c in live])
    ints = [c * scale for _, c in live]
    total = int(sum(ints))
    thr = pos.alpha.numerator * total
    den = pos.alpha.denominator
    b = accel.pick(backend, max(thr, total * den))
    found, mask, _ = accel.kernel("min_exceeding_subset", b)(accel.int_array(ints, b), thr, den)
    if not found:
        return None
    chosen = frozenset(v for (v, _), bit in zip(live, mask) if bit)
    return chosen, sum((pos.allocation[v] for v in chosen), Fraction(0))


def pos_is_secure(pos: PoSInstance, *, cap: int = DEFAULT_CAP, backend: str | None = None) -> SecurityVerdict:
    if pos.value == 0:
        return SecurityVerdict(True)
    total = pos.total
    if total == 0:
        raise DegenerateInputError(f"protocol {pos.service} has positive value but no stake")
    if total * pos.alpha >= pos.value:
        # any attacking subset holds more than alpha * total >= value
        return SecurityVerdict(True)
    cheapest = min_attacking_subset(pos, cap=cap, backend=backend)
    if cheapest is None or cheapest[1] >= pos.value:
        return SecurityVerdict(True)
    w, cost = cheapest
    return SecurityVerdict(False, Witness(w, frozenset({pos.service}), pos.value - cost))
