"""Stake divisions and augment-then-divide constructions.

Every construction returns an :class:`AugmentedDivision`: the raised stake
vector, a plan splitting it across services, and the extra stake added. None
of them check their own output; call :func:`verify_division` for that.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from types import MappingProxyType

import numpy as np

from . import accel
from .errors import CapacityError, InputError, PreconditionError, ValidationError
from .model import DivisionPlan, PoSInstance, RestakingGraph, StakeVector
from .security import DEFAULT_CAP, pos_is_secure, satisfies_sufficient_condition

DEFAULT_COVER_CAP = 20

__all__ = [
    "AugmentedDivision",
    "CoverResult",
    "DivisionCheck",
    "verify_division",
    "proportional_division",
    "construct_maxdeg_augmentation",
    "compute_cover_K",
    "construct_cover_augmentation",
    "construct_sqrt_augmentation",
    "construct_alpha_augmentation",
]


@dataclass(frozen=True)
class DivisionCheck:
    ok: bool
    per_service: Mapping[str, bool]

    def __bool__(self) -> bool:
        return self.ok

    @property
    def failing(self) -> list[str]:
        return [s for s, good in self.per_service.items() if not good]


@dataclass(frozen=True)
class AugmentedDivision:
    stakes: StakeVector
    plan: DivisionPlan
    extra: Fraction
    method: str
    base_total: Fraction
    trace: tuple[str, ...] = ()
    details: Mapping[str, object] = field(default_factory=dict)

    @property
    def ratio(self) -> Fraction:
        if self.base_total == 0:
            raise InputError("ratio undefined: original total stake is zero")
        return self.extra / self.base_total


@dataclass(frozen=True)
class CoverResult:
    cover: tuple[str, ...]
    K: int

    def incidence(self, graph: RestakingGraph) -> dict[str, int]:
        chosen = set(self.cover)
        return {v: sum(1 for s in graph.neighbors(v) if s in chosen) for v in graph.validators}


def verify_division(graph: RestakingGraph, stakes: StakeVector, plan: DivisionPlan,
                    *, cap: int = DEFAULT_CAP, backend: str | None = None) -> DivisionCheck:
    """Check the plan is well formed for ``stakes``, then check every induced protocol.

    Validators without services hold their stake idle and must have an empty split.
    """
    stakes.check_against(graph)
    offenders = []
    unknown = set(plan.splits).difference(graph.validators)
    if unknown:
        offenders.append(f"plan names unknown validators {sorted(unknown)}")
    for v in graph.validators:
        split = plan.splits.get(v, {})
        nbrs = set(graph.neighbors(v))
        outside = set(split).difference(nbrs)
        if outside:
            offenders.append(f"{v} allocates outside its neighborhood to {sorted(outside)}")
        neg = [s for s, c in split.items() if c < 0]
        if neg:
            offenders.append(f"{v} has negative allocations to {sorted(neg)}")
        if nbrs:
            got = sum(split.values(), Fraction(0))
            if got != stakes[v]:
                offenders.append(f"{v} splits {got} but holds {stakes[v]}")
    if offenders:
        raise ValidationError("malformed division plan", offenders)

    verdicts = {}
    for s in graph.services:
        pos = plan.to_pos(graph, s.id)
        if s.value > 0 and pos.total == 0:
            verdicts[s.id] = False
        else:
            verdicts[s.id] = pos_is_secure(pos, cap=cap, backend=backend).secure
    return DivisionCheck(all(verdicts.values()), MappingProxyType(verdicts))


def _plan(splits) -> DivisionPlan:
    return DivisionPlan({v: dict(x) for v, x in splits.items()})


def _finish(graph, stakes, raised: dict, splits, method, trace=(), details=None) -> AugmentedDivision:
    new = StakeVector({v: raised.get(v, stakes[v]) for v in graph.validators})
    return AugmentedDivision(new, _plan(splits), new.total - stakes.total, method,
                             stakes.total, tuple(trace), MappingProxyType(details or {}))


def proportional_division(graph: RestakingGraph, stakes: StakeVector) -> DivisionPlan:
    """Divide the original stakes so every service receives at least value/alpha.

    Each validator gives every service its pro-rata requirement, then spreads
    what is left evenly over its services. Refuses when the sufficient
    condition fails, since only then is the requirement affordable.
    """
    report = satisfies_sufficient_condition(graph, stakes)
    if not report.holds:
        bad = [v for v, x in report.slack.items() if x < 0]
        raise PreconditionError(f"sufficient condition fails for {bad}; proportional division is not guaranteed")
    per_unit = {}
    for s in graph.services:
        if graph.neighbors(s.id):
            tot = sum((stakes[v] for v in graph.neighbors(s.id)), Fraction(0))
            per_unit[s.id] = s.value / s.alpha / tot
    splits = {}
    for v in graph.validators:
        nbrs = graph.neighbors(v)
        if not nbrs:
            splits[v] = {}
            continue
        spread = report.slack[v] / len(nbrs)
        splits[v] = {s: stakes[v] * per_unit[s] + spread for s in nbrs}
    return _plan(splits)


def construct_maxdeg_augmentation(graph: RestakingGraph, stakes: StakeVector) -> AugmentedDivision:
    """Add each service's value to every one of its validators.

    A validator puts its original stake plus that value on its first service
    and exactly the value on each other one, so every positive allocation on a
    service is at least the service's value.
    """
    raised, splits = {}, {}
    for v in graph.validators:
        nbrs = graph.neighbors(v)
        splits[v] = {}
        if not nbrs:
            continue
        for i, s in enumerate(nbrs):
            splits[v][s] = graph.service(s).value + (stakes[v] if i == 0 else 0)
        raised[v] = stakes[v] + sum((graph.service(s).value for s in nbrs), Fraction(0))
    return _finish(graph, stakes, raised, splits, "maxdeg")


def _adjacency(graph: RestakingGraph) -> np.ndarray:
    vidx = {v: i for i, v in enumerate(graph.validators)}
    adj = np.zeros((graph.m, graph.n), dtype=np.bool_)
    for j, s in enumerate(graph.services):
        for v in graph.neighbors(s.id):
            adj[j, vidx[v]] = True
    return adj


def compute_cover_K(graph: RestakingGraph, mode: str = "exact", *, cap: int = DEFAULT_COVER_CAP,
                    backend: str | None = None) -> CoverResult:
    """Cover of all validators by service neighborhoods with small maximum incidence.

    ``exact`` minimises the maximum incidence over all service subsets (ties:
    fewer services, then earliest declared). ``greedy`` is the classic
    most-new-validators-first cover.
    """
    lonely = [v for v in graph.validators if not graph.neighbors(v)]
    if lonely:
        raise InputError(f"validators {lonely} belong to no service, no cover exists")
    if mode == "greedy":
        uncovered = set(graph.validators)
        chosen = []
        while uncovered:
            best = max(graph.services, key=lambda s: len(uncovered.intersection(graph.neighbors(s.id))))
            chosen.append(best.id)
            uncovered.difference_update(graph.neighbors(best.id))
        ordered = tuple(s for s in graph.service_ids if s in chosen)
        inc = CoverResult(ordered, 0).incidence(graph)
        return CoverResult(ordered, max(inc.values(), default=0))
    if mode != "exact":
        raise InputError(f"unknown cover mode {mode!r}")
    if graph.m > cap:
        raise CapacityError(f"{graph.m} services exceeds the exact cover cap of {cap}; use mode='greedy'")
    mask, k = accel.kernel("min_incidence_cover", accel.resolve(backend))(_adjacency(graph))
    return CoverResult(tuple(s for j, s in enumerate(graph.service_ids) if (mask >> j) & 1), int(k))


def construct_cover_augmentation(graph: RestakingGraph, stakes: StakeVector,
                                 cover: CoverResult | None = None) -> AugmentedDivision:
    """Secure covering services with original stake profiles, the rest with fresh value.

    A validator in ``k`` covering neighborhoods is raised to ``k`` times its
    stake and gives its full original stake to each. A service outside the
    cover gets its value added to its first validator, which allocates exactly
    that value to it.
    """
    if cover is None:
        cover = compute_cover_K(graph, "exact" if graph.m <= DEFAULT_COVER_CAP else "greedy")
    in_cover = set(cover.cover)
    covered = set()
    for s in cover.cover:
        covered.update(graph.neighbors(s))
    if covered != set(graph.validators):
        raise InputError("cover does not reach every validator")
    inc = cover.incidence(graph)
    splits = {v: {} for v in graph.validators}
    raised = {}
    for v in graph.validators:
        for s in graph.neighbors(v):
            splits[v][s] = stakes[v] if s in in_cover else Fraction(0)
        raised[v] = inc[v] * stakes[v]
    outside_value = Fraction(0)
    for s in graph.services:
        if s.id in in_cover or not graph.neighbors(s.id):
            continue
        v = graph.neighbors(s.id)[0]
        splits[v][s.id] += s.value
        raised[v] += s.value
        outside_value += s.value
    dup = sum(((inc[v] - 1) * stakes[v] for v in graph.validators), Fraction(0))
    trace = [f"cover {list(cover.cover)} with K={cover.K}",
             f"duplicated stake {dup}, fresh value for services outside the cover {outside_value}"]
    return _finish(graph, stakes, raised, splits, "cover", trace,
                   {"K": cover.K, "cover": cover.cover, "duplicated": dup, "outside_value": outside_value})


def construct_sqrt_augmentation(graph: RestakingGraph, stakes: StakeVector) -> AugmentedDivision:
    """Peel off services of residual degree at least sqrt(n), then handle the rest cheaply.

    Peeled services are secured by original stake profiles (validators touching
    several of them are duplicated). Every other service gets its value added
    at each of its unpeeled validators; those validators also fold their own
    stake into their first remaining service.
    """
    n = graph.n
    peeled, peeled_set, taken = [], set(), set()
    while True:
        pick = None
        for s in graph.services:
            if s.id in peeled_set:
                continue
            d = sum(1 for v in graph.neighbors(s.id) if v not in taken)
            # d >= sqrt(n) without irrationals
            if d > 0 and d * d >= n:
                pick = s.id
                break
        if pick is None:
            break
        peeled.append(pick)
        peeled_set.add(pick)
        taken.update(graph.neighbors(pick))

    splits = {v: {s: Fraction(0) for s in graph.neighbors(v)} for v in graph.validators}
    raised = dict(stakes)
    trace = [f"peeled services {peeled} covering {len(taken)} validators (threshold d*d >= {n})"]
    for v in graph.validators:
        if v not in taken:
            continue
        hits = [s for s in graph.neighbors(v) if s in peeled_set]
        for s in hits:
            splits[v][s] = stakes[v]
        raised[v] = len(hits) * stakes[v]
    for s in graph.services:
        if s.id in peeled_set or not graph.neighbors(s.id):
            continue
        free = [v for v in graph.neighbors(s.id) if v not in taken]
        if not free:
            # every validator was peeled away: secure with a single fresh stake
            v = graph.neighbors(s.id)[0]
            splits[v][s.id] += s.value
            raised[v] += s.value
            trace.append(f"{s.id} has no unpeeled validator; fresh value added to {v}")
            continue
        for v in free:
            splits[v][s.id] += s.value
            raised[v] += s.value
    for v in graph.validators:
        if v in taken or not graph.neighbors(v):
            continue
        home = graph.neighbors(v)[0]
        splits[v][home] += stakes[v]
    return _finish(graph, stakes, raised, splits, "sqrt", trace,
                   {"peeled": tuple(peeled), "peeled_validators": tuple(v for v in graph.validators if v in taken),
                    "iterations": len(peeled), "isqrt_n": isqrt(n)})


def construct_alpha_augmentation(graph: RestakingGraph, stakes: StakeVector) -> AugmentedDivision:
    """Original profile for the least tolerant service, value/alpha fresh stake for each other.

    Services are processed by increasing alpha. Each validator commits its
    whole original stake to the first processed service it belongs to; later
    services see it as zero and are carried by their fresh stake alone.
    """
    order = sorted(range(graph.m), key=lambda j: (graph.services[j].alpha, j))
    splits = {v: {s: Fraction(0) for s in graph.neighbors(v)} for v in graph.validators}
    raised = dict(stakes)
    claimed = set()
    fresh = Fraction(0)
    trace = []
    for rank, j in enumerate(order):
        s = graph.services[j]
        nbrs = graph.neighbors(s.id)
        if not nbrs:
            continue
        for v in nbrs:
            if v not in claimed:
                splits[v][s.id] += stakes[v]
                claimed.add(v)
        if rank > 0:
            t = s.value / s.alpha
            v = nbrs[0]
            splits[v][s.id] += t
            raised[v] += t
            fresh += t
            if t:
                trace.append(f"{s.id}: fresh stake {t} on {v}")
    alphas = sorted(s.alpha for s in graph.services)
    return _finish(graph, stakes, raised, splits, "alpha", trace,
                   {"order": tuple(graph.services[j].id for j in order),
                    "alpha2": alphas[1] if len(alphas) > 1 else None})


def induced_protocols(graph: RestakingGraph, plan: DivisionPlan) -> list[PoSInstance]:
    return [plan.to_pos(graph, s) for s in graph.service_ids]
