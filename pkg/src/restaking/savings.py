"""Restaking savings and PoS savings: constructive bounds, family bounds, grid oracles."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations_with_replacement
from math import ceil, comb, floor, prod

import numpy as np

from . import accel
from .division import (
    DEFAULT_COVER_CAP,
    AugmentedDivision,
    compute_cover_K,
    construct_alpha_augmentation,
    construct_cover_augmentation,
    construct_maxdeg_augmentation,
    construct_sqrt_augmentation,
    proportional_division,
    verify_division,
)
from .errors import CapacityError, DegenerateInputError, InputError, InsecureError
from .generators import gen_rs_lower_family
from .model import DivisionPlan, PoSInstance, RestakingGraph, Service, StakeVector
from .security import DEFAULT_CAP, SecurityVerdict, is_secure_exact, pos_is_secure, satisfies_sufficient_condition

log = logging.getLogger(__name__)

__all__ = [
    "BoundEntry",
    "RSReport",
    "PoSSReport",
    "rs_upper_bounds",
    "rs_report",
    "rs_exact_oracle",
    "rs_oracle_extra",
    "rs_oracle_certificate",
    "rs_family_lower_bound",
    "rs_family_upper_certificate",
    "detect_rs_lower_family",
    "aggregate_pos",
    "poss_upper_construction",
    "poss_exact_oracle",
    "poss_report",
    "check_stake_value_inequality",
    "analytic_cap",
    "within_cap",
]


@dataclass(frozen=True)
class BoundEntry:
    """One construction's realised ratio next to the analytic cap it is proven under."""

    method: str
    extra: Fraction
    ratio: Fraction
    cap_label: str
    cap_value: Fraction | None  # None when the cap is irrational
    cap_float: float
    within_cap: bool
    verified: bool
    division: AugmentedDivision | None = None


@dataclass(frozen=True)
class RSReport:
    total_stake: Fraction
    bounds: tuple[BoundEntry, ...]
    best_upper: Fraction
    oracle: Fraction | None = None
    lower_bound: Fraction | None = None
    security_checked: bool = True
    granularity: Fraction | None = None

    def consistent(self) -> bool:
        """Lower bound <= oracle <= best constructive bound, where present."""
        ok = True
        if self.oracle is not None and self.lower_bound is not None:
            ok &= self.lower_bound <= self.oracle
        if self.oracle is not None:
            ok &= self.oracle <= self.best_upper
        return ok


@dataclass(frozen=True)
class PoSSReport:
    total_stake: Fraction
    aggregated_secure: bool | None
    witness: object
    construction_extra: Fraction
    construction_ratio: Fraction
    cap: int
    construction_secure: bool | None
    oracle: Fraction | None = None
    granularity: Fraction | None = None


def check_stake_value_inequality(graph: RestakingGraph, stakes: StakeVector) -> bool:
    return stakes.total >= graph.total_value()


def _ratio(extra: Fraction, total: Fraction) -> Fraction:
    if total == 0:
        raise DegenerateInputError("total stake is zero, savings ratio undefined")
    return extra / total


def analytic_cap(graph: RestakingGraph, method: str, k: int | None = None):
    """``(label, exact value or None, float value)`` of the cap a construction is proven under.

    ``k`` is the cover incidence for the cover method; it is computed when omitted.
    """
    if method == "proportional":
        return "0", Fraction(0), 0.0
    if method == "maxdeg":
        d = graph.max_service_degree()
        return "max_s d(s)", Fraction(d), float(d)
    if method == "cover":
        if k is None:
            k = compute_cover_K(graph, "exact" if graph.m <= DEFAULT_COVER_CAP else "greedy").K
        return "K", Fraction(k), float(k)
    if method == "sqrt":
        return "2*sqrt(n)-1", None, 2 * graph.n ** 0.5 - 1
    if method == "alpha":
        alphas = sorted(s.alpha for s in graph.services)
        inv = 1 / alphas[1] if len(alphas) > 1 else Fraction(0)
        return "1/alpha_2", inv, float(inv)
    raise InputError(f"no analytic cap for method {method!r}")


def within_cap(graph: RestakingGraph, method: str, ratio: Fraction, k: int | None = None) -> bool:
    """Exact comparison of a realised ratio with its cap."""
    if method == "sqrt":
        return (ratio + 1) ** 2 <= 4 * graph.n
    return ratio <= analytic_cap(graph, method, k)[1]


def rs_upper_bounds(graph: RestakingGraph, stakes: StakeVector, *, cap: int = DEFAULT_CAP,
                    check_security: bool = True, cover_cap: int = DEFAULT_COVER_CAP,
                    backend: str | None = None) -> RSReport:
    """Run every construction, verify it, and report realised ratio against its cap.

    Security is checked exactly when the graph fits under ``cap``; above it the
    caller vouches for it and ``security_checked`` is False.
    """
    stakes.check_against(graph)
    checked = False
    if check_security and graph.n <= cap:
        verdict = is_secure_exact(graph, stakes, cap=cap, backend=backend)
        if not verdict.secure:
            raise InsecureError("restaking savings are defined for secure graphs only", verdict)
        checked = True
    total = stakes.total
    entries = []

    def add(div, k=None):
        label, value, approx = analytic_cap(graph, div.method, k)
        ok = verify_division(graph, div.stakes, div.plan, cap=cap, backend=backend).ok
        ratio = _ratio(div.extra, total)
        entries.append(BoundEntry(div.method, div.extra, ratio, label, value, approx,
                                  within_cap(graph, div.method, ratio, k), ok, div))

    if satisfies_sufficient_condition(graph, stakes).holds:
        add(AugmentedDivision(stakes, proportional_division(graph, stakes), Fraction(0), "proportional", total))
    add(construct_maxdeg_augmentation(graph, stakes))
    cover = compute_cover_K(graph, "exact" if graph.m <= cover_cap else "greedy", cap=cover_cap, backend=backend)
    add(construct_cover_augmentation(graph, stakes, cover), cover.K)
    add(construct_sqrt_augmentation(graph, stakes))
    add(construct_alpha_augmentation(graph, stakes))

    good = [e.ratio for e in entries if e.verified]
    best = min(good) if good else min(e.ratio for e in entries)
    return RSReport(total, tuple(entries), best, security_checked=checked)


def rs_family_lower_bound(m: int) -> Fraction:
    """Certified lower bound (m*m - 2m) / (3m) for the linear-savings family."""
    if m < 2:
        raise InputError("the family lower bound needs m >= 2")
    return Fraction(m * m - 2 * m, 3 * m)


def rs_family_upper_certificate(m: int) -> AugmentedDivision:
    """Raise the shared validator to (2m+1)m and give each service 2m+1 of it."""
    graph, stakes = gen_rs_lower_family(m)
    big = graph.validators[-1]
    raised = {big: Fraction((2 * m + 1) * m)}
    splits = {big: {s: Fraction(2 * m + 1) for s in graph.service_ids}}
    for v in graph.validators[:-1]:
        splits[v] = {graph.neighbors(v)[0]: stakes[v]}
    new = StakeVector({v: raised.get(v, stakes[v]) for v in graph.validators})
    return AugmentedDivision(new, DivisionPlan(splits), new.total - stakes.total,
                             "family-certificate", stakes.total,
                             (f"shared validator {big} raised by {2 * m * m - m}",))


def detect_rs_lower_family(graph: RestakingGraph, stakes: StakeVector) -> int | None:
    """Recognise the linear-savings family up to relabelling; return its ``m``."""
    m = graph.m
    if m < 1 or graph.n != m * m + 1 or len(graph.edges) != m * m + m:
        return None
    if any(s.value != 2 or s.alpha != Fraction(1, 2 * m + 1) for s in graph.services):
        return None
    hubs = [v for v in graph.validators if graph.degree(v) == m and stakes[v] == 2 * m]
    if m == 1:
        hubs = [v for v in graph.validators if stakes[v] == 2]
    if len(hubs) != 1:
        return None
    hub = hubs[0]
    for v in graph.validators:
        if v != hub and (graph.degree(v) != 1 or stakes[v] != Fraction(1, m)):
            return None
    for s in graph.service_ids:
        nb = graph.neighbors(s)
        if hub not in nb or len(nb) != m + 1:
            return None
    return m


def _weak_compositions_count(d: int, total: int) -> int:
    return comb(total + d, d)


def rs_oracle_certificate(graph: RestakingGraph, stakes: StakeVector, granularity, budget=None, *,
                          max_validators: int = 12, max_services: int = 6, max_vectors: int = 50_000_000,
                          max_keys: int = 2_000_000, max_states: int = 2_000_000,
                          backend: str | None = None) -> AugmentedDivision | None:
    """Cheapest grid augmentation plus division, or ``None`` if it exceeds ``budget``.

    Searches every allocation ``c[v][s]`` in multiples of ``granularity`` with
    ``sum_s c[v][s] >= stakes[v]``; the raised stake of ``v`` is that sum. Each
    service's secure allocations are tabulated by a kernel scan, then a DP over
    services joins them through the validators they share.
    """
    g = Fraction(granularity)
    if g <= 0:
        raise InputError("granularity must be positive")
    stakes.check_against(graph)
    total = stakes.total
    if total == 0:
        raise DegenerateInputError("total stake is zero")
    if graph.n > max_validators or graph.m > max_services:
        raise CapacityError(f"oracle caps are {max_validators} validators and {max_services} services")
    if budget is None:
        budget = construct_maxdeg_augmentation(graph, stakes).extra
    budget = Fraction(budget)
    if budget < 0:
        raise InputError("budget must be >= 0")

    active = [s for s in graph.services if graph.neighbors(s.id)]
    idle = sum((stakes[v] for v in graph.validators if not graph.neighbors(v)), Fraction(0))
    req = {v: ceil(stakes[v] / g) for v in graph.validators}
    hi = {v: floor((stakes[v] + budget) / g) for v in graph.validators}
    first, last = {}, {}
    for j, s in enumerate(active):
        for v in graph.neighbors(s.id):
            first.setdefault(v, j)
            last[v] = j
    if any(hi[v] < req[v] for v in first):
        return None
    shared = {v for v in first if first[v] != last[v]}
    b = accel.resolve(backend)

    # per service: shared validators, then [(shared coords, private cost, full vector)]
    tables = []
    for s in active:
        nb = graph.neighbors(s.id)
        lo = [0 if v in shared else req[v] for v in nb]
        up = [hi[v] for v in nb]
        cap_total = floor((sum((stakes[v] for v in nb), Fraction(0)) + budget) / g)
        radix = [u - l + 1 for v, l, u in zip(nb, lo, up) if v in shared]
        key_size = prod(radix)
        work = min(prod(u - l + 1 for l, u in zip(lo, up)), _weak_compositions_count(len(nb), max(cap_total - sum(lo), 0)))
        if work > max_vectors:
            raise CapacityError(f"service {s.id}: {work} grid allocations exceeds cap {max_vectors}")
        if key_size > max_keys:
            raise CapacityError(f"service {s.id}: {key_size} shared-stake profiles exceeds cap {max_keys}")
        strides, acc = [], 1
        for v, l, u in zip(nb, lo, up):
            if v in shared:
                strides.append(acc)
                acc *= u - l + 1
            else:
                strides.append(0)
        best, arg = accel.kernel("grid_secure_table", b)(
            np.array(lo, dtype=np.int64), np.array(up, dtype=np.int64), np.array(strides, dtype=np.int64),
            cap_total, s.alpha.numerator, s.alpha.denominator, ceil(s.value / g), key_size)
        sh = [v for v in nb if v in shared]
        entries = []
        for key in np.flatnonzero(best >= 0):
            vec = tuple(int(x) for x in arg[key])
            entries.append((tuple(x for v, x in zip(nb, vec) if v in shared), int(best[key]), vec))
        tables.append((sh, entries))

    unstarted = [sum(req[v] for v in first if first[v] > j) for j in range(len(active) + 1)]
    limit_units = (budget + total - idle) / g
    # state: capped cumulative allocation of validators still awaiting later services
    layers = []
    states: dict[tuple, tuple] = {(): (0, None, None)}
    order: list[str] = []
    for j, (sh, entries) in enumerate(tables):
        new_order = [v for v in order if last[v] > j] + [v for v in sh if v not in order and last[v] > j]
        nxt: dict[tuple, tuple] = {}
        for state, (cost, _, _) in states.items():
            base = dict(zip(order, state))
            for e, (coords, priv, _) in enumerate(entries):
                acc = dict(base)
                c = cost + priv
                ok = True
                for v, x in zip(sh, coords):
                    c += x
                    a = acc.get(v, 0) + x
                    if last[v] == j and a < req[v]:
                        ok = False
                        break
                    acc[v] = min(a, req[v])
                if not ok:
                    continue
                key = tuple(acc[v] for v in new_order)
                if c + sum(req[v] - acc[v] for v in new_order) + unstarted[j + 1] > limit_units:
                    continue
                if key not in nxt or c < nxt[key][0]:
                    nxt[key] = (c, state, e)
        if len(nxt) > max_states:
            raise CapacityError(f"oracle state space exceeded {max_states}")
        layers.append(nxt)
        states, order = nxt, new_order
        if not states:
            return None
    if () not in states:
        return None

    splits = {v: {s: Fraction(0) for s in graph.neighbors(v)} for v in graph.validators}
    key = ()
    for j in range(len(active) - 1, -1, -1):
        _, prev, e = layers[j][key]
        vec = tables[j][1][e][2]
        for v, x in zip(graph.neighbors(active[j].id), vec):
            splits[v][active[j].id] = x * g
        key = prev
    raised = {v: (sum(splits[v].values(), Fraction(0)) if graph.neighbors(v) else stakes[v])
              for v in graph.validators}
    new = StakeVector(raised)
    extra = new.total - total
    if extra > budget:
        return None
    return AugmentedDivision(new, DivisionPlan(splits), extra, "grid-oracle", total,
                             (f"granularity {g}, budget {budget}",), {"granularity": g, "budget": budget})


def rs_oracle_extra(graph: RestakingGraph, stakes: StakeVector, granularity, budget=None, **kw) -> Fraction | None:
    cert = rs_oracle_certificate(graph, stakes, granularity, budget, **kw)
    return None if cert is None else cert.extra


def rs_exact_oracle(graph: RestakingGraph, stakes: StakeVector, granularity, budget=None, **kw) -> Fraction | None:
    """Grid minimum of restaking savings: extra stake over original total, or ``None`` within budget.

    Never below the true minimum; equal to it when some optimal raised vector
    and division lie on the grid.
    """
    extra = rs_oracle_extra(graph, stakes, granularity, budget, **kw)
    return None if extra is None else _ratio(extra, stakes.total)


def rs_report(graph: RestakingGraph, stakes: StakeVector, *, oracle: bool = False, granularity="1",
              budget=None, cap: int = DEFAULT_CAP, backend: str | None = None, **oracle_kw) -> RSReport:
    report = rs_upper_bounds(graph, stakes, cap=cap, backend=backend)
    fam = detect_rs_lower_family(graph, stakes)
    lower = rs_family_lower_bound(fam) if fam is not None and fam >= 2 else None
    value, g = None, None
    if oracle:
        g = Fraction(granularity)
        value = rs_exact_oracle(graph, stakes, g, budget, backend=backend, **oracle_kw)
    return replace(report, oracle=value, lower_bound=lower, granularity=g)


def aggregate_pos(protocols: Sequence[PoSInstance], *, cap: int = DEFAULT_CAP,
                  backend: str | None = None) -> tuple[RestakingGraph, StakeVector]:
    """Merge secure protocols into one restaking graph, summing each validator's stakes.

    A listed allocation, even zero, is an edge. Insecure protocols are refused.
    """
    seen = set()
    for p in protocols:
        if p.service in seen:
            raise InputError(f"duplicate protocol for service {p.service!r}")
        seen.add(p.service)
        verdict = pos_is_secure(p, cap=cap, backend=backend)
        if not verdict.secure:
            raise InsecureError(f"protocol {p.service} is not secure", verdict)
    totals: dict[str, Fraction] = {}
    edges = []
    for p in protocols:
        for v, c in p.allocation.items():
            totals[v] = totals.get(v, Fraction(0)) + c
            edges.append((p.service, v))
    graph = RestakingGraph.build([Service(p.service, p.value, p.alpha) for p in protocols], list(totals), edges)
    return graph, StakeVector(totals)


def poss_upper_construction(graph: RestakingGraph, stakes: StakeVector) -> StakeVector:
    """Add each service's value to every one of its validators."""
    stakes.check_against(graph)
    return StakeVector({v: stakes[v] + sum((graph.service(s).value for s in graph.neighbors(v)), Fraction(0))
                        for v in graph.validators})


def poss_exact_oracle(graph: RestakingGraph, stakes: StakeVector, granularity, budget=None, *,
                      cap: int = DEFAULT_CAP, max_candidates: int = 2_000_000,
                      backend: str | None = None) -> Fraction | None:
    """Smallest grid addition making the graph secure, over original total; ``None`` past budget.

    Total additions are tried in increasing order, every split of each total
    over the validators, each candidate checked exactly.
    """
    g = Fraction(granularity)
    if g <= 0:
        raise InputError("granularity must be positive")
    stakes.check_against(graph)
    total = stakes.total
    if total == 0:
        raise DegenerateInputError("total stake is zero")
    if graph.n > cap:
        raise CapacityError(f"{graph.n} validators exceeds the enumeration cap of {cap}")
    if budget is None:
        budget = poss_upper_construction(graph, stakes).total - total
    units = floor(Fraction(budget) / g)
    movable = [v for v in graph.validators if graph.neighbors(v)]
    tried = 0
    for k in range(units + 1):
        for picks in combinations_with_replacement(range(len(movable)), k):
            tried += 1
            if tried > max_candidates:
                raise CapacityError(f"more than {max_candidates} candidate stake vectors")
            add = {}
            for i in picks:
                add[movable[i]] = add.get(movable[i], Fraction(0)) + g
            if is_secure_exact(graph, stakes.plus(add), cap=cap, backend=backend).secure:
                return _ratio(k * g, total)
    return None


def poss_report(graph: RestakingGraph, stakes: StakeVector, *, oracle: bool = False, granularity="1",
                budget=None, cap: int = DEFAULT_CAP, backend: str | None = None) -> PoSSReport:
    total = stakes.total
    verdict: SecurityVerdict | None = None
    if graph.n <= cap:
        verdict = is_secure_exact(graph, stakes, cap=cap, backend=backend)
    raised = poss_upper_construction(graph, stakes)
    extra = raised.total - total
    after = is_secure_exact(graph, raised, cap=cap, backend=backend).secure if graph.n <= cap else None
    value, g = None, None
    if oracle:
        g = Fraction(granularity)
        value = poss_exact_oracle(graph, stakes, g, budget, cap=cap, backend=backend)
    return PoSSReport(total, None if verdict is None else verdict.secure,
                      None if verdict is None else verdict.witness,
                      extra, _ratio(extra, total), graph.max_service_degree(), after, value, g)
