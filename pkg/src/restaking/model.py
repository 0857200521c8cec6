"""Restaking graph data model and the attack semantics.

All quantities are :class:`fractions.Fraction`. Nothing in this module ever
touches a float: the extremal families sit exactly on the attack threshold, so
rounding would flip verdicts.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from types import MappingProxyType

from .errors import DegenerateInputError, InputError

Rat = Fraction

__all__ = [
    "Rat",
    "to_rat",
    "fmt_rat",
    "Service",
    "RestakingGraph",
    "StakeVector",
    "PoSInstance",
    "DivisionPlan",
    "neighborhood",
    "total_stake",
    "can_attack",
    "maximal_attack_set",
    "attack_profit",
]


def to_rat(x) -> Fraction:
    """Parse ints, Fractions, Decimals, and ``"p/q"`` or decimal strings exactly.

    Floats are refused because their binary expansion is rarely what was meant.
    """
    if isinstance(x, bool):
        raise InputError(f"boolean is not a number: {x!r}")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Decimal)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError(f"not a rational number: {x!r}") from None
    if isinstance(x, float):
        raise InputError(f"floats are not accepted, pass {str(x)!r} as a string instead")
    raise InputError(f"cannot interpret {x!r} as a rational number")


def fmt_rat(q: Fraction) -> str:
    """Canonical text form: ``"3"`` or ``"1/3"``."""
    return str(Fraction(q))


@dataclass(frozen=True)
class Service:
    id: str
    value: Fraction
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "value", to_rat(self.value))
        object.__setattr__(self, "alpha", to_rat(self.alpha))
        if self.value < 0:
            raise InputError(f"service {self.id}: value must be >= 0, got {self.value}")
        if not (0 < self.alpha <= 1):
            raise InputError(f"service {self.id}: alpha must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class RestakingGraph:
    """Bipartite services/validators graph. Stakes live in a separate :class:`StakeVector`.

    Declaration order of ``services`` and ``validators`` is significant: every
    "lowest id" tie-break in the package means "declared first".
    """

    services: tuple[Service, ...]
    validators: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    _svc: Mapping[str, Service] = field(init=False, repr=False, compare=False)
    _nbr: Mapping[str, tuple[str, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        services = tuple(s if isinstance(s, Service) else Service(*s) for s in self.services)
        validators = tuple(str(v) for v in self.validators)
        object.__setattr__(self, "services", services)
        object.__setattr__(self, "validators", validators)

        svc = {}
        for s in services:
            if s.id in svc:
                raise InputError(f"duplicate service id {s.id!r}")
            svc[s.id] = s
        vset = set()
        for v in validators:
            if v in vset:
                raise InputError(f"duplicate validator id {v!r}")
            if v in svc:
                raise InputError(f"id {v!r} names both a service and a validator")
            vset.add(v)

        edges = []
        for e in self.edges:
            s, v = str(e[0]), str(e[1])
            if s not in svc:
                raise InputError(f"edge ({s}, {v}) references unknown service {s!r}")
            if v not in vset:
                raise InputError(f"edge ({s}, {v}) references unknown validator {v!r}")
            edges.append((s, v))
        edge_set = frozenset(edges)
        if len(edge_set) != len(edges):
            raise InputError("duplicate edges")
        object.__setattr__(self, "edges", edge_set)

        nbr: dict[str, list[str]] = {x: [] for x in (*svc, *validators)}
        vpos = {v: i for i, v in enumerate(validators)}
        spos = {s.id: i for i, s in enumerate(services)}
        for s, v in sorted(edge_set, key=lambda e: (spos[e[0]], vpos[e[1]])):
            nbr[s].append(v)
        for s, v in sorted(edge_set, key=lambda e: (vpos[e[1]], spos[e[0]])):
            nbr[v].append(s)
        for s in services:
            if s.value > 0 and not nbr[s.id]:
                raise InputError(f"service {s.id} has positive value but no validators")

        object.__setattr__(self, "_svc", MappingProxyType(svc))
        object.__setattr__(self, "_nbr", MappingProxyType({k: tuple(x) for k, x in nbr.items()}))

    @classmethod
    def build(cls, services, validators, edges) -> "RestakingGraph":
        """Convenience constructor: ``services`` as ``(id, value, alpha)`` triples."""
        return cls(tuple(Service(*s) if not isinstance(s, Service) else s for s in services),
                   tuple(validators), frozenset(tuple(e) for e in edges))

    @property
    def service_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.services)

    @property
    def n(self) -> int:
        return len(self.validators)

    @property
    def m(self) -> int:
        return len(self.services)

    def service(self, sid: str) -> Service:
        try:
            return self._svc[sid]
        except KeyError:
            raise InputError(f"unknown service {sid!r}") from None

    def is_service(self, node: str) -> bool:
        return node in self._svc

    def neighbors(self, node: str) -> tuple[str, ...]:
        """Neighbors of ``node`` in declaration order."""
        try:
            return self._nbr[node]
        except KeyError:
            raise InputError(f"unknown node {node!r}") from None

    def degree(self, node: str) -> int:
        return len(self.neighbors(node))

    def max_service_degree(self) -> int:
        return max((len(self._nbr[s.id]) for s in self.services), default=0)

    def total_value(self) -> Fraction:
        return sum((s.value for s in self.services), Fraction(0))


class StakeVector(Mapping):
    """Immutable validator -> stake mapping, preserving insertion order."""

    __slots__ = ("_d",)

    def __init__(self, stakes: Mapping | Iterable = ()):
        items = stakes.items() if isinstance(stakes, Mapping) else stakes
        d = {}
        for v, x in items:
            q = to_rat(x)
            if q < 0:
                raise InputError(f"stake of {v} must be >= 0, got {q}")
            d[str(v)] = q
        self._d = d

    def __getitem__(self, v: str) -> Fraction:
        return self._d[v]

    def __iter__(self) -> Iterator[str]:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __repr__(self) -> str:
        return "StakeVector({" + ", ".join(f"{v!r}: {fmt_rat(q)}" for v, q in self._d.items()) + "})"

    @property
    def total(self) -> Fraction:
        return sum(self._d.values(), Fraction(0))

    def plus(self, additions: Mapping[str, Fraction]) -> "StakeVector":
        out = dict(self._d)
        for v, x in additions.items():
            out[v] = out[v] + to_rat(x)
        return StakeVector(out)

    def scaled(self, factor) -> "StakeVector":
        f = to_rat(factor)
        return StakeVector({v: q * f for v, q in self._d.items()})

    def dominates(self, other: "StakeVector") -> bool:
        return set(self) == set(other) and all(self[v] >= other[v] for v in other)

    def check_against(self, graph: RestakingGraph) -> None:
        if set(self._d) != set(graph.validators):
            missing = sorted(set(graph.validators) - set(self._d))
            extra = sorted(set(self._d) - set(graph.validators))
            raise InputError(f"stake vector does not match validators (missing {missing}, unknown {extra})")


@dataclass(frozen=True)
class PoSInstance:
    """One service as a stand-alone star protocol."""

    value: Fraction
    alpha: Fraction
    allocation: Mapping[str, Fraction]
    service: str = "s"

    def __post_init__(self):
        object.__setattr__(self, "value", to_rat(self.value))
        object.__setattr__(self, "alpha", to_rat(self.alpha))
        if self.value < 0:
            raise InputError(f"protocol {self.service}: value must be >= 0")
        if not (0 < self.alpha <= 1):
            raise InputError(f"protocol {self.service}: alpha must lie in (0, 1], got {self.alpha}")
        alloc = {}
        for v, x in dict(self.allocation).items():
            q = to_rat(x)
            if q < 0:
                raise InputError(f"protocol {self.service}: allocation of {v} is negative")
            alloc[str(v)] = q
        object.__setattr__(self, "allocation", MappingProxyType(alloc))

    @property
    def total(self) -> Fraction:
        return sum(self.allocation.values(), Fraction(0))


@dataclass(frozen=True)
class DivisionPlan:
    """``splits[v][s]`` is the part of validator ``v``'s stake committed to service ``s``."""

    splits: Mapping[str, Mapping[str, Fraction]]

    def __post_init__(self):
        frozen = {
            str(v): MappingProxyType({str(s): to_rat(c) for s, c in split.items()})
            for v, split in dict(self.splits).items()
        }
        object.__setattr__(self, "splits", MappingProxyType(frozen))

    def allocation_to(self, graph: RestakingGraph, sid: str) -> dict[str, Fraction]:
        """The star protocol stake vector this plan induces on ``sid``."""
        return {
            v: self.splits.get(v, {}).get(sid, Fraction(0))
            for v in graph.neighbors(sid)
        }

    def validator_total(self, v: str) -> Fraction:
        return sum(self.splits.get(v, {}).values(), Fraction(0))

    def to_pos(self, graph: RestakingGraph, sid: str) -> PoSInstance:
        s = graph.service(sid)
        return PoSInstance(s.value, s.alpha, self.allocation_to(graph, sid), service=sid)


def neighborhood(graph: RestakingGraph, node: str) -> frozenset[str]:
    return frozenset(graph.neighbors(node))


def total_stake(stakes: StakeVector) -> Fraction:
    return stakes.total


def _coalition(graph: RestakingGraph, coalition: Iterable[str]) -> frozenset[str]:
    w = frozenset(coalition)
    unknown = w.difference(graph.validators)
    if unknown:
        raise InputError(f"coalition contains unknown validators {sorted(unknown)}")
    return w


def service_stake(graph: RestakingGraph, stakes: StakeVector, sid: str) -> Fraction:
    return sum((stakes[v] for v in graph.neighbors(sid)), Fraction(0))


def can_attack(graph: RestakingGraph, stakes: StakeVector, coalition: Iterable[str], sid: str) -> bool:
    """Strict share test: coalition stake on ``sid`` over all stake on ``sid`` exceeds alpha."""
    w = _coalition(graph, coalition)
    svc = graph.service(sid)
    total = service_stake(graph, stakes, sid)
    if total == 0:
        raise DegenerateInputError(f"service {sid} has zero total stake")
    held = sum((stakes[v] for v in graph.neighbors(sid) if v in w), Fraction(0))
    return held > svc.alpha * total


def maximal_attack_set(graph: RestakingGraph, stakes: StakeVector, coalition: Iterable[str]) -> frozenset[str]:
    w = _coalition(graph, coalition)
    out = []
    for s in graph.services:
        if s.value == 0 and service_stake(graph, stakes, s.id) == 0:
            # worthless and unbacked: never attackable, never degenerate
            continue
        if can_attack(graph, stakes, w, s.id):
            out.append(s.id)
    return frozenset(out)


def attack_profit(graph: RestakingGraph, stakes: StakeVector, coalition: Iterable[str]) -> Fraction:
    """Value of M(W) minus the stake W burns. Profitable iff strictly positive."""
    w = _coalition(graph, coalition)
    if not w:
        return Fraction(0)
    gained = sum((graph.service(s).value for s in maximal_attack_set(graph, stakes, w)), Fraction(0))
    return gained - sum((stakes[v] for v in w), Fraction(0))
