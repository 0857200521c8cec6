"""Extremal families and seeded random instances."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapacityError, InputError
from .model import PoSInstance, RestakingGraph, Service, StakeVector, to_rat
from .security import DEFAULT_CAP, is_secure_exact, pos_is_secure, satisfies_sufficient_condition

log = logging.getLogger(__name__)

FAMILIES = ("rs-lower", "poss-lower", "random")

__all__ = [
    "FAMILIES",
    "GeneratorSpec",
    "GeneratedInstance",
    "gen_rs_lower_family",
    "gen_poss_lower_family",
    "gen_random",
    "gen_random_with_report",
    "gen_random_pos",
    "generate",
]


def gen_rs_lower_family(m: int) -> tuple[RestakingGraph, StakeVector]:
    """Secure graph whose restaking savings grow linearly in ``m``.

    ``m`` services worth 2 with alpha 1/(2m+1); ``m*m`` validators of stake
    1/m, ``m`` per service; one validator of stake 2m on every service.
    """
    if m < 1:
        raise InputError("m must be >= 1")
    big = m * m + 1
    services = [Service(f"s{s}", 2, Fraction(1, 2 * m + 1)) for s in range(1, m + 1)]
    validators = [f"v{i}" for i in range(1, big + 1)]
    edges = [(f"s{s}", f"v{big}") for s in range(1, m + 1)]
    edges += [(f"s{s}", f"v{(s - 1) * m + j}") for s in range(1, m + 1) for j in range(1, m + 1)]
    stakes = StakeVector({v: (Fraction(1, m) if i < m * m else Fraction(2 * m)) for i, v in enumerate(validators)})
    return RestakingGraph.build(services, validators, edges), stakes


def gen_poss_lower_family(m: int) -> list[PoSInstance]:
    """Secure protocols whose aggregate needs ``m - 1`` extra stake.

    Protocol ``s`` has value 1, alpha 1/(m+1), its own validator ``v{s}`` with
    stake 1 and the shared validator ``v{m+1}`` with stake 1/m.
    """
    if m < 1:
        raise InputError("m must be >= 1")
    shared = f"v{m + 1}"
    return [
        PoSInstance(1, Fraction(1, m + 1), {f"v{s}": 1, shared: Fraction(1, m)}, service=f"s{s}")
        for s in range(1, m + 1)
    ]


@dataclass(frozen=True)
class GeneratorSpec:
    """Everything a generator needs. Equal specs give identical instances."""

    family: str = "random"
    m: int = 3
    n: int = 6
    density: float = 0.4
    stake_range: tuple = (1, 8)
    value_range: tuple = (1, 6)
    alpha_range: tuple = ("1/4", "1/2")
    max_denominator: int = 12
    seed: int = 0
    force_secure: bool = False
    max_retries: int = 50
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family == "random":
            if self.n < 1 or self.m < 1:
                raise InputError("random instances need n >= 1 and m >= 1")
            if not (0 < self.density <= 1):
                raise InputError("density must lie in (0, 1]")
            if self.max_denominator < 1:
                raise InputError("max_denominator must be >= 1")
            lo, hi = (to_rat(x) for x in self.alpha_range)
            if not (0 < lo <= hi <= 1):
                raise InputError("alpha_range must satisfy 0 < lo <= hi <= 1")
            for name in ("stake_range", "value_range"):
                a, b = (to_rat(x) for x in getattr(self, name))
                if not (0 < a <= b):
                    raise InputError(f"{name} must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class GeneratedInstance:
    graph: RestakingGraph
    stakes: StakeVector
    method: str
    attempts: int


def _draw(rng: np.random.Generator, bounds, max_den: int) -> Fraction:
    # uniform over fractions k/q in [lo, hi] with a random denominator q <= max_den
    lo, hi = (to_rat(x) for x in bounds)
    q = int(rng.integers(1, max_den + 1))
    a = -((-lo.numerator * q) // lo.denominator)
    b = (hi.numerator * q) // hi.denominator
    if b < a:
        return lo
    return Fraction(int(rng.integers(a, b + 1)), q)


def _draw_graph(spec: GeneratorSpec, rng: np.random.Generator) -> tuple[RestakingGraph, StakeVector]:
    n, m = spec.n, spec.m
    services = [Service(f"s{j + 1}", _draw(rng, spec.value_range, spec.max_denominator),
                        _draw(rng, spec.alpha_range, spec.max_denominator)) for j in range(m)]
    validators = [f"v{i + 1}" for i in range(n)]
    adj = rng.random((m, n)) < spec.density
    for i in range(n):
        if not adj[:, i].any():
            adj[int(rng.integers(0, m)), i] = True
    for j in range(m):
        if not adj[j].any():
            adj[j, int(rng.integers(0, n))] = True
    edges = [(f"s{j + 1}", f"v{i + 1}") for j in range(m) for i in range(n) if adj[j, i]]
    stakes = StakeVector({v: _draw(rng, spec.stake_range, spec.max_denominator) for v in validators})
    return RestakingGraph.build(services, validators, edges), stakes


def _scale_to_sufficient(graph: RestakingGraph, stakes: StakeVector) -> StakeVector:
    # uniform scaling keeps every share fixed and raises each stake, so the per-validator slack only grows
    factor = 1
    while not satisfies_sufficient_condition(graph, stakes.scaled(factor)).holds:
        factor *= 2
    return stakes.scaled(factor)


def gen_random_with_report(spec: GeneratorSpec) -> GeneratedInstance:
    """Random instance plus how it was obtained.

    With ``force_secure`` the generator first rejection-samples (only when the
    exact check fits under ``spec.cap``) and otherwise, or once retries run
    out, doubles all stakes until the sufficient condition holds.
    """
    if spec.family != "random":
        raise InputError("gen_random needs family='random'")
    rng = np.random.default_rng(spec.seed)
    graph, stakes = _draw_graph(spec, rng)
    if not spec.force_secure:
        return GeneratedInstance(graph, stakes, "plain", 1)
    if spec.n <= spec.cap:
        for attempt in range(1, spec.max_retries + 1):
            if is_secure_exact(graph, stakes, cap=spec.cap).secure:
                return GeneratedInstance(graph, stakes, "rejection", attempt)
            if attempt < spec.max_retries:
                graph, stakes = _draw_graph(spec, rng)
        log.info("no secure draw in %d attempts (seed %d), scaling stakes", spec.max_retries, spec.seed)
    return GeneratedInstance(graph, _scale_to_sufficient(graph, stakes), "sufficient-scaling",
                             max(spec.max_retries, 1))


def gen_random(spec: GeneratorSpec) -> tuple[RestakingGraph, StakeVector]:
    inst = gen_random_with_report(spec)
    return inst.graph, inst.stakes


def gen_random_pos(spec: GeneratorSpec) -> list[PoSInstance]:
    """Random secure protocols over a shared validator pool.

    Protocols drawn insecure have their allocations doubled until the total
    reaches value/alpha, which makes them secure.
    """
    if spec.family != "random":
        raise InputError("gen_random_pos needs family='random'")
    rng = np.random.default_rng(spec.seed)
    out = []
    for j in range(spec.m):
        value = _draw(rng, spec.value_range, spec.max_denominator)
        alpha = _draw(rng, spec.alpha_range, spec.max_denominator)
        members = [i for i in range(spec.n) if rng.random() < spec.density]
        if not members:
            members = [int(rng.integers(0, spec.n))]
        alloc = {f"v{i + 1}": _draw(rng, spec.stake_range, spec.max_denominator) for i in members}
        pos = PoSInstance(value, alpha, alloc, service=f"s{j + 1}")
        if len(alloc) > spec.cap:
            raise CapacityError(f"protocol s{j + 1} has {len(alloc)} validators, cap is {spec.cap}")
        factor = 1
        while not pos_is_secure(pos, cap=spec.cap).secure:
            factor *= 2
            pos = PoSInstance(value, alpha, {v: c * factor for v, c in alloc.items()}, service=f"s{j + 1}")
        out.append(pos)
    return out


def generate(spec: GeneratorSpec):
    """Dispatch on ``spec.family``: a (graph, stakes) pair or a list of protocols."""
    if spec.family == "rs-lower":
        return gen_rs_lower_family(spec.m)
    if spec.family == "poss-lower":
        return gen_poss_lower_family(spec.m)
    return gen_random(spec)
