"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line; ``conftest.py`` prints them in the
terminal summary, so the verdicts appear at the end of any pytest run.
"""

import functools
import time
from fractions import Fraction

import pytest

from restaking.division import (
    construct_alpha_augmentation,
    construct_cover_augmentation,
    construct_maxdeg_augmentation,
    construct_sqrt_augmentation,
    proportional_division,
    verify_division,
)
from restaking.generators import (
    GeneratorSpec,
    gen_poss_lower_family,
    gen_random,
    gen_random_pos,
    gen_rs_lower_family,
)
from restaking.model import attack_profit, can_attack
from restaking.savings import (
    aggregate_pos,
    check_stake_value_inequality,
    poss_exact_oracle,
    poss_upper_construction,
    rs_exact_oracle,
    rs_family_lower_bound,
    rs_family_upper_certificate,
    within_cap,
)
from restaking.security import is_secure_exact, satisfies_sufficient_condition

RESULTS: dict[int, tuple[str, str]] = {}
AGGREGATES: list = []


def criterion(number: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                RESULTS[number] = ("FAIL", title)
                print(f"criterion {number:>2}: FAIL  {title}")
                raise
            RESULTS[number] = ("PASS", title)
            print(f"criterion {number:>2}: PASS  {title}")
        return run
    return wrap


def aggregate(protocols):
    out = aggregate_pos(protocols)
    AGGREGATES.append(out)
    return out


@criterion(1, "linear-savings family secure for m=2..6, each check under 10 s")
def test_c01_family_secure():
    for m in range(2, 7):
        g, st = gen_rs_lower_family(m)
        t0 = time.perf_counter()
        verdict = is_secure_exact(g, st, cap=g.n)
        elapsed = time.perf_counter() - t0
        assert verdict.secure, f"m={m}: {verdict.witness}"
        assert elapsed < 10, f"m={m} took {elapsed:.2f} s"


@criterion(2, "grid oracle on the m=3 family (g=1/3, budget 12) is at least 1/3")
def test_c02_oracle_lower_bound():
    g, st = gen_rs_lower_family(3)
    value = rs_exact_oracle(g, st, Fraction(1, 3), 12)
    assert value is not None
    assert value >= Fraction(1, 3) == rs_family_lower_bound(3)


@criterion(3, "family upper certificate verifies with ratio (2m^2-m)/(3m), ratio/m in [1/3, 1]")
def test_c03_upper_certificate():
    for m in range(1, 7):
        g, st = gen_rs_lower_family(m)
        cert = rs_family_upper_certificate(m)
        assert cert.stakes.dominates(st)
        assert verify_division(g, cert.stakes, cert.plan, cap=g.n).ok
        assert cert.ratio == Fraction(2 * m * m - m, 3 * m)
        if m >= 2:
            assert rs_family_lower_bound(m) <= cert.ratio
        if m >= 3:
            assert Fraction(1, 3) <= cert.ratio / m <= 1


def _random_secure(seed):
    n = 1 + seed % 10
    m = 1 + (seed // 10) % 6
    return gen_random(GeneratorSpec(n=n, m=m, seed=seed, force_secure=True))


@criterion(4, "200 secure random instances: every construction verifies within its cap")
def test_c04_constructions():
    failures = []
    for seed in range(200):
        g, st = _random_secure(seed)
        assert g.n <= 10 and g.m <= 6
        assert is_secure_exact(g, st).secure
        divs = [construct_maxdeg_augmentation(g, st), construct_cover_augmentation(g, st),
                construct_sqrt_augmentation(g, st), construct_alpha_augmentation(g, st)]
        if satisfies_sufficient_condition(g, st).holds:
            plan = proportional_division(g, st)
            if not verify_division(g, st, plan).ok:
                failures.append((seed, "proportional"))
        for div in divs:
            if not (div.stakes.dominates(st) and verify_division(g, div.stakes, div.plan).ok
                    and within_cap(g, div.method, div.ratio)):
                failures.append((seed, div.method))
    assert failures == []


@criterion(5, "200 instances meeting the sufficient condition: proportional division secure, totals >= value/alpha")
def test_c05_proportional():
    failures = []
    for seed in range(200):
        n = 1 + seed % 10
        m = 1 + (seed // 10) % 6
        g, st = gen_random(GeneratorSpec(n=n, m=m, seed=1000 + seed))
        while not satisfies_sufficient_condition(g, st).holds:
            st = st.scaled(2)
        plan = proportional_division(g, st)
        if not verify_division(g, st, plan).ok:
            failures.append((seed, "insecure"))
        for s in g.services:
            if plan.to_pos(g, s.id).total < s.value / s.alpha:
                failures.append((seed, s.id))
    assert failures == []


@criterion(6, "sufficient condition on the family: small validators short by factor 2, hub needs 4m^2")
def test_c06_violation_factors():
    for m in range(2, 7):
        g, st = gen_rs_lower_family(m)
        rep = satisfies_sufficient_condition(g, st)
        hub = g.validators[-1]
        for v in g.validators[:-1]:
            assert rep.required[v] / st[v] == 2
        assert rep.required[hub] == 4 * m * m


@criterion(7, "PoS family m=2,3: aggregate insecure via the shared validator, oracle extra m-1, ratio (m-1)/(m+1)")
def test_c07_poss_family():
    for m in (2, 3):
        g, st = aggregate(gen_poss_lower_family(m))
        verdict = is_secure_exact(g, st)
        assert not verdict.secure
        assert verdict.witness.validators == {f"v{m + 1}"}
        ratio = poss_exact_oracle(g, st, 1)
        assert ratio * st.total == m - 1
        assert ratio == Fraction(m - 1, m + 1)


@criterion(8, "100 aggregated instances: upper construction secure, extra/T(sigma) <= max service degree")
def test_c08_poss_upper():
    failures = []
    for seed in range(100):
        prots = gen_random_pos(GeneratorSpec(n=2 + seed % 8, m=1 + seed % 5, seed=seed))
        g, st = aggregate(prots)
        raised = poss_upper_construction(g, st)
        ok = is_secure_exact(g, raised).secure
        ok &= (raised.total - st.total) / st.total <= g.max_service_degree()
        if not ok:
            failures.append(seed)
    assert failures == []


@criterion(9, "total stake covers total value on every aggregate built in this run")
def test_c09_lemma():
    if not AGGREGATES:  # run on its own: rebuild the aggregates the other criteria use
        for m in (2, 3):
            aggregate(gen_poss_lower_family(m))
        for seed in range(100):
            aggregate(gen_random_pos(GeneratorSpec(n=2 + seed % 8, m=1 + seed % 5, seed=seed)))
    assert len(AGGREGATES) >= 102
    assert all(check_stake_value_inequality(g, st) for g, st in AGGREGATES)


@criterion(10, "pruned search agrees with full enumeration on 500 instances, n <= 12")
def test_c10_pruning():
    disagreements = []
    for seed in range(500):
        n = 1 + seed % 12
        m = 1 + (seed // 12) % 5
        g, st = gen_random(GeneratorSpec(n=n, m=m, seed=5000 + seed, density=0.5))
        if is_secure_exact(g, st).secure != is_secure_exact(g, st, prune=False).secure:
            disagreements.append(seed)
    assert disagreements == []


@criterion(11, "share exactly alpha cannot attack; profit exactly 0 is not profitable")
def test_c11_strictness():
    from conftest import build
    # v1 holds exactly 1/3 of s
    g, st = build({"s": (5, "1/3")}, {"v1": 1, "v2": 2}, "s:v1 s:v2")
    assert not can_attack(g, st, {"v1"}, "s")
    assert can_attack(g, st, {"v2"}, "s")
    # v2 attacks s worth exactly its stake
    g, st = build({"s": (2, "1/3")}, {"v1": 1, "v2": 2}, "s:v1 s:v2")
    assert can_attack(g, st, {"v2"}, "s")
    assert attack_profit(g, st, {"v2"}) == 0
    assert is_secure_exact(g, st).secure
