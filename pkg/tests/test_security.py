from fractions import Fraction

import pytest

import oracles
from conftest import build, small_random
from restaking.errors import CapacityError, DegenerateInputError
from restaking.generators import gen_rs_lower_family
from restaking.model import PoSInstance, attack_profit, maximal_attack_set
from restaking.security import (
    SecurityVerdict,
    Witness,
    is_secure_exact,
    min_attacking_subset,
    pos_is_secure,
    satisfies_sufficient_condition,
)


def test_single_validator_insecure(backend):
    g, st = build({"s": (2, "1/2")}, {"a": 1}, "s:a")
    v = is_secure_exact(g, st, backend=backend)
    assert not v.secure
    assert v.witness == Witness(frozenset({"a"}), frozenset({"s"}), Fraction(1))


def test_single_validator_secure_when_stake_covers_value(backend):
    g, st = build({"s": (2, "1/2")}, {"a": 2}, "s:a")
    assert is_secure_exact(g, st, backend=backend).secure


def test_shared_validator_attacks_everything(backend):
    # the hub alone controls both services and their combined value beats its stake
    g, st = build({"s1": (1, "1/3"), "s2": (1, "1/3")},
                  {"v1": 1, "v2": 1, "v3": Fraction(3, 2)},
                  "s1:v1 s1:v3 s2:v2 s2:v3")
    v = is_secure_exact(g, st, backend=backend)
    assert not v.secure
    assert v.witness.validators == {"v3"}
    assert v.witness.attacked == {"s1", "s2"}
    assert v.witness.profit == Fraction(1, 2)


def test_zero_value_services_are_ignored(backend):
    g, st = build({"s1": (0, "1/2"), "s2": (1, "1/2")}, {"a": 0, "b": 2}, "s1:a s2:b")
    assert is_secure_exact(g, st, backend=backend).secure


def test_valued_service_without_stake_is_degenerate(backend):
    g, st = build({"s": (1, "1/2")}, {"a": 0}, "s:a")
    with pytest.raises(DegenerateInputError):
        is_secure_exact(g, st, backend=backend)


def test_cap():
    g, st = gen_rs_lower_family(5)
    with pytest.raises(CapacityError):
        is_secure_exact(g, st)
    assert is_secure_exact(g, st, cap=26).secure


def test_verdict_consistency():
    with pytest.raises(ValueError):
        SecurityVerdict(True, Witness(frozenset({"a"}), frozenset(), Fraction(1)))
    with pytest.raises(ValueError):
        SecurityVerdict(False)


@pytest.mark.parametrize("seed", range(60))
def test_matches_brute_force(seed, backend):
    g, st = small_random(seed, n=2 + seed % 6, m=1 + seed % 4)
    want = oracles.brute_secure(g, st)
    got = is_secure_exact(g, st, backend=backend)
    assert got.secure == want
    assert is_secure_exact(g, st, prune=False, backend=backend).secure == want
    if not want:
        w = got.witness
        assert attack_profit(g, st, w.validators) == w.profit > 0
        assert maximal_attack_set(g, st, w.validators) == w.attacked
        # inclusion-minimal: dropping anyone kills the profit
        for v in w.validators:
            assert oracles.profit(g, st, w.validators - {v}) <= 0


@pytest.mark.parametrize("seed", range(30))
def test_exhaustive_finds_max_profit(seed, backend):
    g, st = small_random(seed, n=6, m=3)
    best = oracles.brute_best_profit(g, st)
    v = is_secure_exact(g, st, exhaustive=True, backend=backend)
    if best <= 0:
        assert v.secure
    else:
        assert v.witness.profit == best


def test_rs_family_secure_and_witness_free(backend):
    for m in (1, 2, 3):
        g, st = gen_rs_lower_family(m)
        assert is_secure_exact(g, st, backend=backend).secure
    for m in (1, 2):
        assert oracles.brute_secure(*gen_rs_lower_family(m))


def test_huge_numbers_use_exact_path(backend):
    big = Fraction(10**30, 3)
    g, st = build({"s": (big * 2, "1/2")}, {"a": big, "b": big + Fraction(1, 10**20)}, "s:a s:b")
    # b alone holds slightly more than half and value 2*big exceeds its stake
    v = is_secure_exact(g, st, backend=backend)
    assert not v.secure and v.witness.validators == {"b"}


# sufficient condition

def test_sufficient_condition_values():
    g, st = build({"s1": (1, "1/2"), "s2": (1, "1/4")}, {"a": 2, "b": 2}, "s1:a s1:b s2:b")
    r = satisfies_sufficient_condition(g, st)
    # s1 needs 2 spread over 4, s2 needs 4 all on b
    assert r.required == {"a": 1, "b": 5}
    assert r.slack == {"a": 1, "b": -3}
    assert not r.holds


@pytest.mark.parametrize("seed", range(40))
def test_sufficient_implies_secure(seed):
    g, st = small_random(seed, n=5, m=3)
    st = st.scaled(4)
    if satisfies_sufficient_condition(g, st).holds:
        assert oracles.brute_secure(g, st)


def test_sufficient_condition_rs_family():
    g, st = gen_rs_lower_family(3)
    r = satisfies_sufficient_condition(g, st)
    assert not r.holds
    assert r.slack["v1"] == Fraction(-1, 3)
    assert r.required["v10"] == 36


# single protocols

@pytest.mark.parametrize("alloc,value,alpha,secure", [
    ({"a": 1, "b": 1}, 2, Fraction(1, 3), False),
    ({"a": 1, "b": 1}, 1, Fraction(1, 3), True),
    ({"a": 1, "b": 1}, 2, Fraction(1, 2), True),  # any attack needs both, which costs 2
    ({"a": 3}, 2, Fraction(1, 2), True),
    ({"a": 1, "b": 1, "c": 1}, Fraction(5, 2), Fraction(1, 2), False),
])
def test_pos_is_secure(alloc, value, alpha, secure, backend):
    p = PoSInstance(value, alpha, {k: Fraction(x) for k, x in alloc.items()})
    assert pos_is_secure(p, backend=backend).secure is secure
    assert oracles.brute_pos_secure(p.value, p.alpha, p.allocation) is secure


@pytest.mark.parametrize("seed", range(40))
def test_min_attacking_subset_matches_brute_force(seed, backend):
    import numpy as np
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 8))
    alloc = {f"v{i}": Fraction(int(rng.integers(0, 9)), int(rng.integers(1, 5))) for i in range(d)}
    alpha = Fraction(int(rng.integers(1, 4)), 4)
    if sum(alloc.values()) == 0:
        return
    p = PoSInstance(1, alpha, alloc)
    got = min_attacking_subset(p, backend=backend)
    want = oracles.brute_min_attack_cost({v: c for v, c in alloc.items() if c > 0}, alpha)
    assert (None if got is None else got[1]) == want
    if got is not None:
        assert sum(alloc[v] for v in got[0]) > alpha * p.total


def test_pos_edge_cases():
    assert pos_is_secure(PoSInstance(0, Fraction(1, 2), {})).secure
    with pytest.raises(DegenerateInputError):
        pos_is_secure(PoSInstance(1, Fraction(1, 2), {"a": 0}))
    v = pos_is_secure(PoSInstance(2, Fraction(1, 3), {"a": 1, "b": 1}))
    assert v.witness.validators == {"a"} and v.witness.profit == 1
