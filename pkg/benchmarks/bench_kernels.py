"""Time the numba kernels against the pure Python/numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Compilation is done once up front and reported separately. Every case checks
that both backends return the same answer before timings are printed.
"""

from __future__ import annotations

import argparse
import time
from fractions import Fraction

from restaking import accel
from restaking.division import compute_cover_K
from restaking.generators import GeneratorSpec, gen_random, gen_rs_lower_family
from restaking.savings import rs_oracle_extra
from restaking.security import is_secure_exact


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def cases(quick: bool):
    fam = {m: gen_rs_lower_family(m) for m in (3, 4, 5)}
    dense = gen_random(GeneratorSpec(n=12 if quick else 16, m=4, seed=7, density=0.6))
    wide = gen_random(GeneratorSpec(n=10, m=12 if quick else 16, seed=3, density=0.3))
    rich = gen_random(GeneratorSpec(n=22, m=6, seed=2, density=0.5, value_range=(4, 12)))
    yield "branch and bound, family m=4 (n=17)", lambda b: is_secure_exact(*fam[4], cap=40, backend=b).secure
    if not quick:
        yield "branch and bound, family m=5 (n=26)", lambda b: is_secure_exact(*fam[5], cap=40, backend=b).secure
    yield ("max-profit search, random n=22",
           lambda b: is_secure_exact(*rich, exhaustive=True, backend=b).witness.profit)
    yield (f"full enumeration, random n={dense[0].n}",
           lambda b: is_secure_exact(*dense, prune=False, backend=b).secure)
    yield (f"exact cover K, random m={wide[0].m}", lambda b: compute_cover_K(wide[0], backend=b).K)
    yield "grid oracle, family m=3 (g=1/3)", lambda b: rs_oracle_extra(*fam[3], Fraction(1, 3), 12, backend=b)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller cases, for smoke runs")
    args = ap.parse_args()
    if accel.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    t0 = time.perf_counter()
    for name in ("coalition_search", "coalition_enumerate", "min_incidence_cover", "grid_secure_table",
                 "min_exceeding_subset"):
        accel.kernel(name, "numba")
    g, st = gen_rs_lower_family(2)
    is_secure_exact(g, st, backend="numba")
    is_secure_exact(g, st, exhaustive=True, backend="numba")
    is_secure_exact(g, st, prune=False, backend="numba")
    compute_cover_K(g, backend="numba")
    rs_oracle_extra(g, st, Fraction(1, 2), 2, backend="numba")
    print(f"numba warm-up (compile or cache load): {time.perf_counter() - t0:.2f} s\n")

    print(f"{'case':<40} {'numba':>10} {'python':>10} {'speedup':>9}")
    for label, fn in cases(args.quick):
        a, ta = best_of(lambda: fn("numba"), args.repeat)
        b, tb = best_of(lambda: fn("python"), 1 if tb_slow(label) else args.repeat)
        if a != b:
            raise SystemExit(f"{label}: backends disagree ({a!r} vs {b!r})")
        print(f"{label:<40} {ta * 1e3:>8.1f}ms {tb * 1e3:>8.1f}ms {tb / ta:>8.1f}x")


def tb_slow(label: str) -> bool:
    return "oracle" in label or "m=5" in label


if __name__ == "__main__":
    main()
