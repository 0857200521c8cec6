import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from restaking import accel
from restaking.generators import GeneratorSpec, gen_random
from restaking.model import RestakingGraph, Service, StakeVector

BACKENDS = ["python"] + (["numba"] if accel.numba is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def build(services, stakes, edges):
    """``services``: {id: (value, alpha)}; ``stakes``: {id: stake}; ``edges``: "s1:v1 s1:v2 ..."."""
    svc = [Service(s, Fraction(v), Fraction(a)) for s, (v, a) in services.items()]
    pairs = [tuple(e.split(":")) for e in edges.split()]
    graph = RestakingGraph.build(svc, list(stakes), pairs)
    return graph, StakeVector({v: Fraction(x) for v, x in stakes.items()})


def small_random(seed, n=5, m=3, **kw):
    return gen_random(GeneratorSpec(n=n, m=m, seed=seed, **kw))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        verdict, title = mod.RESULTS[k]
        terminalreporter.write_line(f"criterion {k:>2}: {verdict}  {title}")
