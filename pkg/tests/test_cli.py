import json

import pytest
from click.testing import CliRunner

from restaking import io
from restaking.cli import main
from restaking.division import verify_division
from restaking.generators import GeneratorSpec, gen_poss_lower_family, gen_random, gen_rs_lower_family


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def go(*args):
        return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)
    return go


@pytest.fixture
def family3(tmp_path):
    path = tmp_path / "g3.json"
    path.write_text(io.dumps(io.graph_to_dict(*gen_rs_lower_family(3))))
    return path


@pytest.fixture
def poss2(tmp_path):
    path = tmp_path / "p2.json"
    path.write_text(io.dumps(io.pos_to_dict(gen_poss_lower_family(2))))
    return path


def test_check_family(run, family3):
    r = run("check", family3)
    assert r.exit_code == 0
    assert "verdict: secure" in r.output and "sufficient condition: fails" in r.output
    assert "v10: required 36  slack -30" in r.output


def test_check_json(run, family3):
    r = run("check", family3, "--json")
    doc = json.loads(r.output)
    assert doc["secure"] is True and doc["sufficiency"]["slack"]["v1"] == "-1/3"


def test_check_insecure(run, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"services": [{"id": "s", "value": "2", "alpha": "1/2"}],
                             "validators": [{"id": "a", "stake": "1"}],
                             "edges": [{"service": "s", "validator": "a"}]}))
    r = run("check", p)
    assert r.exit_code == 1 and "coalition {a}" in r.output


def test_check_alpha_zero(run, tmp_path, family3):
    bad = tmp_path / "bad.json"
    bad.write_text(family3.read_text().replace('"1/7"', '"0"'))
    assert run("check", bad).exit_code == 2


def test_check_capacity(run, tmp_path):
    p = tmp_path / "big.json"
    p.write_text(io.dumps(io.graph_to_dict(*gen_random(GeneratorSpec(n=30, m=3, seed=1, force_secure=True)))))
    assert run("check", p).exit_code == 3
    r = run("check", p, "--sufficient-only")
    assert r.exit_code == 0 and "verdict: secure" in r.output


def test_check_sufficient_only_undecided(run, family3):
    r = run("check", family3, "--sufficient-only")
    assert r.exit_code == 3 and "undecided" in r.output


def test_check_strict(run, tmp_path, family3):
    doc = json.loads(family3.read_text())
    doc["extra"] = 1
    p = tmp_path / "x.json"
    p.write_text(json.dumps(doc))
    assert run("check", p).exit_code == 0
    assert run("check", p, "--strict").exit_code == 2


def test_divide_sqrt(run, family3, tmp_path):
    out = tmp_path / "plan.json"
    r = run("divide", family3, "--method", "sqrt", "--out", out)
    assert r.exit_code == 0
    assert "peeled services ['s1']" in r.output and "ratio: 4/3" in r.output
    stakes, plan = io.division_from_dict(io.load(out))
    g, _ = gen_rs_lower_family(3)
    assert verify_division(g, stakes, plan).ok


@pytest.mark.parametrize("method", ["maxdeg", "cover", "alpha"])
def test_divide_constructions(run, family3, method):
    r = run("divide", family3, "--method", method, "--json")
    doc = json.loads(r.output)
    assert r.exit_code == 0 and doc["verified"] and doc["within_cap"]


def test_divide_proportional(run, family3, tmp_path):
    assert run("divide", family3, "--method", "proportional").exit_code == 2
    g, st = gen_rs_lower_family(3)
    p = tmp_path / "rich.json"
    p.write_text(io.dumps(io.graph_to_dict(g, st.scaled(6))))
    r = run("divide", p, "--method", "proportional")
    assert r.exit_code == 0 and "extra stake: 0" in r.output


def test_divide_insecure_input(run, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"services": [{"id": "s", "value": "2", "alpha": "1/2"}],
                             "validators": [{"id": "a", "stake": "1"}],
                             "edges": [{"service": "s", "validator": "a"}]}))
    assert run("divide", p, "--method", "maxdeg").exit_code == 2


def test_savings_rs(run, family3):
    r = run("savings", family3, "--kind", "rs", "--oracle", "--granularity", "1/3", "--json")
    doc = json.loads(r.output)
    assert r.exit_code == 0
    assert doc["lower_bound"] == "1/3" and doc["oracle"] == "5/9" and doc["granularity"] == "1/3"
    plain = json.loads(run("savings", family3, "--kind", "rs", "--json").output)
    assert "oracle" not in plain and len(plain["bounds"]) == 4


def test_savings_poss(run, poss2):
    r = run("savings", poss2, "--kind", "poss", "--oracle")
    assert r.exit_code == 0
    assert "oracle (g=1): extra 1 ratio 1/3" in r.output


def test_savings_rs_insecure(run, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"services": [{"id": "s", "value": "2", "alpha": "1/2"}],
                             "validators": [{"id": "a", "stake": "1"}],
                             "edges": [{"service": "s", "validator": "a"}]}))
    r = run("savings", p, "--kind", "rs", "--json")
    assert r.exit_code == 1 and json.loads(r.output)["witness"]["validators"] == ["a"]


def test_generate_family_file(run, tmp_path):
    out = tmp_path / "g.json"
    r = run("generate", "--family", "rs-lower", "--m", 3, "--out", out)
    assert r.exit_code == 0 and "n=10 m=3 T(sigma)=9 T(pi)=6" in r.output
    g, st = io.load_graph(out)
    g0, st0 = gen_rs_lower_family(3)
    assert g == g0 and dict(st) == dict(st0)


def test_generate_deterministic(run, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("generate", "--family", "random", "--seed", 9, "--force-secure", "--out", a)
    run("generate", "--family", "random", "--seed", 9, "--force-secure", "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_generate_poss_and_pos(run, tmp_path):
    out = tmp_path / "p.json"
    assert run("generate", "--family", "poss-lower", "--m", 2, "--out", out).exit_code == 0
    assert len(io.load_pos(out)) == 2
    assert run("generate", "--family", "random", "--pos", "--out", out).exit_code == 0
    assert run("generate", "--family", "random", "--m", 0).exit_code == 2


def test_aggregate(run, poss2, tmp_path):
    out = tmp_path / "agg.json"
    r = run("aggregate", poss2, "--out", out)
    assert r.exit_code == 0
    assert "verdict: insecure" in r.output and "coalition {v3}" in r.output
    g, _ = io.load_graph(out)
    assert g.n == 3


def test_aggregate_m3_lemma(run, tmp_path):
    p = tmp_path / "p3.json"
    p.write_text(io.dumps(io.pos_to_dict(gen_poss_lower_family(3))))
    assert "T(sigma)=4 >= T(pi)=3" in run("aggregate", p).output


def test_aggregate_refuses_insecure_protocol(run, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"protocols": [{"service": "s", "value": "2", "alpha": "1/3", "allocations": [
        {"validator": "a", "stake": "1"}, {"validator": "b", "stake": "1"}]}]}))
    r = run("aggregate", p, "--json")
    assert r.exit_code == 1 and json.loads(r.output)["witness"]["validators"] == ["a"]


def test_structured_output_round_trips(run, tmp_path):
    out = tmp_path / "g.json"
    run("generate", "--family", "random", "--seed", 3, "--out", out)
    g, st = io.load_graph(out)
    assert io.dumps(io.graph_to_dict(g, st)) == out.read_text()
