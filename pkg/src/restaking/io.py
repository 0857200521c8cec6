"""JSON file formats and report serialisation.

Numbers are written as canonical ``"p/q"`` strings and read back exactly. JSON
numbers in input are accepted too and parsed from their decimal text, never
through a float.
"""

from __future__ import annotations

import json
import logging
from fractions import Fraction
from pathlib import Path

from .division import AugmentedDivision
from .errors import InputError
from .model import DivisionPlan, PoSInstance, RestakingGraph, Service, StakeVector, fmt_rat, to_rat
from .savings import PoSSReport, RSReport
from .security import SecurityVerdict, SufficiencyReport, Witness

log = logging.getLogger(__name__)

GRAPH_KEYS = {"services", "validators", "edges"}
SERVICE_KEYS = {"id", "value", "alpha"}
VALIDATOR_KEYS = {"id", "stake"}
EDGE_KEYS = {"service", "validator"}
POS_KEYS = {"protocols"}
PROTOCOL_KEYS = {"service", "value", "alpha", "allocations"}
ALLOC_KEYS = {"validator", "stake"}


def loads(text: str):
    try:
        return json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from None


def load(path) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return loads(text)


def dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _fields(obj, allowed: set, where: str, strict: bool, required: set | None = None) -> dict:
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        if strict:
            raise InputError(f"{where}: unknown fields {sorted(extra)}")
        log.warning("%s: ignoring unknown fields %s", where, sorted(extra))
    missing = (allowed if required is None else required) - set(obj)
    if missing:
        raise InputError(f"{where}: missing fields {sorted(missing)}")
    return obj


def _list(doc, key, where):
    val = doc.get(key)
    if not isinstance(val, list):
        raise InputError(f"{where}: '{key}' must be a list")
    return val


def graph_from_dict(doc, *, strict: bool = False) -> tuple[RestakingGraph, StakeVector]:
    _fields(doc, GRAPH_KEYS, "graph", strict)
    services = []
    for i, s in enumerate(_list(doc, "services", "graph")):
        _fields(s, SERVICE_KEYS, f"services[{i}]", strict)
        services.append(Service(str(s["id"]), to_rat(s["value"]), to_rat(s["alpha"])))
    validators, stakes = [], {}
    for i, v in enumerate(_list(doc, "validators", "graph")):
        _fields(v, VALIDATOR_KEYS, f"validators[{i}]", strict)
        validators.append(str(v["id"]))
        stakes[str(v["id"])] = to_rat(v["stake"])
    edges = []
    for i, e in enumerate(_list(doc, "edges", "graph")):
        _fields(e, EDGE_KEYS, f"edges[{i}]", strict)
        edges.append((str(e["service"]), str(e["validator"])))
    if len(set(edges)) != len(edges):
        raise InputError("graph: duplicate edges")
    graph = RestakingGraph.build(services, validators, edges)
    return graph, StakeVector(stakes)


def graph_to_dict(graph: RestakingGraph, stakes: StakeVector) -> dict:
    spos = {s: i for i, s in enumerate(graph.service_ids)}
    vpos = {v: i for i, v in enumerate(graph.validators)}
    return {
        "services": [{"id": s.id, "value": fmt_rat(s.value), "alpha": fmt_rat(s.alpha)} for s in graph.services],
        "validators": [{"id": v, "stake": fmt_rat(stakes[v])} for v in graph.validators],
        "edges": [{"service": s, "validator": v}
                  for s, v in sorted(graph.edges, key=lambda e: (spos[e[0]], vpos[e[1]]))],
    }


def pos_from_dict(doc, *, strict: bool = False) -> list[PoSInstance]:
    _fields(doc, POS_KEYS, "pos file", strict)
    out = []
    for i, p in enumerate(_list(doc, "protocols", "pos file")):
        _fields(p, PROTOCOL_KEYS, f"protocols[{i}]", strict)
        alloc = {}
        for k, a in enumerate(_list(p, "allocations", f"protocols[{i}]")):
            _fields(a, ALLOC_KEYS, f"protocols[{i}].allocations[{k}]", strict)
            v = str(a["validator"])
            if v in alloc:
                raise InputError(f"protocols[{i}]: validator {v} listed twice")
            alloc[v] = to_rat(a["stake"])
        out.append(PoSInstance(to_rat(p["value"]), to_rat(p["alpha"]), alloc, service=str(p["service"])))
    return out


def pos_to_dict(protocols) -> dict:
    return {"protocols": [
        {"service": p.service, "value": fmt_rat(p.value), "alpha": fmt_rat(p.alpha),
         "allocations": [{"validator": v, "stake": fmt_rat(c)} for v, c in p.allocation.items()]}
        for p in protocols
    ]}


def load_graph(path, *, strict: bool = False):
    return graph_from_dict(load(path), strict=strict)


def load_pos(path, *, strict: bool = False):
    return pos_from_dict(load(path), strict=strict)


def division_to_dict(div: AugmentedDivision) -> dict:
    return {
        "method": div.method,
        "extra": fmt_rat(div.extra),
        "base_total": fmt_rat(div.base_total),
        "stakes": [{"validator": v, "stake": fmt_rat(q)} for v, q in div.stakes.items()],
        "plan": [{"validator": v, "service": s, "stake": fmt_rat(c)}
                 for v, split in div.plan.splits.items() for s, c in split.items()],
        "trace": list(div.trace),
    }


def division_from_dict(doc) -> tuple[StakeVector, DivisionPlan]:
    _fields(doc, {"method", "extra", "base_total", "stakes", "plan", "trace"}, "plan file", False,
            required={"stakes", "plan"})
    stakes = StakeVector({str(x["validator"]): to_rat(x["stake"]) for x in doc["stakes"]})
    splits: dict[str, dict[str, Fraction]] = {v: {} for v in stakes}
    for x in doc["plan"]:
        splits.setdefault(str(x["validator"]), {})[str(x["service"])] = to_rat(x["stake"])
    return stakes, DivisionPlan(splits)


def witness_to_dict(w: Witness | None):
    if w is None:
        return None
    return {"validators": sorted(w.validators), "attacked": sorted(w.attacked), "profit": fmt_rat(w.profit)}


def verdict_to_dict(v: SecurityVerdict) -> dict:
    return {"secure": v.secure, "witness": witness_to_dict(v.witness)}


def sufficiency_to_dict(r: SufficiencyReport) -> dict:
    return {"holds": r.holds,
            "slack": {v: fmt_rat(x) for v, x in r.slack.items()},
            "required": {v: fmt_rat(x) for v, x in r.required.items()}}


def _opt(q):
    return None if q is None else fmt_rat(q)


def rs_report_to_dict(r: RSReport) -> dict:
    return {
        "total_stake": fmt_rat(r.total_stake),
        "bounds": [{"method": e.method, "extra": fmt_rat(e.extra), "ratio": fmt_rat(e.ratio),
                    "cap": e.cap_label, "cap_value": _opt(e.cap_value), "cap_approx": round(e.cap_float, 6),
                    "within_cap": e.within_cap, "verified": e.verified} for e in r.bounds],
        "best_upper": fmt_rat(r.best_upper),
        "oracle": _opt(r.oracle),
        "granularity": _opt(r.granularity),
        "lower_bound": _opt(r.lower_bound),
        "security_checked": r.security_checked,
    }


def poss_report_to_dict(r: PoSSReport) -> dict:
    return {
        "total_stake": fmt_rat(r.total_stake),
        "aggregated_secure": r.aggregated_secure,
        "witness": witness_to_dict(r.witness),
        "construction_extra": fmt_rat(r.construction_extra),
        "construction_ratio": fmt_rat(r.construction_ratio),
        "cap_max_degree": r.cap,
        "construction_secure": r.construction_secure,
        "oracle": _opt(r.oracle),
        "granularity": _opt(r.granularity),
    }
