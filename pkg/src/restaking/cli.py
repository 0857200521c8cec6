"""Command-line front end.

Exit codes: 0 secure or success, 1 insecure, 2 input error, 3 capacity.
"""

from __future__ import annotations

import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import click

from . import io
from .division import (
    construct_alpha_augmentation,
    construct_cover_augmentation,
    construct_maxdeg_augmentation,
    construct_sqrt_augmentation,
    AugmentedDivision,
    proportional_division,
    verify_division,
)
from .errors import CapacityError, InputError, InsecureError, RestakingError, ValidationError
from .generators import GeneratorSpec, gen_poss_lower_family, gen_random_pos, gen_rs_lower_family, gen_random
from .model import fmt_rat, to_rat
from .savings import (
    aggregate_pos,
    analytic_cap,
    check_stake_value_inequality,
    poss_report,
    rs_report,
    within_cap,
)
from .security import DEFAULT_CAP, is_secure_exact, satisfies_sufficient_condition

EXIT_OK, EXIT_INSECURE, EXIT_INPUT, EXIT_CAPACITY = 0, 1, 2, 3

CONSTRUCTIONS = {
    "maxdeg": construct_maxdeg_augmentation,
    "cover": construct_cover_augmentation,
    "sqrt": construct_sqrt_augmentation,
    "alpha": construct_alpha_augmentation,
}


class Abort(Exception):
    def __init__(self, code: int, message: str, payload: dict | None = None):
        super().__init__(message)
        self.code = code
        self.payload = payload or {}


def _approx(q: Fraction) -> str:
    return f"{fmt_rat(q)} (~{float(q):.6g})"


def _witness_text(w) -> str:
    return (f"coalition {{{', '.join(sorted(w.validators))}}} attacks {{{', '.join(sorted(w.attacked))}}}"
            f" for profit {fmt_rat(w.profit)}")


def _emit(as_json: bool, doc: dict, lines: list[str]) -> None:
    if as_json:
        click.echo(json.dumps(doc, indent=2))
    else:
        for line in lines:
            click.echo(line)


def _failure(exc: Exception) -> tuple[int, str, dict]:
    if isinstance(exc, Abort):
        return exc.code, str(exc), exc.payload
    if isinstance(exc, InsecureError):
        w = exc.verdict.witness if exc.verdict is not None else None
        return EXIT_INSECURE, str(exc), {"witness": io.witness_to_dict(w)}
    if isinstance(exc, CapacityError):
        return EXIT_CAPACITY, str(exc), {}
    if isinstance(exc, ValidationError):
        return EXIT_INPUT, f"{exc}: {'; '.join(exc.offenders)}", {}
    return EXIT_INPUT, str(exc), {}


def _run(as_json: bool, body) -> None:
    """Call ``body`` and translate library errors into exit codes."""
    try:
        code = body()
    except (Abort, RestakingError) as exc:
        code, msg, payload = _failure(exc)
        if as_json:
            click.echo(json.dumps({"error": msg, "exit_code": code, **payload}, indent=2))
        else:
            click.echo(f"error: {msg}", err=True)
            w = payload.get("witness")
            if w:
                click.echo(f"witness: {{{', '.join(w['validators'])}}} attacks {{{', '.join(w['attacked'])}}}"
                           f" for profit {w['profit']}", err=True)
    sys.exit(code)


def _write(path: str | None, doc: dict) -> None:
    text = io.dumps(doc)
    if path is None or path == "-":
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


json_flag = click.option("--json", "as_json", is_flag=True, help="Structured JSON output.")
strict_flag = click.option("--strict", is_flag=True, help="Reject unknown fields in input files.")
cap_flag = click.option("--cap", type=int, default=DEFAULT_CAP, show_default=True,
                        help="Largest validator count for exact checks.")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Security analysis of restaking graphs and PoS protocols."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--sufficient-only", is_flag=True, help="Only the linear-time sufficient condition.")
@cap_flag
@strict_flag
@json_flag
def check(path, sufficient_only, cap, strict, as_json):
    """Decide whether a restaking graph is secure.

    With --sufficient-only the exit code is 0 when the condition certifies
    security and 3 when it does not (security left undecided).
    """
    def body():
        graph, stakes = io.load_graph(path, strict=strict)
        suff = satisfies_sufficient_condition(graph, stakes)
        doc = {"n": graph.n, "m": graph.m, "sufficiency": io.sufficiency_to_dict(suff)}
        lines = [f"validators: {graph.n}  services: {graph.m}",
                 f"sufficient condition: {'holds' if suff.holds else 'fails'}"]
        for v in graph.validators:
            lines.append(f"  {v}: required {fmt_rat(suff.required[v])}  slack {fmt_rat(suff.slack[v])}")
        if sufficient_only:
            verdict_code = EXIT_OK if suff.holds else EXIT_CAPACITY
            doc["verdict"] = "secure" if suff.holds else "undecided"
            lines.append(f"verdict: {doc['verdict']}")
        else:
            if graph.n > cap:
                raise CapacityError(f"{graph.n} validators exceeds the exact-check cap of {cap};"
                                    " raise --cap or use --sufficient-only")
            verdict = is_secure_exact(graph, stakes, cap=cap)
            doc.update(io.verdict_to_dict(verdict))
            doc["verdict"] = "secure" if verdict.secure else "insecure"
            lines.append(f"verdict: {doc['verdict']}")
            if verdict.witness is not None:
                lines.append("witness: " + _witness_text(verdict.witness))
            verdict_code = EXIT_OK if verdict.secure else EXIT_INSECURE
        _emit(as_json, doc, lines)
        return verdict_code

    _run(as_json, body)


@main.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--method", type=click.Choice(["proportional", *CONSTRUCTIONS]), required=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the augmented stakes and plan here.")
@cap_flag
@strict_flag
@json_flag
def divide(path, method, out, cap, strict, as_json):
    """Build a secure stake division, raising stakes if the method requires it."""
    def body():
        graph, stakes = io.load_graph(path, strict=strict)
        if method == "proportional":
            suff = satisfies_sufficient_condition(graph, stakes)
            if not suff.holds:
                short = [f"{v} (slack {fmt_rat(x)})" for v, x in suff.slack.items() if x < 0]
                raise Abort(EXIT_INPUT, "sufficient condition fails at " + ", ".join(short))
            div = AugmentedDivision(stakes, proportional_division(graph, stakes), Fraction(0),
                                    "proportional", stakes.total)
        else:
            if graph.n <= cap:
                verdict = is_secure_exact(graph, stakes, cap=cap)
                if not verdict.secure:
                    raise Abort(EXIT_INPUT, "input graph is not secure: " + _witness_text(verdict.witness),
                                {"witness": io.witness_to_dict(verdict.witness)})
            else:
                logging.getLogger(__name__).warning("security of the input not checked (n > cap)")
            div = CONSTRUCTIONS[method](graph, stakes)
        check = verify_division(graph, div.stakes, div.plan, cap=cap)
        if not check.ok:
            raise Abort(EXIT_INSECURE, f"division failed verification for {', '.join(check.failing)}")
        label, cap_value, cap_float = analytic_cap(graph, method)
        ratio = div.ratio
        within = within_cap(graph, method, ratio)
        doc = {**io.division_to_dict(div), "ratio": fmt_rat(ratio), "cap": label,
               "cap_value": None if cap_value is None else fmt_rat(cap_value),
               "cap_approx": round(cap_float, 6), "within_cap": within, "verified": True}
        lines = [f"method: {method}", f"extra stake: {_approx(div.extra)}", f"ratio: {_approx(ratio)}",
                 f"cap {label}: {fmt_rat(cap_value) if cap_value is not None else f'{cap_float:.6g}'}"
                 f" ({'within' if within else 'EXCEEDED'})", "verified: yes"]
        lines += [f"trace: {t}" for t in div.trace]
        if out:
            _write(out, io.division_to_dict(div))
            lines.append(f"wrote {out}")
        _emit(as_json, doc, lines)
        return EXIT_OK

    _run(as_json, body)


@main.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--kind", type=click.Choice(["rs", "poss"]), required=True)
@click.option("--oracle", is_flag=True, help="Also run the grid oracle.")
@click.option("--granularity", default="1", show_default=True, help="Grid step, e.g. 1/3.")
@click.option("--budget", default=None, help="Largest extra stake the oracle explores.")
@cap_flag
@strict_flag
@json_flag
def savings(path, kind, oracle, granularity, budget, cap, strict, as_json):
    """Report restaking savings (rs) or PoS savings (poss, PoSFile input)."""
    def body():
        g = to_rat(granularity)
        b = None if budget is None else to_rat(budget)
        if g <= 0:
            raise InputError("granularity must be positive")
        if kind == "rs":
            graph, stakes = io.load_graph(path, strict=strict)
            rep = rs_report(graph, stakes, oracle=oracle, granularity=g, budget=b, cap=cap)
            doc = io.rs_report_to_dict(rep)
            if not oracle:
                for key in ("oracle", "granularity"):
                    doc.pop(key)
            lines = [f"total stake: {fmt_rat(rep.total_stake)}"]
            for e in rep.bounds:
                capv = fmt_rat(e.cap_value) if e.cap_value is not None else f"{e.cap_float:.6g}"
                lines.append(f"  {e.method:<12} extra {fmt_rat(e.extra):<10} ratio {_approx(e.ratio):<24}"
                             f" cap {e.cap_label} = {capv} {'ok' if e.within_cap else 'EXCEEDED'}"
                             f"{'' if e.verified else ' UNVERIFIED'}")
            lines.append(f"best constructive ratio: {_approx(rep.best_upper)}")
            if rep.lower_bound is not None:
                lines.append(f"family lower bound: {_approx(rep.lower_bound)}")
            if oracle:
                lines.append(f"oracle (g={fmt_rat(g)}): "
                             + (_approx(rep.oracle) if rep.oracle is not None else "none within budget"))
        else:
            protocols = io.load_pos(path, strict=strict)
            graph, stakes = aggregate_pos(protocols, cap=cap)
            rep = poss_report(graph, stakes, oracle=oracle, granularity=g, budget=b, cap=cap)
            doc = io.poss_report_to_dict(rep)
            if oracle:
                doc["oracle_extra"] = None if rep.oracle is None else fmt_rat(rep.oracle * rep.total_stake)
            else:
                for key in ("oracle", "granularity"):
                    doc.pop(key)
            secure = {True: "secure", False: "insecure", None: "not checked"}
            lines = [f"total stake: {fmt_rat(rep.total_stake)}",
                     f"aggregate: {secure[rep.aggregated_secure]}"]
            if rep.witness is not None:
                lines.append("witness: " + _witness_text(rep.witness))
            lines.append(f"upper construction: extra {fmt_rat(rep.construction_extra)} ratio "
                         f"{_approx(rep.construction_ratio)} cap max_s d(s) = {rep.cap}, "
                         f"{secure[rep.construction_secure]}")
            if oracle:
                lines.append(f"oracle (g={fmt_rat(g)}): " + (
                    f"extra {fmt_rat(rep.oracle * rep.total_stake)} ratio {_approx(rep.oracle)}"
                    if rep.oracle is not None else "none within budget"))
        _emit(as_json, doc, lines)
        return EXIT_OK

    _run(as_json, body)


@main.command()
@click.option("--family", type=click.Choice(["rs-lower", "poss-lower", "random"]), required=True)
@click.option("--m", "m", type=int, default=3, show_default=True, help="Number of services.")
@click.option("--n", "n", type=int, default=6, show_default=True, help="Validators (random family).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--density", type=float, default=0.4, show_default=True)
@click.option("--force-secure", is_flag=True, help="Random family: only emit secure graphs.")
@click.option("--pos", "as_pos", is_flag=True, help="Random family: emit a PoSFile of secure protocols.")
@click.option("--out", type=click.Path(dir_okay=False), help="Output file (stdout when omitted).")
@json_flag
def generate(family, m, n, seed, density, force_secure, as_pos, out, as_json):
    """Write an extremal-family or seeded random instance."""
    def body():
        if family == "rs-lower":
            graph, stakes = gen_rs_lower_family(m)
            doc = io.graph_to_dict(graph, stakes)
            summary = (graph.n, graph.m, stakes.total, graph.total_value())
        else:
            if family == "poss-lower":
                protocols = gen_poss_lower_family(m)
            elif as_pos:
                protocols = gen_random_pos(GeneratorSpec(m=m, n=n, seed=seed, density=density))
            else:
                protocols = None
            if protocols is not None:
                doc = io.pos_to_dict(protocols)
                vals = {v for p in protocols for v in p.allocation}
                summary = (len(vals), len(protocols), sum((p.total for p in protocols), Fraction(0)),
                           sum((p.value for p in protocols), Fraction(0)))
            else:
                graph, stakes = gen_random(GeneratorSpec(m=m, n=n, seed=seed, density=density,
                                                         force_secure=force_secure))
                doc = io.graph_to_dict(graph, stakes)
                summary = (graph.n, graph.m, stakes.total, graph.total_value())
        info = {"n": summary[0], "m": summary[1], "total_stake": fmt_rat(summary[2]),
                "total_value": fmt_rat(summary[3])}
        text = f"n={info['n']} m={info['m']} T(sigma)={info['total_stake']} T(pi)={info['total_value']}"
        if out:
            _write(out, doc)
            _emit(as_json, {**info, "out": out}, [text, f"wrote {out}"])
        else:
            _write(None, doc)
            click.echo(text, err=True)
        return EXIT_OK

    _run(as_json, body)


@main.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Write the aggregated GraphFile here.")
@cap_flag
@strict_flag
@json_flag
def aggregate(path, out, cap, strict, as_json):
    """Merge secure PoS protocols into one restaking graph and check it."""
    def body():
        protocols = io.load_pos(path, strict=strict)
        graph, stakes = aggregate_pos(protocols, cap=cap)
        lemma = check_stake_value_inequality(graph, stakes)
        doc = {"n": graph.n, "m": graph.m, "total_stake": fmt_rat(stakes.total),
               "total_value": fmt_rat(graph.total_value()), "stake_covers_value": lemma}
        lines = [f"T(sigma)={fmt_rat(stakes.total)} {'>=' if lemma else '<'} T(pi)={fmt_rat(graph.total_value())}"]
        if graph.n <= cap:
            verdict = is_secure_exact(graph, stakes, cap=cap)
            doc.update(io.verdict_to_dict(verdict))
            doc["verdict"] = "secure" if verdict.secure else "insecure"
            lines.append(f"verdict: {doc['verdict']}")
            if verdict.witness is not None:
                lines.append("witness: " + _witness_text(verdict.witness))
        else:
            doc["verdict"] = "not checked"
            lines.append(f"verdict: not checked ({graph.n} validators > cap {cap})")
        if out:
            _write(out, io.graph_to_dict(graph, stakes))
            lines.append(f"wrote {out}")
            doc["out"] = out
        _emit(as_json, doc, lines)
        return EXIT_OK

    _run(as_json, body)


if __name__ == "__main__":  # pragma: no cover
    main()
