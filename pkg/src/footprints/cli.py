"""Batch front end: job files in, analysis reports out.

Exit codes: 0 success, 1 algebra validation failure, 2 parse error,
3 size guard exceeded.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .algebra import (
    DEFAULT_MAX_ELEMENTS,
    AlgebraError,
    Element,
    SeparationAlgebra,
    SizeGuardExceeded,
    validate,
)
from .local import (
    FAULT,
    LocalFunction,
    NotLocal,
    Outcome,
    choice,
    determinism_constancy,
    footprints,
    kstar,
    leq,
    locality,
    min_safe_states,
    seq,
    set_verification,
    skip,
    verification,
)
from .models import (
    FREESET,
    PLAIN,
    PRIMITIVES,
    STACK,
    ZMOD,
    CommandError,
    ModelConfig,
    build_freeset_heap,
    build_plain_heap,
    build_stack_heap,
    build_zmod,
    primitive_action,
)
from .proof import (
    RuleError,
    check_derivation,
    derivation_from_json,
    statement_from_json,
    statement_to_json,
)
from .specs import (
    NoFootprintBasis,
    Specification,
    basis,
    big_spec,
    bla,
    entails,
    small_spec,
)

EXIT_OK, EXIT_INVALID_ALGEBRA, EXIT_PARSE, EXIT_TOO_BIG = 0, 1, 2, 3

QUERY_KINDS = (
    "footprints",
    "min_safe",
    "locality",
    "detconst",
    "big_spec",
    "small_spec",
    "is_basis",
    "is_complete",
    "entails",
    "check_derivation",
)


class JobError(ValueError):
    """Malformed job file, program expression or reference."""


class InvalidAlgebra(Exception):
    def __init__(self, violations):
        super().__init__(f"{len(violations)} law violation(s)")
        self.violations = violations


# -- program expressions ------------------------------------------------------


@dataclass(frozen=True)
class Program:
    op: str
    args: tuple = ()

    def __str__(self) -> str:
        if self.op == "skip":
            return "skip"
        if self.op in ("seq", "choice", "star"):
            return f"{self.op}({','.join(map(str, self.args))})"
        return f"{self.op}({','.join(self.args)})"


_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*|-?\d+)|(\S))")
COMBINATORS = {"seq": 2, "choice": 2, "star": 1}


def parse_program(text: str) -> Program:
    """Parse ``skip``, primitives like ``new(x)`` and ``seq``/``choice``/``star``."""
    tokens: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            break
        if m.group(1) is not None:
            tokens.append((m.group(1), m.start(1)))
        elif m.group(2) is not None:
            if m.group(2) not in "(),":
                raise JobError(f"unexpected character {m.group(2)!r} at position {m.start(2)}")
            tokens.append((m.group(2), m.start(2)))
        pos = m.end()
    tokens.append(("", len(text)))
    i = 0

    def expect(tok: str) -> None:
        nonlocal i
        if tokens[i][0] != tok:
            got = tokens[i][0] or "end of input"
            raise JobError(f"expected {tok!r} at position {tokens[i][1]}, got {got!r}")
        i += 1

    def expr() -> Program:
        nonlocal i
        name, at = tokens[i]
        if not name or not re.match(r"[A-Za-z_]", name):
            raise JobError(f"expected a command at position {at}")
        i += 1
        if name == "skip":
            return Program("skip")
        if name in COMBINATORS:
            expect("(")
            args = [expr()]
            while tokens[i][0] == ",":
                i += 1
                args.append(expr())
            expect(")")
            if len(args) != COMBINATORS[name]:
                raise JobError(f"{name} takes {COMBINATORS[name]} argument(s) (position {at})")
            return Program(name, tuple(args))
        if name not in PRIMITIVES:
            raise JobError(f"unknown primitive {name!r} at position {at}")
        expect("(")
        atoms = []
        while tokens[i][0] not in (")", ""):
            tok, tat = tokens[i]
            if tok in ("(", ","):
                raise JobError(f"expected an argument at position {tat}")
            atoms.append(tok)
            i += 1
            if tokens[i][0] == ",":
                i += 1
        expect(")")
        return Program(name, tuple(atoms))

    prog = expr()
    if tokens[i][0] != "":
        raise JobError(f"trailing input at position {tokens[i][1]}")
    return prog


def elaborate(prog: Program, alg: SeparationAlgebra, cache: dict | None = None) -> LocalFunction:
    """Denotation of a program on ``alg``; primitives are locality-checked."""
    cache = {} if cache is None else cache
    if prog in cache:
        return cache[prog]
    if prog.op == "skip":
        f = skip(alg)
    elif prog.op == "seq":
        f = seq(elaborate(prog.args[0], alg, cache), elaborate(prog.args[1], alg, cache))
    elif prog.op == "choice":
        f = choice(elaborate(prog.args[0], alg, cache), elaborate(prog.args[1], alg, cache))
    elif prog.op == "star":
        f = kstar(elaborate(prog.args[0], alg, cache))
    else:
        try:
            act, name = primitive_action(alg, (prog.op, *prog.args))
        except CommandError as exc:
            raise JobError(str(exc)) from None
        f = LocalFunction.from_action(alg, act, name)
    cache[prog] = f
    return f


def elaborate_raw(prog: Program, alg: SeparationAlgebra) -> LocalFunction:
    """Like :func:`elaborate` but without any locality checking."""
    if prog.op in ("skip", "seq", "choice", "star"):
        with verification("off"):
            if prog.op == "skip":
                return skip(alg)
            kids = [elaborate_raw(a, alg) for a in prog.args]
            return {"seq": seq, "choice": choice, "star": kstar}[prog.op](*kids)
    try:
        act, name = primitive_action(alg, (prog.op, *prog.args))
    except CommandError as exc:
        raise JobError(str(exc)) from None
    return LocalFunction(alg, act, name)


# -- job files --------------------------------------------------------------------


@dataclass
class Job:
    algebra: dict
    programs: dict[str, Program] = field(default_factory=dict)
    specs: dict[str, list] = field(default_factory=dict)
    queries: list[dict] = field(default_factory=list)
    base_dir: Path = Path(".")


def load_job(path: str | Path) -> Job:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise JobError(f"cannot read job file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise JobError(f"job file is not valid JSON: {exc}") from None
    return job_from_dict(doc, path.parent)


def job_from_dict(doc: Any, base_dir: Path = Path(".")) -> Job:
    if not isinstance(doc, dict) or "algebra" not in doc:
        raise JobError("job must be an object with an 'algebra' field")
    unknown = set(doc) - {"algebra", "programs", "specs", "queries"}
    if unknown:
        raise JobError(f"unknown job fields: {sorted(unknown)}")
    programs = {}
    for name, text in (doc.get("programs") or {}).items():
        try:
            programs[name] = parse_program(text)
        except JobError as exc:
            raise JobError(f"program {name!r}: {exc}") from None
    specs = dict(doc.get("specs") or {})
    queries = list(doc.get("queries") or [])
    for i, q in enumerate(queries):
        kind = q.get("kind")
        if kind not in QUERY_KINDS:
            raise JobError(f"query {i}: unknown kind {kind!r}")
        if kind in ("entails", "check_derivation"):
            if q.get("spec") not in specs:
                raise JobError(f"query {i}: unknown spec {q.get('spec')!r}")
        else:
            if q.get("target") not in programs:
                raise JobError(f"query {i}: unknown program {q.get('target')!r}")
        if kind == "is_complete" and q.get("spec") not in specs:
            raise JobError(f"query {i}: unknown spec {q.get('spec')!r}")
        if kind == "is_basis" and not isinstance(q.get("set"), list):
            raise JobError(f"query {i}: is_basis needs a 'set' list")
        if kind == "entails" and not isinstance(q.get("statement"), dict):
            raise JobError(f"query {i}: entails needs a 'statement'")
        if kind == "check_derivation" and not isinstance(q.get("file"), str):
            raise JobError(f"query {i}: check_derivation needs a 'file'")
    return Job(doc["algebra"], programs, specs, queries, base_dir)


def build_algebra(desc: dict, max_elements: int = DEFAULT_MAX_ELEMENTS) -> SeparationAlgebra:
    kind = desc.get("kind")
    try:
        if kind == "table":
            elements = [str(e) for e in desc["elements"]]
            entries = {}
            for entry in desc.get("compose", []):
                a, b, c = (str(x) for x in entry)
                entries[(a, b)] = c
            report = validate(
                elements, str(desc["unit"]), entries, desc.get("description", "table"),
                max_elements=max_elements,
            )
            if not report.passed:
                raise InvalidAlgebra(report.violations)
            return report.algebra
        if kind == ZMOD:
            return build_zmod(int(desc["n"]), max_elements)
        if kind in (PLAIN, STACK, FREESET):
            cfg = ModelConfig(
                tuple(desc["locations"]), tuple(desc["values"]), tuple(desc.get("variables", ()))
            )
            builder = {PLAIN: build_plain_heap, STACK: build_stack_heap, FREESET: build_freeset_heap}[kind]
            return builder(cfg, max_elements)
    except (KeyError, TypeError) as exc:
        raise JobError(f"algebra descriptor: missing or malformed field {exc}") from None
    except SizeGuardExceeded:
        raise
    except AlgebraError as exc:
        raise JobError(f"algebra descriptor: {exc}") from None
    raise JobError(f"unknown algebra kind {kind!r}")


# -- serialisation helpers ---------------------------------------------------------


def lab(e: Element) -> str:
    return e.label


def pred_json(p) -> list[str]:
    return [e.label for e in sorted(p)]


def outcome_json(o: Outcome) -> Any:
    return "FAULT" if o is FAULT else pred_json(o)


def spec_json(spec: Specification) -> list[dict]:
    return [statement_to_json(s) for s in spec.sorted()]


def spec_from_json(alg: SeparationAlgebra, doc: list) -> Specification:
    return Specification(alg, [statement_from_json(alg, s) for s in doc])


# -- running queries -----------------------------------------------------------------


def _run_query(q: dict, job: Job, alg: SeparationAlgebra, cache: dict) -> dict:
    kind = q["kind"]
    res: dict[str, Any] = {"kind": kind}
    if "target" in q:
        res["target"] = q["target"]
    if "spec" in q:
        res["spec"] = q["spec"]

    if kind == "locality":
        f = elaborate_raw(job.programs[q["target"]], alg)
        v = locality(alg, f.action)
        res["holds"] = v.holds
        if not v.holds:
            d, s, bad = v.witness
            res["counterexample"] = {
                "frame": lab(d), "state": lab(s),
                "offending": "FAULT" if bad is FAULT else lab(bad),
            }
        return res

    if kind in ("entails", "check_derivation"):
        spec = spec_from_json(alg, job.specs[q["spec"]])
        if kind == "entails":
            st = statement_from_json(alg, q["statement"])
            b = bla(spec)
            res["statement"] = statement_to_json(st)
            bad = [e for e in sorted(st.pre) if not leq(b(e), st.post)]
            res["holds"] = not bad
            if bad:
                res["witness"] = {"state": lab(bad[0]), "best_local_action": outcome_json(b(bad[0]))}
            return res
        path = Path(q["file"])
        if not path.is_absolute():
            path = job.base_dir / path
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            d = derivation_from_json(alg, doc)
        except (OSError, json.JSONDecodeError, KeyError, TypeError, RuleError, AlgebraError) as exc:
            raise JobError(f"derivation file {q['file']!r}: {exc}") from None
        r = check_derivation(d, spec)
        res["file"] = q["file"]
        res["valid"] = r.valid
        if r.valid:
            res["conclusion"] = statement_to_json(r.conclusion)
            res["entailed"] = entails(spec, r.conclusion)
        else:
            res["failing_node"] = {"path": list(r.path), "rule": r.rule, "reason": r.reason}
        return res

    try:
        f = elaborate(job.programs[q["target"]], alg, cache)
    except NotLocal as exc:
        d, s, bad = exc.verdict.witness
        res["error"] = "not local"
        res["counterexample"] = {
            "frame": lab(d), "state": lab(s), "offending": "FAULT" if bad is FAULT else lab(bad),
        }
        return res

    if kind == "footprints":
        res["predicate"] = pred_json(footprints(f))
    elif kind == "min_safe":
        res["predicate"] = pred_json(min_safe_states(f))
    elif kind == "detconst":
        v = determinism_constancy(f)
        res["holds"] = v.holds
        if not v.holds:
            d, s, lhs, rhs = v.witness
            res["counterexample"] = {
                "frame": lab(d), "state": lab(s), "lhs": outcome_json(lhs), "rhs": outcome_json(rhs),
            }
    elif kind == "big_spec":
        res["spec_statements"] = spec_json(big_spec(f))
    elif kind == "small_spec":
        r = small_spec(f)
        if isinstance(r, NoFootprintBasis):
            res["status"] = "no_footprint_basis"
            res["witness"] = lab(r.witness)
            res["footprints"] = pred_json(footprints(f))
        else:
            res["status"] = "spec"
            res["spec_statements"] = spec_json(r.spec)
    elif kind == "is_basis":
        A = alg.predicate(str(x) for x in q["set"])
        v = basis(A, f)
        res["set"] = pred_json(A)
        res["holds"] = v.holds
        if not v.holds:
            res["witness"] = lab(v.witness[0])
    elif kind == "is_complete":
        spec = spec_from_json(alg, job.specs[q["spec"]])
        b = bla(spec)
        diff = [e for e in alg if b(e) != f(e)]
        res["holds"] = not diff
        if diff:
            e = diff[0]
            res["witness"] = {
                "state": lab(e), "function": outcome_json(f(e)), "best_local_action": outcome_json(b(e)),
            }
    return res


def algebra_stats(alg: SeparationAlgebra) -> dict:
    neg = alg.negativity_witness()
    wf = alg.well_foundedness()
    model = alg.model
    out = {
        "description": alg.description,
        "kind": getattr(model, "kind", "table"),
        "size": len(alg),
        "unit": alg.unit.label,
        "negativity": None if neg is None else [lab(neg[0]), lab(neg[1])],
        "well_founded": wf.holds,
    }
    if not wf.holds:
        out["cycle"] = [lab(e) for e in wf.witness]
    return out


def run(job: Job, *, max_elements: int = DEFAULT_MAX_ELEMENTS, canonical: bool = False) -> dict:
    """Execute all queries in order and return the report as a dict."""
    start = time.perf_counter()
    alg = build_algebra(job.algebra, max_elements)
    cache: dict = {}
    results = []
    for i, q in enumerate(job.queries):
        try:
            r = _run_query(q, job, alg, cache)
        except AlgebraError as exc:
            raise JobError(f"query {i}: {exc}") from None
        r = {"index": i, **r}
        results.append(r)
    report = {
        "tool": {"name": "footprints", "version": __version__},
        "algebra": algebra_stats(alg),
        "programs": {name: str(p) for name, p in sorted(job.programs.items())},
        "results": results,
    }
    if not canonical:
        report["elapsed_seconds"] = round(time.perf_counter() - start, 6)
    return report


def render_json(report: dict, canonical: bool = False) -> str:
    if canonical:
        return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def _short(v: Any) -> str:
    if isinstance(v, list):
        return "{" + ", ".join(_short(x) for x in v) + "}"
    if isinstance(v, dict):
        return "(" + ", ".join(f"{k}={_short(x)}" for k, x in v.items()) + ")"
    return str(v).lower() if isinstance(v, bool) else str(v)


def render_text(report: dict) -> str:
    a = report["algebra"]
    lines = [
        f"algebra       {a['description']}",
        f"size          {a['size']}",
        f"well-founded  {str(a['well_founded']).lower()}",
        f"negativity    {_short(a['negativity']) if a['negativity'] else 'none'}",
        "",
    ]
    rows = []
    for r in report["results"]:
        head = f"[{r['index']}] {r['kind']}"
        subject = r.get("target") or r.get("spec") or ""
        body = {k: v for k, v in r.items() if k not in ("index", "kind", "target", "spec")}
        rows.append((head, subject, "  ".join(f"{k}: {_short(v)}" for k, v in body.items())))
    w1 = max((len(h) for h, _, _ in rows), default=0)
    w2 = max((len(s) for _, s, _ in rows), default=0)
    for h, s, b in rows:
        lines.append(f"{h:<{w1}}  {s:<{w2}}  {b}".rstrip())
    if "elapsed_seconds" in report:
        lines += ["", f"elapsed       {report['elapsed_seconds']}s"]
    return "\n".join(lines) + "\n"


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="footprints", description="Footprint analysis of local functions on finite separation algebras."
    )
    parser.add_argument("--job", required=True, help="job file (JSON)")
    parser.add_argument("--format", choices=("json", "text"), default="json")
    parser.add_argument("--canonical", action="store_true", help="byte-stable output without timing")
    parser.add_argument("--max-elements", type=int, default=DEFAULT_MAX_ELEMENTS)
    parser.add_argument("--verify-locality", choices=("off", "debug", "always"), default="debug")
    args = parser.parse_args(argv)

    set_verification(args.verify_locality)
    try:
        job = load_job(args.job)
        report = run(job, max_elements=args.max_elements, canonical=args.canonical)
    except InvalidAlgebra as exc:
        print(f"error: algebra is not a separation algebra ({exc})", file=sys.stderr)
        for v in exc.violations[:20]:
            print(f"  {v.law}: {', '.join(v.witness)}", file=sys.stderr)
        return EXIT_INVALID_ALGEBRA
    except SizeGuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_BIG
    except JobError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    out = render_json(report, args.canonical) if args.format == "json" else render_text(report)
    sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
