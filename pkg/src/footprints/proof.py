"""Frame / Consequence / Union / Intersection rules and derivation checking."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .algebra import Element, SeparationAlgebra
from .local import star
from .specs import Specification, Statement, bla, entails

RULES = ("Axiom", "Frame", "Consequence", "Union", "Intersection")


class RuleError(ValueError):
    pass


class SideConditionViolated(RuleError):
    pass


class EmptyIntersection(RuleError):
    pass


def apply_frame(s: Statement, r: Iterable[Element]) -> Statement:
    r = frozenset(r)
    return Statement(star(s.pre, r), star(s.post, r))


def apply_consequence(s: Statement, pre: Iterable[Element], post: Iterable[Element]) -> Statement:
    pre, post = frozenset(pre), frozenset(post)
    if not pre <= s.pre:
        raise SideConditionViolated("new precondition is not included in the premise's")
    if not s.post <= post:
        raise SideConditionViolated("premise's postcondition is not included in the new one")
    return Statement(pre, post)


def apply_union(ss: Sequence[Statement]) -> Statement:
    return Statement(
        frozenset().union(*(s.pre for s in ss)),
        frozenset().union(*(s.post for s in ss)),
    )


def apply_intersection(ss: Sequence[Statement]) -> Statement:
    if not ss:
        raise EmptyIntersection("intersection needs at least one premise")
    return Statement(
        frozenset.intersection(*(s.pre for s in ss)),
        frozenset.intersection(*(s.post for s in ss)),
    )


@dataclass(frozen=True)
class Derivation:
    rule: str
    conclusion: Statement
    premises: tuple[Derivation, ...] = ()
    frame: frozenset | None = None

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def nodes(self, path: tuple[int, ...] = ()):
        """Pre-order walk yielding ``(path, node)``."""
        yield path, self
        for i, p in enumerate(self.premises):
            yield from p.nodes(path + (i,))

    def replace(self, path: tuple[int, ...], node: Derivation) -> Derivation:
        if not path:
            return node
        i = path[0]
        prem = list(self.premises)
        prem[i] = prem[i].replace(path[1:], node)
        return Derivation(self.rule, self.conclusion, tuple(prem), self.frame)


def axiom(s: Statement) -> Derivation:
    return Derivation("Axiom", s)


def frame_node(d: Derivation, r: Iterable[Element]) -> Derivation:
    r = frozenset(r)
    return Derivation("Frame", apply_frame(d.conclusion, r), (d,), r)


def consequence_node(d: Derivation, pre: Iterable[Element], post: Iterable[Element]) -> Derivation:
    return Derivation("Consequence", apply_consequence(d.conclusion, pre, post), (d,))


def union_node(ds: Sequence[Derivation]) -> Derivation:
    return Derivation("Union", apply_union([d.conclusion for d in ds]), tuple(ds))


def intersection_node(ds: Sequence[Derivation]) -> Derivation:
    return Derivation("Intersection", apply_intersection([d.conclusion for d in ds]), tuple(ds))


@dataclass
class CheckResult:
    valid: bool
    conclusion: Statement | None = None
    path: tuple[int, ...] | None = None
    rule: str | None = None
    reason: str = ""
    checked: int = field(default=0, repr=False)

    def __bool__(self) -> bool:
        return self.valid


def step_error(node: Derivation, axioms: frozenset) -> str | None:
    """Reason the node's own step is invalid, or None."""
    n = len(node.premises)
    prem = [p.conclusion for p in node.premises]
    if node.rule == "Axiom":
        if n:
            return "axiom leaves take no premises"
        if node.conclusion not in axioms:
            return "statement is not one of the axioms"
    elif node.rule == "Frame":
        if n != 1 or node.frame is None:
            return "frame needs one premise and a frame predicate"
        if node.conclusion != apply_frame(prem[0], node.frame):
            return "conclusion is not the premise framed by the given predicate"
    elif node.rule == "Consequence":
        if n != 1:
            return "consequence needs one premise"
        try:
            apply_consequence(prem[0], node.conclusion.pre, node.conclusion.post)
        except SideConditionViolated as exc:
            return str(exc)
    elif node.rule == "Union":
        if node.conclusion != apply_union(prem):
            return "conclusion is not the union of the premises"
    elif node.rule == "Intersection":
        if not prem:
            return "intersection needs at least one premise"
        if node.conclusion != apply_intersection(prem):
            return "conclusion is not the intersection of the premises"
    else:
        return f"unknown rule {node.rule!r}"
    return None


def check_derivation(d: Derivation, spec: Specification) -> CheckResult:
    """Validate every node; report the first failing node in pre-order."""
    axioms = spec.statements
    count = 0
    for path, node in d.nodes():
        count += 1
        reason = step_error(node, axioms)
        if reason is not None:
            return CheckResult(False, None, path, node.rule, reason, count)
    return CheckResult(True, d.conclusion, checked=count)


def derive_via_bla(spec: Specification, goal: Statement) -> Derivation:
    """Build the derivation from the completeness argument.

    For every state ``s`` of the goal's precondition: weaken each axiom to a
    singleton substate of ``s``, frame it up to ``s`` with the remainder,
    and intersect; the union over ``s`` is then weakened to the goal.
    """
    alg = spec.algebra
    best = bla(spec)
    if not entails(spec, goal):
        raise ValueError("the statement does not follow from the axioms")
    axioms = spec.sorted()
    per_state = []
    for s in sorted(goal.pre):
        framed = []
        for part, rest in alg.decompositions(s):
            for st in axioms:
                if part in st.pre:
                    narrowed = consequence_node(axiom(st), {part}, st.post)
                    framed.append(frame_node(narrowed, {rest}))
        node = intersection_node(framed)
        assert node.conclusion == Statement(frozenset((s,)), best(s))
        per_state.append(node)
    return consequence_node(union_node(per_state), goal.pre, goal.post)


# -- JSON -----------------------------------------------------------------------


def labels(p: Iterable[Element]) -> list[str]:
    return [e.label for e in sorted(p)]


def statement_to_json(s: Statement) -> dict:
    return {"pre": labels(s.pre), "post": labels(s.post)}


def statement_from_json(alg: SeparationAlgebra, doc: dict) -> Statement:
    return Statement(alg.predicate(doc["pre"]), alg.predicate(doc["post"]))


def derivation_to_json(d: Derivation) -> dict:
    out: dict = {"rule": d.rule, "conclusion": statement_to_json(d.conclusion)}
    if d.frame is not None:
        out["frame"] = labels(d.frame)
    out["premises"] = [derivation_to_json(p) for p in d.premises]
    return out


def derivation_from_json(alg: SeparationAlgebra, doc: dict) -> Derivation:
    if doc.get("rule") not in RULES:
        raise RuleError(f"unknown rule {doc.get('rule')!r}")
    fr = doc.get("frame")
    return Derivation(
        doc["rule"],
        statement_from_json(alg, doc["conclusion"]),
        tuple(derivation_from_json(alg, p) for p in doc.get("premises", [])),
        None if fr is None else alg.predicate(fr),
    )
