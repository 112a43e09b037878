"""Statements, specifications, best local actions, bases and small specifications."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass
from typing import NamedTuple, Union

from .algebra import Element, SeparationAlgebra, Verdict
from .local import (
    FAULT,
    LocalFunction,
    footprints,
    frame,
    leq,
    local_limit_by,
    meet,
)


class Statement(NamedTuple):
    pre: frozenset
    post: frozenset

    @classmethod
    def of(cls, pre: Iterable[Element], post: Iterable[Element]) -> Statement:
        if pre is FAULT or post is FAULT:
            raise ValueError("FAULT is not a predicate")
        return cls(frozenset(pre), frozenset(post))

    def __repr__(self) -> str:
        return f"({_fmt(self.pre)}, {_fmt(self.post)})"


def _fmt(p: frozenset) -> str:
    return "{" + ", ".join(e.label for e in sorted(p)) + "}"


@dataclass(frozen=True)
class Specification:
    algebra: SeparationAlgebra
    statements: frozenset

    def __init__(self, algebra: SeparationAlgebra, statements: Iterable[Statement | tuple] = ()):
        stmts = frozenset(
            s if isinstance(s, Statement) else Statement.of(*s) for s in statements
        )
        for s in stmts:
            algebra.check_set(s.pre)
            algebra.check_set(s.post)
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "statements", stmts)

    @property
    def domain(self) -> frozenset:
        return frozenset().union(*(s.pre for s in self.statements))

    def sorted(self) -> list[Statement]:
        return sorted(self.statements, key=lambda s: (sorted(s.pre), sorted(s.post)))

    def __iter__(self):
        return iter(self.sorted())

    def __len__(self) -> int:
        return len(self.statements)

    def __repr__(self) -> str:
        return "{" + ", ".join(map(repr, self.sorted())) + "}"


def satisfies(f: LocalFunction, s: Statement) -> bool:
    return all(leq(f(e), s.post) for e in s.pre)


def satisfies_spec(f: LocalFunction, spec: Specification) -> bool:
    return all(satisfies(f, s) for s in spec.statements)


def bla(spec: Specification) -> LocalFunction:
    """The best local action of a specification.

    At each state, the meet of ``{frame} * post`` over every way of splitting
    the state into a frame and a precondition member.
    """
    alg = spec.algebra
    posts_by_pre: dict[Element, set[frozenset]] = defaultdict(set)
    for st in spec.statements:
        for e in st.pre:
            posts_by_pre[e].add(st.post)
    out = []
    for s in alg:
        out.append(
            meet(
                frame(fr, q)
                for fr, core in alg.decompositions(s)
                for q in posts_by_pre.get(core, ())
            )
        )
    return LocalFunction.derived(alg, out, f"bla[{len(spec)} statements]")


def entails(spec: Specification, s: Statement) -> bool:
    """Semantic consequence, decided through the best local action."""
    return satisfies(bla(spec), s)


def entails_spec(spec: Specification, other: Specification) -> bool:
    b = bla(spec)
    return all(satisfies(b, s) for s in other.statements)


def is_complete(spec: Specification, f: LocalFunction) -> bool:
    return bla(spec) == f


def canonicalise(spec: Specification) -> Specification:
    b = bla(spec)
    return Specification(spec.algebra, [Statement(frozenset((e,)), b(e)) for e in spec.domain])


def spec_on(A: Iterable[Element], f: LocalFunction) -> Specification:
    """``{({s}, f(s)) | s in A, f(s) safe}``."""
    return Specification(
        f.algebra,
        [Statement(frozenset((e,)), f(e)) for e in A if f(e) is not FAULT],
    )


def big_spec(f: LocalFunction) -> Specification:
    return spec_on(f.algebra, f)


def basis(A: Iterable[Element], f: LocalFunction) -> Verdict:
    """Does the local limit imposed by ``A`` reproduce ``f`` everywhere?

    The witness is the first state where it does not.  When ``A`` misses only
    a few elements, states with no excluded substate reuse the cached limit
    imposed by the whole carrier.
    """
    alg = f.algebra
    A = frozenset(A)
    alg.check_set(A)
    excluded = [e for e in alg if e not in A]
    if len(excluded) * 8 <= len(alg):
        dirty: set[Element] = set()
        for e in excluded:
            dirty |= alg.superstates(e)
        candidates = sorted(dirty | f.limit_mismatches())
    else:
        dirty = set(alg)
        candidates = list(alg)
    for s in candidates:
        lim = local_limit_by(A, f, s) if s in dirty else f.full_limit(s)
        if lim != f(s):
            return Verdict(False, (s,))
    return Verdict(True)


def is_basis(A: Iterable[Element], f: LocalFunction) -> bool:
    return basis(A, f).holds


@dataclass(frozen=True)
class SmallSpec:
    spec: Specification


@dataclass(frozen=True)
class NoFootprintBasis:
    """The footprints do not form a basis; ``witness`` is a state they fail to determine."""

    witness: Element


SmallSpecResult = Union[SmallSpec, NoFootprintBasis]


def small_spec(f: LocalFunction) -> SmallSpecResult:
    fp = footprints(f)
    verdict = basis(fp, f)
    if not verdict:
        return NoFootprintBasis(verdict.witness[0])
    return SmallSpec(spec_on(sorted(fp), f))
