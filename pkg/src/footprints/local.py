"""Outcomes, local functions, program combinators and footprints.

An outcome is either :data:`FAULT` (the top element) or a frozenset of
elements; the empty set means divergence.
"""

from __future__ import annotations

import contextlib
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from typing import Union

from .algebra import Element, SeparationAlgebra, Verdict


class _Fault:
    _instance: _Fault | None = None

    def __new__(cls) -> _Fault:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "FAULT"

    def __reduce__(self):
        return (_Fault, ())


FAULT = _Fault()

Outcome = Union[frozenset, _Fault]
EMPTY: frozenset = frozenset()


class NotLocal(ValueError):
    def __init__(self, name: str, verdict: Verdict):
        super().__init__(f"{name} violates locality at {verdict.witness}")
        self.verdict = verdict


# -- the outcome lattice -------------------------------------------------


def leq(p: Outcome, q: Outcome) -> bool:
    """``p`` below ``q``; FAULT is the top."""
    if q is FAULT:
        return True
    if p is FAULT:
        return False
    return p <= q


def lt(p: Outcome, q: Outcome) -> bool:
    return p != q and leq(p, q)


def star(p: Outcome, q: Outcome) -> Outcome:
    """Pointwise composition of two outcomes; FAULT on either side gives FAULT."""
    if p is FAULT or q is FAULT:
        return FAULT
    if not p or not q:
        return EMPTY
    alg = next(iter(p)).algebra
    alg.check(next(iter(q)))
    if len(p) > len(q):
        p, q = q, p
    out = set()
    for a in p:
        row = alg.row(a)
        for b in q:
            c = row.get(b)
            if c is not None:
                out.add(c)
    return frozenset(out)


def frame(d: Element, q: Outcome) -> Outcome:
    """``{d} * q``."""
    if q is FAULT:
        return FAULT
    row = d.algebra.row(d)
    return frozenset(row[b] for b in q if b in row)


def meet(outcomes: Iterable[Outcome]) -> Outcome:
    """Greatest lower bound; FAULT is neutral and the empty meet is FAULT."""
    acc: Outcome = FAULT
    for o in outcomes:
        if o is FAULT:
            continue
        acc = o if acc is FAULT else acc & o
    return acc


def join(outcomes: Iterable[Outcome]) -> Outcome:
    """Least upper bound; the empty join is the empty set."""
    acc: set = set()
    for o in outcomes:
        if o is FAULT:
            return FAULT
        acc |= o
    return frozenset(acc)


# -- locality verification switch ------------------------------------------

VERIFY_MODES = ("off", "debug", "always")
_verify_mode = "debug"


def set_verification(mode: str) -> None:
    """How combinator results are re-checked for locality at seal time.

    ``off`` never, ``debug`` only when Python runs with assertions enabled,
    ``always`` unconditionally.  User-supplied actions are always checked.
    """
    global _verify_mode
    if mode not in VERIFY_MODES:
        raise ValueError(f"verification mode must be one of {VERIFY_MODES}")
    _verify_mode = mode


def get_verification() -> str:
    return _verify_mode


@contextlib.contextmanager
def verification(mode: str) -> Iterator[None]:
    old = _verify_mode
    set_verification(mode)
    try:
        yield
    finally:
        set_verification(old)


def _should_verify_derived() -> bool:
    return _verify_mode == "always" or (_verify_mode == "debug" and __debug__)


# -- local functions ---------------------------------------------------------


def locality(alg: SeparationAlgebra, action: Sequence[Outcome]) -> Verdict:
    """Exhaustive locality check of a total action.

    The witness is ``(frame, state, offending)`` where ``offending`` is an
    output of ``action[frame . state]`` outside ``{frame} * action[state]``,
    or FAULT when the larger state faults.
    """
    if len(action) != len(alg):
        raise ValueError("action must give an outcome for every element")
    for s in alg:
        fs = action[s]
        if fs is FAULT:
            continue
        row = alg.row(s)
        if any(not _bounded(action[c], d, fs) for d, c in row.items()):
            # report the smallest offending frame for this state
            for d in sorted(row):
                big = action[row[d]]
                if big is FAULT:
                    return Verdict(False, (d, s, FAULT))
                extra = big - frame(d, fs)
                if extra:
                    return Verdict(False, (d, s, min(extra)))
    return Verdict(True)


def _bounded(big: Outcome, d: Element, fs: frozenset) -> bool:
    """``big`` is below ``{d} * fs``."""
    if big is FAULT:
        return False
    if len(big) > len(fs):
        return False
    if not big:
        return True
    drow = d.algebra.row(d)
    return big <= {drow[b] for b in fs if b in drow}


class LocalFunction:
    """A sealed local function ``carrier -> outcome``.

    Build from user data with :meth:`from_action` / :meth:`from_callable`
    (always locality-checked).  Combinators return derived functions that are
    local by construction.
    """

    __slots__ = ("algebra", "_action", "name", "_terms", "_full_limit", "_mismatch")

    def __init__(self, algebra: SeparationAlgebra, action: Sequence[Outcome], name: str):
        self.algebra = algebra
        self._action = tuple(action)
        self.name = name
        self._terms: list | None = None
        self._full_limit: tuple | None = None
        self._mismatch: frozenset | None = None

    # constructors

    @classmethod
    def from_action(
        cls,
        alg: SeparationAlgebra,
        action: Mapping[Element, Outcome] | Sequence[Outcome],
        name: str = "f",
    ) -> LocalFunction:
        if isinstance(action, Mapping):
            missing = [e for e in alg if e not in action]
            if missing:
                raise ValueError(f"action undefined on {missing[:5]}")
            seq = [action[e] for e in alg]
        else:
            seq = list(action)
        seq = [_normalise(alg, o) for o in seq]
        verdict = locality(alg, seq)
        if not verdict:
            raise NotLocal(name, verdict)
        return cls(alg, seq, name)

    @classmethod
    def from_callable(
        cls, alg: SeparationAlgebra, fn: Callable[[Element], Outcome], name: str = "f"
    ) -> LocalFunction:
        return cls.from_action(alg, [fn(e) for e in alg], name)

    @classmethod
    def derived(
        cls, alg: SeparationAlgebra, action: Sequence[Outcome], name: str
    ) -> LocalFunction:
        if _should_verify_derived():
            verdict = locality(alg, action)
            if not verdict:
                raise NotLocal(name, verdict)
        return cls(alg, action, name)

    # evaluation

    def __call__(self, s: Element) -> Outcome:
        self.algebra.check(s)
        return self._action[s]

    @property
    def action(self) -> tuple[Outcome, ...]:
        return self._action

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LocalFunction):
            return NotImplemented
        return self.algebra is other.algebra and self._action == other._action

    def __hash__(self) -> int:
        return hash(self._action)

    def __repr__(self) -> str:
        return f"<LocalFunction {self.name}>"

    def safe_states(self) -> frozenset[Element]:
        return frozenset(e for e in self.algebra if self._action[e] is not FAULT)

    def limit_terms(self, s: Element) -> tuple[tuple[Element, Outcome], ...]:
        """``(part, {s - part} * f(part))`` for every substate ``part`` of ``s``."""
        if self._terms is None:
            self._terms = [None] * len(self.algebra)
        t = self._terms[s]
        if t is None:
            act = self._action
            t = tuple((part, frame(rest, act[part])) for part, rest in self.algebra.decompositions(s))
            self._terms[s] = t
        return t

    def full_limit(self, s: Element) -> Outcome:
        """Local limit imposed by the whole carrier (cached)."""
        if self._full_limit is None:
            self._full_limit = tuple(
                meet(term for _, term in self.limit_terms(e)) for e in self.algebra
            )
        return self._full_limit[s]

    def limit_mismatches(self) -> frozenset[Element]:
        """States where the whole-carrier limit differs from ``f``; empty when local."""
        if self._mismatch is None:
            self.full_limit(self.algebra.unit)
            self._mismatch = frozenset(
                e for e in self.algebra if self._full_limit[e] != self._action[e]
            )
        return self._mismatch


def _normalise(alg: SeparationAlgebra, o: Outcome | Iterable[Element]) -> Outcome:
    if o is FAULT:
        return FAULT
    fs = frozenset(o)
    alg.check_set(fs)
    return fs


def _same_algebra(*fs: LocalFunction) -> SeparationAlgebra:
    alg = fs[0].algebra
    for f in fs[1:]:
        if f.algebra is not alg:
            raise ValueError("local functions live on different algebras")
    return alg


def is_local(candidate: LocalFunction | Sequence[Outcome] | Mapping[Element, Outcome], alg: SeparationAlgebra | None = None) -> Verdict:
    if isinstance(candidate, LocalFunction):
        return locality(candidate.algebra, candidate.action)
    if alg is None:
        raise ValueError("an algebra is required for a raw action")
    if isinstance(candidate, Mapping):
        candidate = [candidate[e] for e in alg]
    return locality(alg, [_normalise(alg, o) for o in candidate])


def apply(f: LocalFunction, s: Element) -> Outcome:
    return f(s)


def apply_lifted(f: LocalFunction, states: Outcome | Iterable[Element]) -> Outcome:
    """``f(A)``: join of ``f`` over the members of ``A``."""
    if states is FAULT:
        return FAULT
    return join(f(s) for s in states)


def fn_leq(f: LocalFunction, g: LocalFunction) -> bool:
    _same_algebra(f, g)
    return all(leq(a, b) for a, b in zip(f.action, g.action))


# -- combinators ----------------------------------------------------------------


def skip(alg: SeparationAlgebra) -> LocalFunction:
    return LocalFunction(alg, [frozenset((e,)) for e in alg], "skip")


def seq(f: LocalFunction, g: LocalFunction) -> LocalFunction:
    alg = _same_algebra(f, g)
    gact = g.action
    out = []
    for fo in f.action:
        out.append(FAULT if fo is FAULT else join(gact[t] for t in fo))
    return LocalFunction.derived(alg, out, f"seq({f.name},{g.name})")


def choice(f: LocalFunction, g: LocalFunction) -> LocalFunction:
    alg = _same_algebra(f, g)
    out = [join((a, b)) for a, b in zip(f.action, g.action)]
    return LocalFunction.derived(alg, out, f"choice({f.name},{g.name})")


def kstar(f: LocalFunction) -> LocalFunction:
    """Join of all iterates ``f^n`` for n >= 0.

    Evaluated pointwise as a monotone accumulation from ``skip``: only the
    states added in the last round are pushed through ``f`` again, until
    nothing new appears or a reachable state faults.
    """
    alg = f.algebra
    act = f.action
    out: list[Outcome] = []
    for s in alg:
        acc = {s}
        frontier = {s}
        result: Outcome | None = None
        while frontier:
            step = join(act[t] for t in frontier)
            if step is FAULT:
                result = FAULT
                break
            frontier = step - acc
            acc |= frontier
        out.append(result if result is FAULT else frozenset(acc))
    return LocalFunction.derived(alg, out, f"star({f.name})")


# -- local limits and footprints --------------------------------------------------


def local_limit(f: LocalFunction, s: Element) -> Outcome:
    """Meet over strict substates ``p`` of ``s`` of ``{s - p} * f(p)``."""
    f.algebra.check(s)
    return meet(term for part, term in f.limit_terms(s) if part != s)


def local_limit_by(A: Iterable[Element], f: LocalFunction, s: Element) -> Outcome:
    """Meet over substates ``p`` of ``s`` with ``p`` in ``A`` (non-strict)."""
    f.algebra.check(s)
    A = A if isinstance(A, (set, frozenset)) else frozenset(A)
    return meet(term for part, term in f.limit_terms(s) if part in A)


def is_footprint(f: LocalFunction, s: Element) -> bool:
    return lt(f(s), local_limit(f, s))


def footprints(f: LocalFunction) -> frozenset[Element]:
    return frozenset(s for s in f.algebra if is_footprint(f, s))


def min_safe_states(f: LocalFunction) -> frozenset[Element]:
    """The substate-minimal states on which ``f`` does not fault."""
    safe = f.safe_states()
    alg = f.algebra
    return frozenset(
        s for s in safe if not any(p in safe for p in alg.strict_substates(s))
    )


def determinism_constancy(f: LocalFunction) -> Verdict:
    """Check ``f({d} * {s}) == {d} * f(s)`` for every safe ``s`` and every ``d``.

    Lifted application of the empty set is the empty set, so for ``d`` not
    separate from ``s`` the right-hand side must be empty too.  The witness
    is ``(d, s, lhs, rhs)``.
    """
    alg = f.algebra
    act = f.action
    for s in alg:
        fs = act[s]
        if fs is FAULT:
            continue
        bad: list[Element] = []
        reach = 0
        for t in fs:
            reach |= alg.separation_mask(t)
        stray = reach & ~alg.separation_mask(s)
        if stray:
            bad.append(alg.elements[(stray & -stray).bit_length() - 1])
        row = alg.row(s)
        for d in sorted(row):
            if bad and d > bad[0]:
                break
            if act[row[d]] != frame(d, fs):
                bad.append(d)
                break
        if bad:
            d = min(bad)
            lhs = act[row[d]] if d in row else EMPTY
            return Verdict(False, (d, s, lhs, frame(d, fs)))
    return Verdict(True)
