"""Finite separation algebras: cancellative partial commutative monoids.

A carrier is a finite, totally ordered list of :class:`Element` handles.  The
composition is stored as one dictionary per element (``row[a][b] == a . b``);
a missing entry means the composition is undefined.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Hashable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

DEFAULT_MAX_ELEMENTS = 4096


class AlgebraError(ValueError):
    """Malformed algebra definition (duplicate labels, unknown names, ...)."""


class SizeGuardExceeded(AlgebraError):
    def __init__(self, size: int, limit: int):
        super().__init__(f"carrier of {size} elements exceeds the limit of {limit}")
        self.size = size
        self.limit = limit


class ForeignElement(AlgebraError):
    """An element handle was passed to an algebra that did not issue it."""


class NotSubstate(ValueError):
    pass


class Element(int):
    """Handle to one member of a carrier.

    The integer value is the element's position in the carrier order, so
    handles sort, hash and compare like ints.  ``label`` is the printable
    name and ``algebra`` the issuing algebra.
    """

    label: str
    algebra: SeparationAlgebra

    def __new__(cls, index: int, label: str, algebra: SeparationAlgebra) -> Element:
        obj = super().__new__(cls, index)
        obj.label = label
        obj.algebra = algebra
        return obj

    @property
    def index(self) -> int:
        return int(self)

    def __repr__(self) -> str:
        return self.label

    __str__ = __repr__


@dataclass(frozen=True)
class Verdict:
    """Boolean answer plus the witness that explains a negative answer."""

    holds: bool
    witness: tuple | None = None

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class Violation:
    law: str
    witness: tuple[str, ...]


@dataclass
class ValidationReport:
    passed: bool
    violations: list[Violation] = field(default_factory=list)
    algebra: SeparationAlgebra | None = None


class SeparationAlgebra:
    """A sealed finite separation algebra.

    Instances are produced by :func:`validate` (or the model builders, which
    go through it).  They are never mutated after construction; the derived
    order structure is computed lazily and cached.
    """

    #: builder metadata (model kind and configuration), set by the builders
    model: Any = None

    def __init__(
        self,
        labels: list[str],
        unit: str,
        table: Mapping[tuple[str, str], str],
        description: str = "",
        *,
        payloads: list[Hashable] | None = None,
        normalize_label: Callable[[str], str] | None = None,
    ):
        self.description = description
        self.elements: tuple[Element, ...] = tuple(
            Element(i, lab, self) for i, lab in enumerate(labels)
        )
        self._by_label = {e.label: e for e in self.elements}
        self.unit = self._by_label[unit]
        self._rows: list[dict[Element, Element]] = [{} for _ in self.elements]
        for (a, b), c in table.items():
            self._rows[self._by_label[a]][self._by_label[b]] = self._by_label[c]
        self.payloads = payloads
        self._payload_index = (
            {p: self.elements[i] for i, p in enumerate(payloads)} if payloads else None
        )
        self._normalize_label = normalize_label
        self._decomp: list[tuple[tuple[Element, Element], ...]] | None = None
        self._supers: list[frozenset[Element]] | None = None
        self._wf: Verdict | None = None
        self._sepmask: list[int] | None = None

    # -- basic access ---------------------------------------------------

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def __repr__(self) -> str:
        return f"<SeparationAlgebra {self.description or '?'} |carrier|={len(self)}>"

    @property
    def carrier(self) -> frozenset[Element]:
        return frozenset(self.elements)

    def element(self, label: str) -> Element:
        """Look up an element by its label (heap labels may list components in any order)."""
        e = self._by_label.get(label)
        if e is None and self._normalize_label is not None:
            e = self._by_label.get(self._normalize_label(label))
        if e is None:
            raise AlgebraError(f"unknown element label {label!r}")
        return e

    def from_payload(self, payload: Hashable) -> Element:
        if self._payload_index is None:
            raise AlgebraError("this algebra has no structured payloads")
        return self._payload_index[payload]

    def payload(self, e: Element) -> Any:
        self.check(e)
        if self.payloads is None:
            raise AlgebraError("this algebra has no structured payloads")
        return self.payloads[e]

    def predicate(self, labels: Iterable[str]) -> frozenset[Element]:
        return frozenset(self.element(lab) for lab in labels)

    def check(self, *elements: Element) -> None:
        for e in elements:
            if not isinstance(e, Element) or e.algebra is not self:
                raise ForeignElement(f"{e!r} does not belong to {self!r}")

    def check_set(self, elements: Iterable[Element]) -> None:
        self.check(*elements)

    # -- composition and order --------------------------------------------

    def compose(self, a: Element, b: Element) -> Element | None:
        """``a . b``, or None when undefined."""
        self.check(a, b)
        return self._rows[a].get(b)

    def row(self, a: Element) -> Mapping[Element, Element]:
        """All defined compositions ``a . b`` as a mapping ``b -> a . b``."""
        return self._rows[a]

    def separate(self, a: Element, b: Element) -> bool:
        self.check(a, b)
        return b in self._rows[a]

    def decompositions(self, s: Element) -> tuple[tuple[Element, Element], ...]:
        """Every ordered pair ``(part, rest)`` with ``part . rest == s``."""
        if self._decomp is None:
            acc: list[list[tuple[Element, Element]]] = [[] for _ in self.elements]
            for a in self.elements:
                for b, c in self._rows[a].items():
                    acc[c].append((a, b))
            self._decomp = [tuple(sorted(d)) for d in acc]
        return self._decomp[s]

    def substates(self, s: Element) -> frozenset[Element]:
        self.check(s)
        return frozenset(part for part, _ in self.decompositions(s))

    def strict_substates(self, s: Element) -> frozenset[Element]:
        return self.substates(s) - {s}

    def superstates(self, s: Element) -> frozenset[Element]:
        """Every t with ``s <= t``."""
        self.check(s)
        if self._supers is None:
            acc: list[set[Element]] = [set() for _ in self.elements]
            for a in self.elements:
                acc[a].update(self._rows[a].values())
            self._supers = [frozenset(x) for x in acc]
        return self._supers[s]

    def is_substate(self, a: Element, b: Element) -> bool:
        self.check(a, b)
        return b in self.superstates(a)

    def is_strict_substate(self, a: Element, b: Element) -> bool:
        return a != b and self.is_substate(a, b)

    def subtract(self, whole: Element, part: Element) -> Element:
        """The unique ``d`` with ``d . part == whole``."""
        self.check(whole, part)
        for p, rest in self.decompositions(whole):
            if p == part:
                return rest
        raise NotSubstate(f"{part!r} is not a substate of {whole!r}")

    def separation_mask(self, a: Element) -> int:
        """Bitset (bit i = element i) of everything separate from ``a``."""
        if self._sepmask is None:
            masks = []
            for e in self.elements:
                m = 0
                for b in self._rows[e]:
                    m |= 1 << b
                masks.append(m)
            self._sepmask = masks
        return self._sepmask[a]

    # -- global properties --------------------------------------------------

    def negativity_witness(self) -> tuple[Element, Element] | None:
        """A non-unit element together with an inverse, if any exists."""
        u = self.unit
        for a in self.elements:
            if a == u:
                continue
            for b, c in self._rows[a].items():
                if c == u:
                    return (a, b)
        return None

    def well_foundedness(self) -> Verdict:
        """Acyclicity of the strict-substate relation; witness is a cycle ``(a, b, a)``.

        The substate relation is a preorder, so any cycle through distinct
        elements collapses to a pair that are substates of each other.
        """
        if self._wf is None:
            self._wf = Verdict(True)
            for a in self.elements:
                mutual = [b for b in self.superstates(a) if b != a and self.is_substate(b, a)]
                if mutual:
                    self._wf = Verdict(False, (a, min(mutual), a))
                    break
        return self._wf

    def is_well_founded(self) -> bool:
        return self.well_foundedness().holds

    def precision(self, p: Iterable[Element]) -> Verdict:
        """Precision of a predicate; witness is ``(state, first, second)``."""
        members = sorted(set(p))
        self.check_set(members)
        seen: dict[Element, Element] = {}
        hits: list[tuple[Element, Element, Element]] = []
        for m in members:
            for t in self.superstates(m):
                if t in seen:
                    hits.append((t, seen[t], m))
                else:
                    seen[t] = m
        if hits:
            return Verdict(False, min(hits))
        return Verdict(True)

    def is_precise(self, p: Iterable[Element]) -> bool:
        return self.precision(p).holds


# ---------------------------------------------------------------------------
# validation


def _law_violations(
    labels: list[str], unit: str, rows: dict[str, dict[str, str]]
) -> list[Violation]:
    out: list[Violation] = []
    order = {lab: i for i, lab in enumerate(labels)}

    for i, a in enumerate(labels):
        for b in labels[i:]:
            ab, ba = rows[a].get(b), rows[b].get(a)
            if ab != ba:
                out.append(Violation("commutativity", (a, b)))

    for a in labels:
        if rows[unit].get(a) != a:
            out.append(Violation("unit", (a,)))

    # Associativity: any violation has at least one side defined, so it is
    # enough to walk the triples where a side is defined.
    cols: dict[str, dict[str, str]] = {lab: {} for lab in labels}
    for a in labels:
        for b, c in rows[a].items():
            cols[b][a] = c
    assoc: set[tuple[str, str, str]] = set()
    for b in labels:
        for c, bc in rows[b].items():
            for a, lhs in cols[bc].items():
                ab = rows[a].get(b)
                rhs = rows[ab].get(c) if ab is not None else None
                if rhs != lhs:
                    assoc.add((a, b, c))
    for a in labels:
        for b, ab in rows[a].items():
            for c, rhs in rows[ab].items():
                bc = rows[b].get(c)
                lhs = rows[a].get(bc) if bc is not None else None
                if lhs != rhs:
                    assoc.add((a, b, c))
    for t in sorted(assoc, key=lambda t: tuple(order[x] for x in t)):
        out.append(Violation("associativity", t))

    for a in labels:
        inverse: dict[str, str] = {}
        for b in labels:
            c = rows[a].get(b)
            if c is None:
                continue
            if c in inverse:
                out.append(Violation("cancellativity", (a, inverse[c], b)))
            else:
                inverse[c] = b
    return out


def replay_violation(
    v: Violation, unit: str, table: Mapping[tuple[str, str], str]
) -> bool:
    """True iff the witness really breaks the named law in ``table``."""
    get = table.get
    w = v.witness
    if v.law == "commutativity":
        return get((w[0], w[1])) != get((w[1], w[0]))
    if v.law == "unit":
        return get((unit, w[0])) != w[0]
    if v.law == "associativity":
        a, b, c = w
        bc, ab = get((b, c)), get((a, b))
        lhs = get((a, bc)) if bc is not None else None
        rhs = get((ab, c)) if ab is not None else None
        return lhs != rhs
    if v.law == "cancellativity":
        a, b1, b2 = w
        return b1 != b2 and get((a, b1)) is not None and get((a, b1)) == get((a, b2))
    raise ValueError(f"unknown law {v.law!r}")


def complete_table(
    labels: Iterable[str], unit: str, entries: Mapping[tuple[str, str], str]
) -> dict[tuple[str, str], str]:
    """Add the implicit unit entries ``u . a = a = a . u`` where not given."""
    table = dict(entries)
    for a in labels:
        table.setdefault((unit, a), a)
        table.setdefault((a, unit), a)
    return table


def validate(
    labels: Iterable[str],
    unit: str,
    entries: Mapping[tuple[str, str], str],
    description: str = "",
    *,
    implicit_unit: bool = True,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
    payloads: list[Hashable] | None = None,
    normalize_label: Callable[[str], str] | None = None,
) -> ValidationReport:
    """Check a raw composition table against the separation-algebra laws.

    Structural problems raise :class:`AlgebraError`; law violations are
    returned in the report.  On success ``report.algebra`` holds the sealed
    algebra.
    """
    labels = list(labels)
    if len(set(labels)) != len(labels):
        dupes = sorted({x for x in labels if labels.count(x) > 1})
        raise AlgebraError(f"duplicate element labels: {dupes}")
    if len(labels) > max_elements:
        raise SizeGuardExceeded(len(labels), max_elements)
    if unit not in labels:
        raise AlgebraError(f"unit {unit!r} is not in the carrier")
    known = set(labels)
    for (a, b), c in entries.items():
        for x in (a, b, c):
            if x not in known:
                raise AlgebraError(f"table entry {a!r} . {b!r} = {c!r} names unknown {x!r}")

    table = complete_table(labels, unit, entries) if implicit_unit else dict(entries)
    rows: dict[str, dict[str, str]] = {lab: {} for lab in labels}
    for (a, b), c in table.items():
        rows[a][b] = c

    violations = _law_violations(labels, unit, rows)
    if violations:
        return ValidationReport(False, violations)
    alg = SeparationAlgebra(
        labels,
        unit,
        table,
        description,
        payloads=payloads,
        normalize_label=normalize_label,
    )
    return ValidationReport(True, [], alg)


def seal(*args: Any, **kwargs: Any) -> SeparationAlgebra:
    """Like :func:`validate` but raise on any law violation."""
    report = validate(*args, **kwargs)
    if not report.passed:
        first = report.violations[0]
        raise AlgebraError(
            f"{len(report.violations)} law violation(s); first: {first.law} at {first.witness}"
        )
    assert report.algebra is not None
    return report.algebra


def enumerate_algebras(size: int) -> Iterator[SeparationAlgebra]:
    """Every separation algebra on the labels ``u, a, b, ...`` of the given size.

    Brute force over all symmetric partial tables on the non-unit elements;
    isomorphic copies are not merged.
    """
    if size < 1:
        raise ValueError("size must be positive")
    labels = ["u"] + [chr(ord("a") + i) for i in range(size - 1)]
    others = labels[1:]
    pairs = list(itertools.combinations_with_replacement(others, 2))
    choices: list[str | None] = [None, *labels]
    for values in itertools.product(choices, repeat=len(pairs)):
        entries: dict[tuple[str, str], str] = {}
        for (a, b), c in zip(pairs, values):
            if c is not None:
                entries[(a, b)] = c
                entries[(b, a)] = c
        report = validate(labels, "u", entries, f"enumerated table #{len(entries)}")
        if report.passed:
            assert report.algebra is not None
            yield report.algebra
