"""Concrete separation algebras and their primitive commands.

* plain heap: finite partial maps locations -> values under disjoint union
* stack heap (H1): variables are resource too, keyed alongside locations
* free-set heap (H2): H1 states optionally carrying one explicit free set
* Z_n: integers modulo n under addition (a finite model with negativity)
"""

from __future__ import annotations

import itertools
import re
from math import comb
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass

from .algebra import (
    DEFAULT_MAX_ELEMENTS,
    AlgebraError,
    Element,
    SeparationAlgebra,
    SizeGuardExceeded,
    seal,
)
from .local import FAULT, LocalFunction, Outcome

PLAIN, STACK, FREESET, ZMOD = "plain_heap", "stack_heap", "freeset_heap", "zmod"


class CommandError(ValueError):
    """Unknown primitive, bad arguments, or primitive/algebra kind mismatch."""


@dataclass(frozen=True)
class ModelConfig:
    locations: tuple[Hashable, ...]
    values: tuple[Hashable, ...]
    variables: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.locations or not self.values:
            raise AlgebraError("locations and values must be nonempty")
        for name, xs in (("locations", self.locations), ("values", self.values), ("variables", self.variables)):
            if len(set(xs)) != len(xs):
                raise AlgebraError(f"duplicate {name}")
        clash = {str(v) for v in self.variables} & {str(l) for l in self.locations}
        if clash:
            raise AlgebraError(f"names used as both variable and location: {sorted(clash)}")

    def require_addresses(self) -> None:
        missing = [l for l in self.locations if l not in self.values]
        if missing:
            raise AlgebraError(f"values must contain every location; missing {missing}")


@dataclass(frozen=True)
class HeapState:
    """A heap/stack state; ``free`` is only used by the free-set model."""

    stack: tuple[tuple[str, Hashable], ...] = ()
    heap: tuple[tuple[Hashable, Hashable], ...] = ()
    free: frozenset | None = None

    @property
    def vars(self) -> dict:
        return dict(self.stack)

    @property
    def cells(self) -> dict:
        return dict(self.heap)

    def locs(self) -> set:
        return {l for l, _ in self.heap}


@dataclass
class HeapModel:
    kind: str
    config: ModelConfig

    def make(self, stack: dict, heap: dict, free: frozenset | None = None) -> HeapState:
        vo = {v: i for i, v in enumerate(self.config.variables)}
        lo = {l: i for i, l in enumerate(self.config.locations)}
        return HeapState(
            tuple(sorted(stack.items(), key=lambda kv: vo[kv[0]])),
            tuple(sorted(heap.items(), key=lambda kv: lo[kv[0]])),
            free if free is None else frozenset(free),
        )

    def components(self, s: HeapState) -> list[tuple]:
        comps: list[tuple] = [("v", x, v) for x, v in s.stack]
        comps += [("l", l, v) for l, v in s.heap]
        if s.free is not None:
            comps.append(("F", s.free))
        return comps

    def from_components(self, comps: Iterable[tuple]) -> HeapState:
        stack, heap, free = {}, {}, None
        for c in comps:
            if c[0] == "v":
                stack[c[1]] = c[2]
            elif c[0] == "l":
                heap[c[1]] = c[2]
            else:
                free = c[1]
        return self.make(stack, heap, free)

    def label(self, s: HeapState) -> str:
        parts = [f"{x}->{v}" for x, v in s.stack] + [f"{l}->{v}" for l, v in s.heap]
        if s.free is not None:
            lo = {l: i for i, l in enumerate(self.config.locations)}
            parts.append("F{" + ",".join(str(l) for l in sorted(s.free, key=lo.__getitem__)) + "}")
        return " * ".join(parts) if parts else "emp"

    def normalize_label(self, text: str) -> str:
        """Canonical label for a heap label whose components may be unordered."""
        cfg = self.config
        vo = {str(v): i for i, v in enumerate(cfg.variables)}
        lo = {str(l): i for i, l in enumerate(cfg.locations)}
        parts = [p.strip().replace(" ", "") for p in text.split("*")]
        keyed = []
        for p in parts:
            if p in ("emp", ""):
                continue
            m = re.fullmatch(r"F\{(.*)\}", p)
            if m:
                items = [i for i in m.group(1).split(",") if i]
                items.sort(key=lambda i: lo.get(i, len(lo)))
                keyed.append(((2, 0), "F{" + ",".join(items) + "}"))
                continue
            name, _, val = p.partition("->")
            if name in vo:
                keyed.append(((0, vo[name]), f"{name}->{val}"))
            else:
                keyed.append(((1, lo.get(name, len(lo))), f"{name}->{val}"))
        keyed.sort()
        return " * ".join(p for _, p in keyed) if keyed else "emp"


def _partial_maps(keys: Sequence, values: Sequence) -> list[dict]:
    out = []
    for choice in itertools.product([None, *values], repeat=len(keys)):
        out.append({k: v for k, v in zip(keys, choice) if v is not None})
    return out


def _heap_count(cfg: ModelConfig, kind: str) -> int:
    nv, nl = len(cfg.values), len(cfg.locations)
    stack = (nv + 1) ** len(cfg.variables) if kind != PLAIN else 1
    if kind != FREESET:
        return stack * (nv + 1) ** nl
    # sum over allocated location sets of Val^k * (1 + 2^(nl - k))
    total = 0
    for k in range(nl + 1):
        total += comb(nl, k) * nv**k * (1 + 2 ** (nl - k))
    return stack * total


def _build_heap(kind: str, cfg: ModelConfig, max_elements: int) -> SeparationAlgebra:
    size = _heap_count(cfg, kind)
    if size > max_elements:
        raise SizeGuardExceeded(size, max_elements)
    model = HeapModel(kind, cfg)
    stacks = _partial_maps(cfg.variables, cfg.values) if kind != PLAIN else [{}]
    heaps = _partial_maps(cfg.locations, cfg.values)
    states: list[HeapState] = []
    for st in stacks:
        for hp in heaps:
            states.append(model.make(st, hp))
            if kind == FREESET:
                avail = [l for l in cfg.locations if l not in hp]
                for r in range(len(avail) + 1):
                    for fs in itertools.combinations(avail, r):
                        states.append(model.make(st, hp, frozenset(fs)))

    def order(s: HeapState) -> tuple:
        comps = model.components(s)
        vo = {v: i for i, v in enumerate(cfg.variables)}
        lo = {l: i for i, l in enumerate(cfg.locations)}
        val = {v: i for i, v in enumerate(cfg.values)}
        key = []
        for c in comps:
            if c[0] == "v":
                key.append((0, vo[c[1]], val[c[2]]))
            elif c[0] == "l":
                key.append((1, lo[c[1]], val[c[2]]))
            else:
                key.append((2, len(c[1]), tuple(sorted(lo[l] for l in c[1]))))
        return (len(comps), tuple(key))

    states.sort(key=order)
    labels = [model.label(s) for s in states]
    table: dict[tuple[str, str], str] = {}
    for s, lab in zip(states, labels):
        comps = model.components(s)
        n = len(comps)
        for mask in range(1 << n):
            a = model.from_components(c for i, c in enumerate(comps) if mask >> i & 1)
            b = model.from_components(c for i, c in enumerate(comps) if not mask >> i & 1)
            table[(model.label(a), model.label(b))] = lab
    desc = {
        PLAIN: "plain heap",
        STACK: "stack and heap (H1)",
        FREESET: "stack and heap with free set (H2)",
    }[kind]
    desc += f" L={list(cfg.locations)} Val={list(cfg.values)}"
    if kind != PLAIN:
        desc += f" Var={list(cfg.variables)}"
    alg = seal(
        labels,
        "emp",
        table,
        desc,
        implicit_unit=False,
        max_elements=max_elements,
        payloads=states,
        normalize_label=model.normalize_label,
    )
    alg.model = model
    return alg


def build_plain_heap(cfg: ModelConfig, max_elements: int = DEFAULT_MAX_ELEMENTS) -> SeparationAlgebra:
    return _build_heap(PLAIN, ModelConfig(cfg.locations, cfg.values, ()), max_elements)


def build_stack_heap(cfg: ModelConfig, max_elements: int = DEFAULT_MAX_ELEMENTS) -> SeparationAlgebra:
    cfg.require_addresses()
    return _build_heap(STACK, cfg, max_elements)


def build_freeset_heap(cfg: ModelConfig, max_elements: int = DEFAULT_MAX_ELEMENTS) -> SeparationAlgebra:
    cfg.require_addresses()
    return _build_heap(FREESET, cfg, max_elements)


@dataclass
class ZModModel:
    n: int
    kind: str = ZMOD


def build_zmod(n: int, max_elements: int = DEFAULT_MAX_ELEMENTS) -> SeparationAlgebra:
    if n < 2:
        raise AlgebraError("Z_n needs n >= 2")
    if n > max_elements:
        raise SizeGuardExceeded(n, max_elements)
    labels = [str(i) for i in range(n)]
    table = {(str(a), str(b)): str((a + b) % n) for a in range(n) for b in range(n)}
    alg = seal(labels, "0", table, f"integers mod {n} under addition",
               payloads=list(range(n)), max_elements=max_elements)
    alg.model = ZModModel(n)
    return alg


# ---------------------------------------------------------------------------
# primitive commands

_DESCRIPTOR = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_descriptor(text: str) -> tuple[str, tuple[str, ...]]:
    """``"mutate(x, 7)"`` -> ``("mutate", ("x", "7"))``."""
    m = _DESCRIPTOR.match(text)
    if not m:
        raise CommandError(f"malformed command descriptor {text!r}")
    args = tuple(a.strip() for a in m.group(2).split(",")) if m.group(2) else ()
    return m.group(1), args


PRIMITIVES = {
    "dispose_loc": (PLAIN,),
    "new": (STACK, FREESET),
    "dispose": (STACK, FREESET),
    "mutate": (STACK, FREESET),
    "lookup": (STACK, FREESET),
    "adder": (ZMOD,),
    "multiplier": (ZMOD,),
}


def _lookup_name(name: str, pool: Sequence[Hashable], what: str) -> Hashable:
    for p in pool:
        if str(p) == str(name):
            return p
    raise CommandError(f"unknown {what} {name!r}")


def primitive_action(alg: SeparationAlgebra, descriptor: str | tuple) -> tuple[list[Outcome], str]:
    """The raw (unchecked) action of a primitive command and its display name."""
    if isinstance(descriptor, str):
        cmd, args = parse_descriptor(descriptor)
    else:
        cmd, args = descriptor[0], tuple(str(a) for a in descriptor[1:])
    if cmd not in PRIMITIVES:
        raise CommandError(f"unknown primitive {cmd!r}")
    model = getattr(alg, "model", None)
    kind = getattr(model, "kind", None)
    if kind not in PRIMITIVES[cmd]:
        raise CommandError(f"{cmd} is not available on a {kind or 'table'} algebra")
    arity = {"dispose_loc": 1, "new": 1, "dispose": 1, "mutate": 2, "lookup": 2, "adder": 1, "multiplier": 1}[cmd]
    if len(args) != arity:
        raise CommandError(f"{cmd} takes {arity} argument(s), got {len(args)}")
    name = f"{cmd}({','.join(args)})"

    if kind == ZMOD:
        try:
            c = int(args[0])
        except ValueError:
            raise CommandError(f"{cmd} needs an integer argument") from None
        n = model.n
        if cmd == "adder":
            act = [frozenset({alg.elements[(int(e) + c) % n]}) for e in alg]
        else:
            act = [frozenset({alg.elements[(int(e) * c) % n]}) for e in alg]
        return act, name

    cfg: ModelConfig = model.config
    fn = _HEAP_COMMANDS[cmd]
    resolved = []
    for i, a in enumerate(args):
        if cmd == "dispose_loc":
            resolved.append(_lookup_name(a, cfg.locations, "location"))
        elif cmd == "mutate" and i == 1:
            resolved.append(_lookup_name(a, cfg.values, "value"))
        else:
            resolved.append(_lookup_name(a, cfg.variables, "variable"))
    if cmd == "lookup" and resolved[0] == resolved[1]:
        raise CommandError("lookup needs two distinct variables")
    act = []
    for e in alg:
        out = fn(model, alg.payloads[e], *resolved)
        act.append(FAULT if out is FAULT else frozenset(alg.from_payload(s) for s in out))
    return act, name


def primitive(alg: SeparationAlgebra, descriptor: str | tuple) -> LocalFunction:
    """Build and locality-check a primitive command on ``alg``."""
    act, name = primitive_action(alg, descriptor)
    return LocalFunction.from_action(alg, act, name)


def _dispose_loc(model: HeapModel, s: HeapState, l) -> object:
    cells = s.cells
    if l not in cells:
        return FAULT
    del cells[l]
    return [model.make(s.vars, cells, s.free)]


def _new(model: HeapModel, s: HeapState, x) -> object:
    vars_ = s.vars
    if x not in vars_:
        return FAULT
    cfg = model.config
    cells = s.cells
    out = []
    if model.kind == FREESET:
        if s.free is None:
            return FAULT
        pool = [l for l in cfg.locations if l in s.free]
    else:
        pool = [l for l in cfg.locations if l not in cells]
    for l in pool:
        for w in cfg.values:
            free = None if s.free is None else s.free - {l}
            out.append(model.make({**vars_, x: l}, {**cells, l: w}, free))
    return out


def _dispose(model: HeapModel, s: HeapState, x) -> object:
    vars_, cells = s.vars, s.cells
    if x not in vars_ or vars_[x] not in cells or vars_[x] not in model.config.locations:
        return FAULT
    if model.kind == FREESET and s.free is None:
        return FAULT
    l = vars_[x]
    del cells[l]
    free = None if s.free is None else s.free | {l}
    return [model.make(vars_, cells, free)]


def _mutate(model: HeapModel, s: HeapState, x, v) -> object:
    vars_, cells = s.vars, s.cells
    if x not in vars_ or vars_[x] not in cells:
        return FAULT
    cells[vars_[x]] = v
    return [model.make(vars_, cells, s.free)]


def _lookup(model: HeapModel, s: HeapState, x, y) -> object:
    vars_, cells = s.vars, s.cells
    if x not in vars_ or y not in vars_ or vars_[x] not in cells:
        return FAULT
    vars_[y] = cells[vars_[x]]
    return [model.make(vars_, cells, s.free)]


_HEAP_COMMANDS = {
    "dispose_loc": _dispose_loc,
    "new": _new,
    "dispose": _dispose,
    "mutate": _mutate,
    "lookup": _lookup,
}


# -- fixtures used throughout the tests and docs ------------------------------


def ph2() -> SeparationAlgebra:
    """Plain heap over L={1,2}, Val={7}."""
    return build_plain_heap(ModelConfig((1, 2), (7,)))


def h1_tiny() -> SeparationAlgebra:
    return build_stack_heap(ModelConfig((1, 2), (0, 1, 2), ("x", "y")))


def h2_tiny() -> SeparationAlgebra:
    return build_freeset_heap(ModelConfig((1, 2), (0, 1, 2), ("x", "y")))


def element_of(alg: SeparationAlgebra, stack: dict | None = None, heap: dict | None = None,
               free: Iterable | None = None) -> Element:
    """Element of a heap algebra from its components."""
    model: HeapModel = alg.model
    return alg.from_payload(model.make(stack or {}, heap or {}, None if free is None else frozenset(free)))
