"""Random generators for specifications, local functions and derivations."""

from __future__ import annotations

import random
from collections.abc import Sequence

from .algebra import Element, SeparationAlgebra
from .local import FAULT, LocalFunction, Outcome
from .proof import (
    Derivation,
    axiom,
    consequence_node,
    frame_node,
    intersection_node,
    step_error,
    union_node,
)
from .specs import Specification, Statement, bla, spec_on


def random_predicate(alg: SeparationAlgebra, rng: random.Random, lo: int = 0, hi: int = 3) -> frozenset:
    k = rng.randint(lo, min(hi, len(alg)))
    return frozenset(rng.sample(alg.elements, k))


def random_spec(
    alg: SeparationAlgebra,
    rng: random.Random,
    statements: tuple[int, int] = (1, 3),
    pre: tuple[int, int] = (1, 2),
    post: tuple[int, int] = (0, 4),
) -> Specification:
    n = rng.randint(*statements)
    return Specification(
        alg,
        [
            Statement(random_predicate(alg, rng, *pre), random_predicate(alg, rng, *post))
            for _ in range(n)
        ],
    )


def local_closure(alg: SeparationAlgebra, action: Sequence[Outcome], name: str = "closure") -> LocalFunction:
    """The greatest local function below an arbitrary total action."""
    raw = LocalFunction(alg, action, name)
    g = bla(spec_on(alg, raw))
    return LocalFunction.from_action(alg, g.action, name)


def prune(action: Sequence[Outcome], rng: random.Random, rate: float = 0.3) -> list[Outcome]:
    out: list[Outcome] = []
    for o in action:
        if o is FAULT or not o or rng.random() >= rate:
            out.append(o)
        else:
            keep = rng.randint(0, len(o) - 1)
            out.append(frozenset(rng.sample(sorted(o), keep)))
    return out


def random_local_function(alg: SeparationAlgebra, rng: random.Random, name: str = "rand") -> LocalFunction:
    """Best local action of a random specification, randomly pruned, then closed back to locality."""
    base = bla(random_spec(alg, rng))
    return local_closure(alg, prune(base.action, rng), name)


def random_derivation(spec: Specification, rng: random.Random, depth: int = 3) -> Derivation:
    """A random tree of valid rule applications using the given axioms."""
    alg = spec.algebra
    stmts = spec.sorted()
    if depth <= 0 or rng.random() < 0.25:
        return axiom(rng.choice(stmts))
    rule = rng.choice(("Frame", "Consequence", "Union", "Intersection"))
    if rule == "Frame":
        return frame_node(random_derivation(spec, rng, depth - 1), random_predicate(alg, rng, 1, 2))
    if rule == "Consequence":
        d = random_derivation(spec, rng, depth - 1)
        pre = sorted(d.conclusion.pre)
        new_pre = frozenset(rng.sample(pre, rng.randint(0, len(pre))))
        new_post = d.conclusion.post | random_predicate(alg, rng, 0, 2)
        return consequence_node(d, new_pre, new_post)
    kids = [random_derivation(spec, rng, depth - 1) for _ in range(rng.randint(1, 3))]
    if rule == "Union":
        return union_node(kids)
    return intersection_node(kids)


def random_statement(alg: SeparationAlgebra, rng: random.Random) -> Statement:
    return Statement(random_predicate(alg, rng, 0, 3), random_predicate(alg, rng, 0, 6))


def pick(alg: SeparationAlgebra, rng: random.Random) -> Element:
    return rng.choice(alg.elements)


def mutate_derivation(
    d: Derivation, spec: Specification, rng: random.Random
) -> tuple[Derivation, tuple[int, ...]]:
    """Break exactly one node's rule by perturbing its conclusion.

    Returns the mutant and the path of the broken node.  Ancestors keep their
    old conclusions, so a checker may also flag one of them first.
    """
    alg = spec.algebra
    nodes = list(d.nodes())
    rng.shuffle(nodes)
    elems = list(alg)
    for path, node in nodes:
        pre, post = node.conclusion
        candidates = [(pre ^ {e}, post) for e in elems] + [(pre, post ^ {e}) for e in elems]
        rng.shuffle(candidates)
        for new_pre, new_post in candidates:
            broken = Derivation(node.rule, Statement(new_pre, new_post), node.premises, node.frame)
            if step_error(broken, spec.statements) is not None:
                return d.replace(path, broken), path
    raise ValueError("no single-node mutation breaks this derivation")
