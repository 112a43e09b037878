import itertools
import sys

import pytest

from footprints.local import FAULT
from footprints.models import build_zmod, h1_tiny, h2_tiny, ph2


@pytest.fixture(scope="session")
def PH2():
    return ph2()


@pytest.fixture(scope="session")
def H1():
    return h1_tiny()


@pytest.fixture(scope="session")
def H2():
    return h2_tiny()


@pytest.fixture(scope="session")
def Z3():
    return build_zmod(3)


@pytest.fixture(scope="session")
def Z5():
    return build_zmod(5)


# -- brute-force oracles ------------------------------------------------------
# Written directly from the definitions, with none of the library's caches,
# decomposition tables or bitmasks.


def o_star(alg, p, q):
    if p is FAULT or q is FAULT:
        return FAULT
    out = set()
    for a in p:
        for b in q:
            c = alg.compose(a, b)
            if c is not None:
                out.add(c)
    return frozenset(out)


def o_leq(p, q):
    return q is FAULT or (p is not FAULT and p <= q)


def o_meet(outs):
    acc = FAULT
    for o in outs:
        if o is not FAULT:
            acc = o if acc is FAULT else acc & o
    return acc


_SPLITS = {}


def o_splits(alg, s):
    """Every (frame, core) with frame • core == s, by scanning all pairs."""
    table = _SPLITS.get(alg)
    if table is None:
        table = {e: [] for e in alg}
        for a in alg:
            for b in alg:
                c = alg.compose(a, b)
                if c is not None:
                    table[c].append((a, b))
        _SPLITS[alg] = table
    return table[s]


def o_is_local(alg, act):
    for d in alg:
        for s in alg:
            c = alg.compose(d, s)
            if c is not None and not o_leq(act[c], o_star(alg, frozenset({d}), act[s])):
                return False
    return True


def o_limit(alg, act, s, allowed, strict):
    terms = []
    for fr, core in o_splits(alg, s):
        if core not in allowed or (strict and core == s):
            continue
        terms.append(o_star(alg, frozenset({fr}), act[core]))
    return o_meet(terms)


def o_footprints(alg, act):
    out = set()
    for s in alg:
        lim = o_limit(alg, act, s, set(alg), strict=True)
        if o_leq(act[s], lim) and act[s] != lim:
            out.add(s)
    return frozenset(out)


def o_bla(alg, statements):
    posts = {}
    for pre, post in statements:
        for e in pre:
            posts.setdefault(e, []).append(post)
    out = []
    for s in alg:
        terms = []
        for fr, core in o_splits(alg, s):
            for post in posts.get(core, ()):
                terms.append(o_star(alg, frozenset({fr}), post))
        out.append(o_meet(terms))
    return out


def o_seq(act_f, act_g):
    out = []
    for o in act_f:
        if o is FAULT:
            out.append(FAULT)
            continue
        acc = set()
        bad = False
        for t in o:
            if act_g[t] is FAULT:
                bad = True
                break
            acc |= act_g[t]
        out.append(FAULT if bad else frozenset(acc))
    return out


def o_join_pointwise(a, b):
    return [FAULT if x is FAULT or y is FAULT else x | y for x, y in zip(a, b)]


def o_kstar(alg, act):
    """Naive iteration: join f^0, f^1, ... until the running join stops changing."""
    power = [frozenset({s}) for s in alg]
    acc = list(power)
    for _ in range(4 * len(alg) + 4):
        power = o_seq(power, act)
        new = o_join_pointwise(acc, power)
        if new == acc:
            return acc
        acc = new
    raise AssertionError("no fixpoint")


def o_dc(alg, act):
    for s in alg:
        if act[s] is FAULT:
            continue
        for d in alg:
            combined = o_star(alg, frozenset({d}), frozenset({s}))
            lhs = frozenset()
            for t in combined:
                if act[t] is FAULT:
                    lhs = FAULT
                    break
                lhs |= act[t]
            if lhs != o_star(alg, frozenset({d}), act[s]):
                return False
    return True


def all_predicates(alg):
    elems = list(alg)
    for r in range(len(elems) + 1):
        for combo in itertools.combinations(elems, r):
            yield frozenset(combo)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
