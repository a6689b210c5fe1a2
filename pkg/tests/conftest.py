import itertools
import sys
from collections import deque

import pytest

from apxgrp.ffmat import MatSL
from apxgrp.setops import MatSet


def brute_sl2(p):
    """Every 2x2 matrix over F_p with determinant 1, by exhaustive search."""
    return [
        MatSL._trusted(2, p, (a, b, c, d))
        for a, b, c, d in itertools.product(range(p), repeat=4)
        if (a * d - b * c) % p == 1
    ]


def all_pairs_diameter(elements, gens):
    """Max over all sources of BFS eccentricity, on plain Python dicts."""
    elems = list(elements)
    diam = 0
    for src in elems:
        dist = {src: 0}
        q = deque([src])
        while q:
            x = q.popleft()
            for s in gens:
                y = x @ s
                if y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        assert len(dist) == len(elems)
        diam = max(diam, max(dist.values()))
    return diam


def shortest_relation(gens, max_len):
    """Shortest reduced word over gens (no g followed by g^-1) equal to id."""
    gens = list(gens)
    n, p = gens[0].n, gens[0].p
    ident = MatSL.identity(n, p)
    inv = [next(j for j, h in enumerate(gens) if (g @ h) == ident) for g in gens]
    if any(inv[i] == i for i in range(len(gens))):
        return 2
    layer = [((i,), g) for i, g in enumerate(gens)]
    for length in range(2, max_len + 1):
        nxt = []
        for word, val in layer:
            for j, g in enumerate(gens):
                if j == inv[word[-1]]:
                    continue
                v = val @ g
                # closing reduced cycle: last letter must not cancel the first cyclically
                if v == ident and j != inv[word[0]]:
                    return length
                nxt.append((word + (j,), v))
        layer = nxt
    return None


@pytest.fixture(scope="session")
def sl2_5():
    return MatSet.from_matrices(brute_sl2(5))


@pytest.fixture(scope="session")
def sl2_3():
    return MatSet.from_matrices(brute_sl2(3))


@pytest.fixture(scope="session")
def sl2_7():
    return MatSet.from_matrices(brute_sl2(7))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")
