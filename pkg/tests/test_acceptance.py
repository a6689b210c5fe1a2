"""Exit criteria. Each test records one PASS/FAIL line; the terminal summary
(see conftest.py) prints them all at the end of the run."""

import time
from fractions import Fraction

import numpy as np
import pytest
from sympy import primerange

from apxgrp import cayley, cli, setops, structure
from apxgrp.cayley import generate_group
from apxgrp.families import UNIPOTENT_LOWER, UNIPOTENT_UPPER, ball, borel_subset, diagonal_torus, full_group, progression, reduce_mod_p
from apxgrp.ffmat import MatSL
from apxgrp.setops import MatSet

from conftest import all_pairs_diameter, brute_sl2

UNIP = [UNIPOTENT_UPPER, UNIPOTENT_LOWER]
SWEEP_PRIMES = list(primerange(3, 62))

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


def split_anchor(p):
    return MatSL.diag([2, pow(2, -1, p)], p)


def nonsplit_anchor(p):
    squares = {x * x % p for x in range(p)}
    t = next(t for t in range(p) if (t * t - 4) % p not in squares)
    return MatSL.from_rows([[0, p - 1], [1, t]], p)


def test_c01_group_orders():
    t0 = time.perf_counter()
    orders = {p: len(generate_group(reduce_mod_p(UNIP, p))) for p in (3, 5, 7, 11, 13)}
    ok = all(orders[p] == p * (p * p - 1) for p in orders)
    for p, expect in ((3, 24), (5, 120)):
        brute = MatSet.from_matrices(brute_sl2(p))
        ok &= len(brute) == expect and brute == generate_group(reduce_mod_p(UNIP, p))
    dt = time.perf_counter() - t0
    record(1, ok and dt < 10, f"orders {orders}, brute-force match p=3,5, {dt:.2f}s (<10s)")


def test_c02_subgroups_are_1_approximate():
    bad = []
    for p in primerange(2, 14):
        for name, h in (("borel", borel_subset(p)), ("torus", diagonal_torus(p))):
            rep = setops.growth_report(h, certify=True)
            if not (rep.doubling == rep.tripling == 1 and rep.greedy_k == 1):
                bad.append((name, p, rep.to_dict()))
    record(2, not bad, f"borel and split-torus subgroups p<=13: K=1 exact; failures={bad}")


def test_c03_progression_certification():
    t0 = time.perf_counter()
    g = MatSL.from_rows(UNIPOTENT_UPPER, 101)
    rows = []
    ok = True
    for N in (3, 5, 10):
        a = progression(g, N)
        rep = setops.growth_report(a)
        k = setops.certify_approximate(a).K
        ok &= rep.tripling == Fraction(6 * N + 1, 2 * N + 1) and k <= 5
        rows.append((N, str(rep.tripling), int(k)))
    dt = time.perf_counter() - t0
    record(3, ok and dt < 1, f"(N, tripling, K) = {rows}, {dt:.3f}s (<1s)")


def test_c04_torus_exponent():
    worst = []
    t101 = None
    ok = True
    for p in primerange(11, 102):
        t0 = time.perf_counter()
        g = full_group(p)
        rep = structure.lp_exponent(g, 1, structure.TorusHandle(split_anchor(p)))
        dt = time.perf_counter() - t0
        if p == 101:
            t101 = dt
        ok &= 0.30 <= rep.measured_exponent <= 0.36 and rep.count == p - 1
        worst.append(rep.measured_exponent)
    record(
        4,
        ok and t101 < 60,
        f"exponents in [{min(worst):.4f}, {max(worst):.4f}] (need [0.30, 0.36]), p=101 pipeline {t101:.2f}s (<60s)",
    )


def test_c05_conj_class_exponent():
    vals = {}
    for p in (11, 31, 101):
        rep = structure.lp_exponent(full_group(p), 1, structure.ConjClassHandle.of(split_anchor(p)))
        vals[p] = rep.measured_exponent
    ok = all(abs(v - 2 / 3) <= 0.06 for v in vals.values())
    record(5, ok, "exponents " + ", ".join(f"p={p}: {v:.4f}" for p, v in vals.items()) + " (2/3 +- 0.06)")


def test_c06_fibre_identity():
    g = MatSet.from_matrices(brute_sl2(5))
    a = MatSL.diag([2, 3], 5)
    orbit = structure.conjugation_orbit(g, a)
    z = structure.centralizer_in(g, a)
    ok = len(orbit) == 30 and Fraction(len(g), len(orbit)) == 4 == len(z)
    record(6, ok, f"|orbit|={len(orbit)}, |G|/|orbit|={Fraction(len(g), len(orbit))}, |Z(a)|={len(z)}")


def test_c07_involved_census_and_invariance():
    g = MatSet.from_matrices(brute_sl2(5))
    m = len(structure.enumerate_involved_tori(g))
    viol_full = structure.check_conjugation_invariance(g, g)
    ok = m == 25 and not viol_full
    notes = [f"SL2(F5): m={m}, violations={len(viol_full)}"]
    for p in (7, 11):
        s = reduce_mod_p(UNIP, p)
        a = ball(s, 2)
        viol = structure.check_conjugation_invariance(a, s.elements)
        is_full = len(a) == p * (p * p - 1)
        # a nonempty list fails the run only when A is the full group
        ok &= (not viol) or (not is_full)
        notes.append(f"ball r=2 p={p}: |A|={len(a)}, violations={len(viol)} (reported)")
    record(7, ok, "; ".join(notes))


def test_c08_involved_count_exponent():
    vals = {}
    for p in (5, 7, 11):
        vals[p] = structure.count_involved_vs_bound(full_group(p))
    ok = all(c.measured_exponent <= 0.72 for c in vals.values())
    record(8, ok, ", ".join(f"p={p}: m={c.m}, exp={c.measured_exponent:.4f}" for p, c in vals.items()) + " (<=0.72)")


def test_c09_weyl_order():
    got = {}
    for p in (5, 7, 11):
        g = MatSet.from_matrices(brute_sl2(p))
        got[p] = (
            structure.weyl_order(g, structure.TorusHandle(split_anchor(p))),
            structure.weyl_order(g, structure.TorusHandle(nonsplit_anchor(p))),
        )
    record(9, all(v == (2, 2) for v in got.values()), f"(split, nonsplit) = {got}")


@pytest.fixture(scope="module")
def sweep_run():
    cfg = cli.ExperimentConfig.from_dict(
        {"experiment": {"p_list": SWEEP_PRIMES}, "family": {"kind": "mod_p_reduction", "generators": UNIP}}
    )
    t0 = time.perf_counter()
    rep = cli.run("sweep", cfg)
    return rep["payload"], time.perf_counter() - t0


def test_c10_diameter_growth(sweep_run):
    payload, dt = sweep_run
    rows = payload["rows"]
    fit = payload["diameter_fit"]
    g3 = MatSet.from_matrices(brute_sl2(3))
    oracle = all_pairs_diameter(g3, list(reduce_mod_p(UNIP, 3)))
    d3 = next(r["diameter"] for r in rows if r["p"] == 3)
    ok = fit["b"] <= 3 and d3 == oracle and dt < 300
    ok &= all(r["group_order"] == r["p"] * (r["p"] ** 2 - 1) for r in rows)
    diams = [r["diameter"] for r in rows]
    record(10, ok, f"diameters {diams}; fit a={fit['a']:.3f}, b={fit['b']:.3f} (b<=3); p=3 diameter {d3} vs all-pairs {oracle}; sweep {dt:.1f}s (<300s)")


def test_c11_spectral_gap_stability(sweep_run):
    payload, _ = sweep_run
    rows = {r["p"]: r for r in payload["rows"]}
    gap5 = rows[5]["gap"]
    gaps = {p: r["gap"] for p, r in rows.items() if 5 <= p <= 61}
    pmin = min(gaps, key=gaps.get)
    dense_ok = True
    errs = {}
    for p in (3, 5):
        s = reduce_mod_p(UNIP, p)
        w = np.linalg.eigvalsh(cayley.dense_adjacency(generate_group(s), s))
        errs[p] = abs(rows[p]["lambda2"] - w[-2])
        dense_ok &= errs[p] < 1e-6
    stable = gaps[pmin] >= 0.5 * gap5
    record(
        11,
        stable and dense_ok,
        f"gap(5)={gap5:.4f}, min gap {gaps[pmin]:.4f} at p={pmin}, need >= {0.5 * gap5:.4f}; "
        f"dense-oracle |dlambda2| p=3: {errs[3]:.1e}, p=5: {errs[5]:.1e} (<1e-6)",
    )


DETERMINISM_CONFIGS = {
    "growth": {"experiment": {"p": 7}, "family": {"kind": "ball", "radius": 2}},
    "certify": {"experiment": {"p": 101}, "family": {"kind": "progression", "g": UNIPOTENT_UPPER, "N": 10}},
    "structure": {"experiment": {"p": 11, "m": [1, 2]}, "family": {"kind": "ball", "radius": 2}},
    "involved": {"experiment": {"p": 7}, "family": {"kind": "subgroup", "which": "full"}},
    "lp": {"experiment": {"p": 13, "m": [1, 2]}, "family": {"kind": "random", "seed": 5, "count": 2}},
    "diam": {"experiment": {"p_list": [5, 11]}, "family": {"kind": "mod_p_reduction", "generators": UNIP}},
    "girth": {"experiment": {"p_list": [5, 11]}, "family": {"kind": "mod_p_reduction", "generators": UNIP}},
    "gap": {"experiment": {"p_list": [5, 13]}, "family": {"kind": "random", "seed": 2}},
    "sweep": {"experiment": {"p_list": [3, 5, 7, 11, 13]}, "family": {"kind": "mod_p_reduction", "generators": UNIP}},
}


def test_c12_determinism(monkeypatch):
    # small chunks so multi-threaded runs really split the work
    monkeypatch.setattr(setops, "CHUNK_PAIRS", 64)
    differing = []
    for sub, raw in DETERMINISM_CONFIGS.items():
        blobs = set()
        for threads in (1, 2, 4):
            cfg = cli.ExperimentConfig.from_dict(raw)
            blobs.add(cli.payload_bytes(cli.run(sub, cfg, threads=threads)))
        if len(blobs) != 1:
            differing.append(sub)
    setops.set_threads(None)
    record(12, not differing, f"{len(DETERMINISM_CONFIGS)} subcommands x threads {{1,2,4}}; differing={differing}")
