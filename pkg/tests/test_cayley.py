import math

import numpy as np
import pytest

from apxgrp import cayley, setops
from apxgrp.cayley import GenSet, diameter, generate_group, girth, spectral_gap
from apxgrp.families import UNIPOTENT_LOWER, UNIPOTENT_UPPER, random_generators, reduce_mod_p
from apxgrp.ffmat import MatSL, sl_order
from apxgrp.setops import MatSet

from conftest import all_pairs_diameter, brute_sl2, shortest_relation

UNIP = [UNIPOTENT_UPPER, UNIPOTENT_LOWER]


def unip(p):
    return reduce_mod_p(UNIP, p)


def cyclic4():
    return GenSet.from_matrices([MatSL.diag([2, 3], 5)])


def test_genset_drops_identity_and_symmetrizes():
    s = GenSet.from_matrices([MatSL.identity(2, 7), MatSL.from_rows([[1, 1], [0, 1]], 7)])
    assert len(s) == 2
    assert s.elements.is_symmetric()


@pytest.mark.parametrize("p", [3, 5, 7, 11, 13])
def test_generate_group_order(p):
    assert len(generate_group(unip(p))) == p * (p * p - 1)


@pytest.mark.parametrize("p", [3, 5])
def test_generate_group_matches_brute_enumeration(p):
    assert generate_group(unip(p)) == MatSet.from_matrices(brute_sl2(p))


def test_generate_small_groups():
    assert len(generate_group(cyclic4())) == 4
    trivial = GenSet(MatSet.identity(2, 5))
    assert generate_group(trivial) == MatSet.identity(2, 5)


def test_diameter_matches_all_pairs_p3(sl2_3):
    st = diameter(unip(3))
    assert st.diameter == all_pairs_diameter(sl2_3, list(unip(3))) == 4
    assert sum(st.sphere_sizes) == st.group_order == 24
    assert st.sphere_sizes[0] == 1


def test_diameter_small_cases():
    assert diameter(cyclic4()).diameter == 2
    st = diameter(GenSet(MatSet.identity(2, 5)))
    assert (st.diameter, st.group_order, st.sphere_sizes) == (0, 1, [1])


def test_diameter_monotone_under_augmentation():
    for p in (5, 7, 11):
        base = unip(p)
        extra = reduce_mod_p(UNIP + [[[2, 1], [1, 1]]], p)
        assert diameter(extra).diameter <= diameter(base).diameter


def test_girth_cyclic():
    assert girth(cyclic4()) == 4


@pytest.mark.parametrize("p", [3, 5, 7])
def test_girth_matches_word_oracle(p):
    s = unip(p)
    assert girth(s) == shortest_relation(list(s), 8)


def test_girth_involution_convention():
    w = MatSL.from_rows([[0, 1], [4, 0]], 5)  # order 4, w^2 = -1
    minus = MatSL.diag([4, 4], 5)
    assert girth(GenSet.from_matrices([minus, MatSL.from_rows([[1, 1], [0, 1]], 5)])) == 2
    assert girth(GenSet.from_matrices([w])) == 4


def test_girth_at_most_twice_diameter_plus_one():
    for p in (5, 7, 11, 13):
        s = unip(p)
        assert girth(s) <= 2 * diameter(s).diameter + 1


def dense_lambda2(s):
    g = generate_group(s)
    w = np.linalg.eigvalsh(cayley.dense_adjacency(g, s))
    return w[-2]


def test_spectral_cyclic4():
    rep = spectral_gap(cyclic4())
    # normalized 4-cycle: cos(2 pi k / 4) = 1, 0, -1, 0
    assert rep.lambda2 == pytest.approx(0.0, abs=1e-8)
    assert rep.gap + rep.lambda2 == pytest.approx(1.0)


@pytest.mark.parametrize("p", [3, 5, 7, 11, 13, 17])
def test_spectral_matches_dense_oracle(p):
    s = unip(p)
    rep = spectral_gap(s)
    assert rep.converged and rep.generated_full_group
    assert abs(rep.lambda2 - dense_lambda2(s)) < 1e-6


def test_spectral_random_generators_dense():
    s = random_generators(7, 2, 2, seed=3)
    assert abs(spectral_gap(s).lambda2 - dense_lambda2(s)) < 1e-6


def test_spectral_proper_subgroup_flagged():
    rep = spectral_gap(cyclic4())
    assert not rep.generated_full_group
    assert rep.group_order == 4


def test_gap_positive_iff_connected():
    for p in (5, 7):
        rep = spectral_gap(unip(p))
        assert rep.gap > 0


def test_spectral_deterministic_across_threads():
    s = unip(13)
    setops.set_threads(1)
    a = spectral_gap(s)
    setops.set_threads(4)
    b = spectral_gap(s)
    setops.set_threads(None)
    assert a.lambda2 == b.lambda2 and a.iterations == b.iterations


def test_nonconvergence_is_reported_not_raised():
    rep = spectral_gap(unip(11), iter_cap=3)
    assert not rep.converged and rep.iterations == 3


def test_sweep_rows():
    table = cayley.sweep(UNIP, [3, 5, 7, 11, 13])
    assert [r.group_order for r in table.rows] == [p * (p * p - 1) for p in (3, 5, 7, 11, 13)]
    assert all(r.generated for r in table.rows)
    assert cayley.sweep(UNIP, []).rows == []


def test_sweep_skips_bad_prime():
    # det = 2 over Z, so reduction is never in SL_2
    table = cayley.sweep([[[2, 0], [0, 1]]], [5])
    assert table.rows[0].note.startswith("skipped")


def test_fit_log_power_recovers_exponent():
    ps = [5, 7, 11, 13, 17, 19, 23]
    diams = [3.0 * math.log(p) ** 1.5 for p in ps]
    fit = cayley.fit_log_power(ps, diams)
    assert fit["b"] == pytest.approx(1.5, abs=1e-9)
    assert fit["a"] == pytest.approx(3.0, abs=1e-9)
