"""Maximal tori, centralizers and conjugacy classes inside finite subsets of
SL_n(F_p), and the intersection-exponent measurements built on them.

Everything here works over F_p. A maximal torus is handled through a
regular semisimple anchor ``a``: its points are the elements commuting with
``a``. For a regular element the commutant in M_n(F_p) is the algebra
F_p[a], so two regular semisimple elements lie on the same torus exactly
when they generate the same algebra. :func:`torus_keys` turns that algebra
into a hashable canonical form (the reduced row-echelon basis of
``I, a, ..., a^{n-1}``), which lets the census bucket millions of elements
without pairwise commutator tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from apxgrp import ffmat, setops
from apxgrp.errors import UsageError
from apxgrp.ffmat import CharPoly, MatSL
from apxgrp.setops import DEFAULT_BUDGET, MatSet


class TorusHandle:
    """The maximal torus centralizing a regular semisimple anchor."""

    __slots__ = ("anchor", "_key")

    def __init__(self, anchor: MatSL):
        if not ffmat.is_regular_semisimple(anchor):
            raise UsageError(f"torus anchor must be regular semisimple: {anchor}")
        self.anchor = anchor
        self._key = None

    @property
    def n(self) -> int:
        return self.anchor.n

    @property
    def p(self) -> int:
        return self.anchor.p

    def key(self) -> bytes:
        if self._key is None:
            self._key = torus_keys(self.anchor.to_array()[None], self.p)[0].tobytes()
        return self._key

    def members_mask(self, arr: np.ndarray) -> np.ndarray:
        return ffmat.commutes_mask(arr, self.anchor.to_array(), self.p)

    def __contains__(self, x: MatSL) -> bool:
        return ffmat.mat_mul(x, self.anchor) == ffmat.mat_mul(self.anchor, x)

    def conjugate_by(self, g: MatSL) -> TorusHandle:
        """The torus ``g T g^{-1}``."""
        return TorusHandle(ffmat.conjugate(g, self.anchor))

    def __eq__(self, other):
        if not isinstance(other, TorusHandle):
            return NotImplemented
        return self.anchor.p == other.anchor.p and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"TorusHandle(anchor={self.anchor.rows()}, p={self.p})"


class ConjClassHandle:
    """Conjugacy class of a regular semisimple element, by characteristic polynomial."""

    __slots__ = ("anchor_charpoly", "n")

    def __init__(self, anchor_charpoly: CharPoly):
        if not ffmat.is_squarefree(anchor_charpoly.coefficients, anchor_charpoly.p):
            raise UsageError("conjugacy-class anchor must be regular semisimple")
        self.anchor_charpoly = anchor_charpoly
        self.n = anchor_charpoly.degree

    @classmethod
    def of(cls, a: MatSL) -> ConjClassHandle:
        ffmat._require_large_char(a.n, a.p)
        return cls(ffmat.char_poly(a))

    @property
    def p(self) -> int:
        return self.anchor_charpoly.p

    def members_mask(self, arr: np.ndarray) -> np.ndarray:
        # equal squarefree char poly already forces regular semisimple
        cps = ffmat.char_poly_batch(arr, self.p)
        return np.all(cps == np.array(self.anchor_charpoly.coefficients), axis=1)

    def __repr__(self):
        return f"ConjClassHandle({self.anchor_charpoly!r})"


@dataclass
class LPReport:
    variety_kind: str
    m: int
    count: int
    set_size: int
    measured_exponent: float
    predicted_exponent: float
    n: int
    p: int

    def to_dict(self) -> dict:
        d = {
            "variety_kind": self.variety_kind,
            "m": self.m,
            "count": self.count,
            "set_size": self.set_size,
            "measured_exponent": self.measured_exponent,
            "predicted_exponent": self.predicted_exponent,
            "n": self.n,
            "p": self.p,
        }
        if self.variety_kind == "torus":
            d["torus_bound_exponent"] = 1.0 / (self.n + 1)
        return d


def _rref_batch(M: np.ndarray, p: int) -> np.ndarray:
    """Row-reduced echelon form mod p of every matrix in an ``(N, r, c)`` stack."""
    M = np.array(M, dtype=np.int64) % p
    N, r, c = M.shape
    inv = ffmat.inverse_table(p)
    prow = np.zeros(N, dtype=np.int64)
    rows = np.arange(r)
    for col in range(c):
        nz = (M[:, :, col] != 0) & (rows[None, :] >= prow[:, None])
        has = nz.any(axis=1)
        if not has.any():
            continue
        idx = np.nonzero(has)[0]
        pr = prow[idx]
        pv = np.argmax(nz[idx], axis=1)
        tmp = M[idx, pr].copy()
        M[idx, pr] = M[idx, pv]
        M[idx, pv] = tmp
        scale = inv[M[idx, pr, col]]
        M[idx, pr] = (M[idx, pr] * scale[:, None]) % p
        f = M[idx, :, col].copy()
        f[np.arange(idx.size), pr] = 0
        M[idx] = (M[idx] - f[:, :, None] * M[idx, pr][:, None, :]) % p
        prow[idx] += 1
    return M


def torus_keys(arr: np.ndarray, p: int) -> np.ndarray:
    """Canonical key of the torus through each regular semisimple matrix.

    Returns an ``(N, k)`` int64 array; rows are equal iff the elements
    commute. Only meaningful for regular semisimple inputs.
    """
    n = arr.shape[-1]
    arr = arr.reshape(-1, n, n)
    if n == 2:
        # F_p[x] = span(I, x0) with x0 the traceless part; key = x0 up to scaling
        half = pow(2, -1, p)
        tr = (arr[:, 0, 0] + arr[:, 1, 1]) % p
        y = np.stack([(arr[:, 0, 0] - tr * half) % p, arr[:, 0, 1], arr[:, 1, 0]], axis=1)
        first = np.argmax(y != 0, axis=1)
        lead = y[np.arange(len(y)), first]
        return (y * ffmat.inverse_table(p)[lead][:, None]) % p
    basis = np.empty((len(arr), n, n * n), dtype=np.int64)
    power = np.broadcast_to(np.eye(n, dtype=np.int64), arr.shape).copy()
    for k in range(n):
        basis[:, k] = power.reshape(len(arr), n * n)
        power = ffmat.mul_batch(power, arr, p)
    return _rref_batch(basis, p).reshape(len(arr), n * n * n)


def centralizer_in(s: MatSet, a: MatSL) -> MatSet:
    """``{x in s : xa = ax}``."""
    if (s.n, s.p) != (a.n, a.p):
        raise UsageError("ambient mismatch")
    if not len(s):
        return s
    mask = ffmat.commutes_mask(s.array(), a.to_array(), s.p)
    return MatSet(s.n, s.p, s.codes[mask])


def same_torus(a: MatSL, b: MatSL) -> bool:
    """Whether two regular semisimple elements lie on one maximal torus."""
    if not (ffmat.is_regular_semisimple(a) and ffmat.is_regular_semisimple(b)):
        raise UsageError("same_torus needs regular semisimple arguments")
    return ffmat.mat_mul(a, b) == ffmat.mat_mul(b, a)


def _power(a: MatSet, m: int, budget: int) -> MatSet:
    if m < 1:
        raise UsageError("power m must be >= 1")
    return a if m == 1 else setops.power_set(a, m, budget=budget)


def torus_intersection(a: MatSet, m: int, t: TorusHandle, budget: int = DEFAULT_BUDGET) -> int:
    """``|A^m ∩ T|``."""
    am = _power(a, m, budget)
    if not len(am):
        return 0
    return int(t.members_mask(am.array()).sum())


def deficient_count(a: MatSet, m: int, t: TorusHandle, budget: int = DEFAULT_BUDGET) -> int:
    """Elements of ``A^m ∩ T`` that are not regular semisimple."""
    ffmat._require_large_char(a.n, a.p)
    am = _power(a, m, budget)
    if not len(am):
        return 0
    arr = am.array()
    on_t = t.members_mask(arr)
    return int((on_t & ~ffmat.regular_semisimple_mask(arr, a.p)).sum())


def conj_class_intersection(a: MatSet, m: int, c: ConjClassHandle, budget: int = DEFAULT_BUDGET) -> int:
    """``|A^m ∩ C(a)|``."""
    am = _power(a, m, budget)
    if not len(am):
        return 0
    return int(c.members_mask(am.array()).sum())


def predicted_exponent(kind: str, n: int) -> float:
    dim_g = n * n - 1
    if kind == "torus":
        return (n - 1) / dim_g
    if kind == "deficient":
        return (n - 2) / dim_g
    if kind == "conj_class":
        return (n * n - n) / dim_g
    raise UsageError(f"unknown variety kind {kind!r}")


def _log_ratio(count: int, size: int) -> float:
    if count <= 1 or size <= 1:
        return 0.0
    return math.log(count) / math.log(size)


def lp_exponent(a: MatSet, m: int, v, kind: str | None = None, budget: int = DEFAULT_BUDGET) -> LPReport:
    """Measured ``log|A^m ∩ V| / log|A|`` next to the dimension ratio.

    ``v`` is a :class:`TorusHandle` or :class:`ConjClassHandle`; pass
    ``kind="deficient"`` with a torus to measure its non-regular part.
    """
    if len(a) < 2:
        raise UsageError("lp_exponent needs |A| >= 2")
    if isinstance(v, TorusHandle):
        kind = kind or "torus"
        if kind == "deficient":
            count = deficient_count(a, m, v, budget=budget)
        elif kind == "torus":
            count = torus_intersection(a, m, v, budget=budget)
        else:
            raise UsageError(f"variety kind {kind!r} does not match a torus handle")
    elif isinstance(v, ConjClassHandle):
        kind = "conj_class"
        count = conj_class_intersection(a, m, v, budget=budget)
    else:
        raise UsageError(f"unsupported variety handle {type(v).__name__}")
    return LPReport(
        variety_kind=kind,
        m=m,
        count=count,
        set_size=len(a),
        measured_exponent=_log_ratio(count, len(a)),
        predicted_exponent=predicted_exponent(kind, a.n),
        n=a.n,
        p=a.p,
    )


def _involved_keys(a: MatSet, budget: int):
    """Unique torus keys of regular semisimple elements of A², with anchors."""
    ffmat._require_large_char(a.n, a.p)
    a2 = setops.product(a, a, budget=budget)
    arr = a2.array()
    reg = ffmat.regular_semisimple_mask(arr, a.p)
    codes = a2.codes[reg]
    if not codes.size:
        return np.empty((0, 0), dtype=np.int64), codes
    keys = torus_keys(arr[reg], a.p)
    uniq, first = np.unique(keys, axis=0, return_index=True)
    # codes are sorted, so the first occurrence is the lowest-code anchor
    return uniq, codes[first]


def enumerate_involved_tori(a: MatSet, budget: int = DEFAULT_BUDGET) -> list[TorusHandle]:
    """Tori meeting A² in at least one regular semisimple element."""
    _, anchors = _involved_keys(a, budget)
    return [TorusHandle(ffmat.decode(int(c), a.n, a.p)) for c in np.sort(anchors)]


@dataclass(frozen=True)
class Violation:
    torus_anchor: MatSL
    conjugator: MatSL

    def to_dict(self) -> dict:
        return {"torus_anchor": self.torus_anchor.rows(), "conjugator": self.conjugator.rows()}


def check_conjugation_invariance(a: MatSet, conjugators: MatSet, budget: int = DEFAULT_BUDGET) -> list[Violation]:
    """Pairs (T, g) with T involved but ``g^{-1} T g`` not involved."""
    keys, anchors = _involved_keys(a, budget)
    if not anchors.size or not len(conjugators):
        return []
    known = {row.tobytes() for row in keys}
    g = conjugators.array()
    ginv = ffmat.inv_batch(g, a.p)
    out = []
    for code in np.sort(anchors):
        anc = ffmat.decode_batch(np.array([code]), a.n, a.p)[0]
        conj = ffmat.mul_batch(ffmat.mul_batch(ginv, anc, a.p), g, a.p)
        ck = torus_keys(conj, a.p)
        for j, row in enumerate(ck):
            if row.tobytes() not in known:
                out.append(Violation(ffmat.decode(int(code), a.n, a.p), ffmat.decode(int(conjugators.codes[j]), a.n, a.p)))
    return out


@dataclass
class InvolvedCount:
    m: int
    set_size: int
    measured_exponent: float
    bound_exponent: float

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "set_size": self.set_size,
            "measured_exponent": self.measured_exponent,
            "bound_exponent": self.bound_exponent,
        }


def count_involved_vs_bound(a: MatSet, budget: int = DEFAULT_BUDGET) -> InvolvedCount:
    _, anchors = _involved_keys(a, budget)
    m = int(anchors.size)
    return InvolvedCount(m=m, set_size=len(a), measured_exponent=_log_ratio(m, len(a)), bound_exponent=a.n / (a.n + 1))


def regular_proportion(a: MatSet, k: int = 1, budget: int = DEFAULT_BUDGET) -> Fraction:
    """Exact fraction of regular semisimple elements in ``A^k``."""
    ffmat._require_large_char(a.n, a.p)
    ak = _power(a, k, budget)
    if not len(ak):
        return Fraction(0)
    reg = int(ffmat.regular_semisimple_mask(ak.array(), a.p).sum())
    return Fraction(reg, len(ak))


def conjugation_orbit(g: MatSet, a: MatSL) -> MatSet:
    """``{x a x^{-1} : x in g}``."""
    arr = g.array()
    conj = ffmat.mul_batch(ffmat.mul_batch(arr, a.to_array(), g.p), ffmat.inv_batch(arr, g.p), g.p)
    return MatSet.from_array(conj, g.p)


def weyl_order(g: MatSet, t: TorusHandle, budget: int = DEFAULT_BUDGET) -> int:
    """``|N_g(T)| / |T ∩ g|`` for a finite group g given by its elements."""
    if not setops.product(g, g, budget=budget) == g:
        raise UsageError("weyl_order needs a set closed under multiplication")
    arr = g.array()
    anc = t.anchor.to_array()
    conj = ffmat.mul_batch(ffmat.mul_batch(arr, anc, g.p), ffmat.inv_batch(arr, g.p), g.p)
    normalizes = ffmat.commutes_mask(conj, anc, g.p)
    centralizes = t.members_mask(arr)
    num, den = int(normalizes.sum()), int(centralizes.sum())
    if num % den:
        raise AssertionError(f"normalizer order {num} not divisible by torus order {den}")
    return num // den


def default_torus(n: int, p: int) -> TorusHandle | None:
    """A split torus anchor ``diag(l_1, ..., l_n)`` with distinct entries, if F_p has room."""
    if p <= n:
        return None
    for first in range(2, p):
        vals = [first]
        for _ in range(n - 2):
            nxt = next((x for x in range(2, p) if x not in vals), None)
            if nxt is None:
                return None
            vals.append(nxt)
        last = 1
        for v in vals:
            last = last * pow(v, -1, p) % p
        vals.append(last)
        if len(set(vals)) == n:
            return TorusHandle(MatSL.diag(vals, p))
    return None
