"""Finite subsets of SL_n(F_p), product sets, growth statistics and
approximate-group certificates.

A :class:`MatSet` stores a sorted, duplicate-free int64 array of canonical
codes. Every product-set routine works on chunks of the left factor and
merges by code, so the result does not depend on the chunking or on the
number of worker threads.
"""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

from apxgrp import ffmat
from apxgrp.errors import ResourceBudgetError, UsageError
from apxgrp.ffmat import MatSL

DEFAULT_BUDGET = 50_000_000
# pairs multiplied per chunk; bounds peak memory of one product step
CHUNK_PAIRS = 2_000_000

_threads = os.cpu_count() or 1


def set_threads(n: int | None) -> None:
    """Worker threads used by product-set and BFS kernels (``None`` = all cores)."""
    global _threads
    _threads = max(1, int(n)) if n else (os.cpu_count() or 1)


def get_threads() -> int:
    return _threads


class MatSet:
    """Immutable finite set of SL_n(F_p) elements keyed by canonical code."""

    __slots__ = ("n", "p", "codes", "_arr")

    def __init__(self, n: int, p: int, codes=()):
        self.n = int(n)
        self.p = int(p)
        c = np.unique(np.asarray(codes, dtype=np.int64))
        c.setflags(write=False)
        self.codes = c
        self._arr = None

    @classmethod
    def from_matrices(cls, mats: Iterable[MatSL], n: int | None = None, p: int | None = None) -> MatSet:
        mats = list(mats)
        if not mats:
            if n is None or p is None:
                raise UsageError("empty MatSet needs explicit n and p")
            return cls(n, p)
        n0, p0 = mats[0].n, mats[0].p
        if (n is not None and n != n0) or (p is not None and p != p0):
            raise UsageError("matrix parameters disagree with requested (n, p)")
        for m in mats:
            if (m.n, m.p) != (n0, p0):
                raise UsageError("all elements of a MatSet must share (n, p)")
        return cls(n0, p0, [ffmat.encode(m) for m in mats])

    @classmethod
    def from_array(cls, arr: np.ndarray, p: int) -> MatSet:
        n = arr.shape[-1]
        return cls(n, p, ffmat.encode_batch(arr.reshape(-1, n, n), p))

    @classmethod
    def identity(cls, n: int, p: int) -> MatSet:
        return cls.from_matrices([MatSL.identity(n, p)])

    def array(self) -> np.ndarray:
        """Decoded ``(len, n, n)`` residues, cached."""
        if self._arr is None:
            arr = ffmat.decode_batch(self.codes, self.n, self.p)
            arr.setflags(write=False)
            self._arr = arr
        return self._arr

    def __len__(self) -> int:
        return int(self.codes.size)

    def __iter__(self) -> Iterator[MatSL]:
        for c in self.codes:
            yield ffmat.decode(int(c), self.n, self.p)

    def __contains__(self, item) -> bool:
        code = ffmat.encode(item) if isinstance(item, MatSL) else int(item)
        i = np.searchsorted(self.codes, code)
        return bool(i < self.codes.size and self.codes[i] == code)

    def contains_codes(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        if self.codes.size == 0:
            return np.zeros(codes.shape, dtype=bool)
        idx = np.searchsorted(self.codes, codes)
        idx = np.minimum(idx, self.codes.size - 1)
        return self.codes[idx] == codes

    def index_of(self, codes: np.ndarray) -> np.ndarray:
        """Positions of ``codes`` in this set; -1 where absent."""
        codes = np.asarray(codes, dtype=np.int64)
        idx = np.searchsorted(self.codes, codes)
        idx_c = np.minimum(idx, max(self.codes.size - 1, 0))
        hit = self.codes[idx_c] == codes if self.codes.size else np.zeros(codes.shape, bool)
        return np.where(hit, idx_c, -1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MatSet):
            return NotImplemented
        return (self.n, self.p) == (other.n, other.p) and np.array_equal(self.codes, other.codes)

    def __hash__(self):
        return hash((self.n, self.p, self.codes.tobytes()))

    def issubset(self, other: MatSet) -> bool:
        _check_same(self, other)
        return bool(other.contains_codes(self.codes).all())

    def union(self, *others: MatSet) -> MatSet:
        for o in others:
            _check_same(self, o)
        return MatSet(self.n, self.p, np.concatenate([self.codes] + [o.codes for o in others]))

    def __or__(self, other: MatSet) -> MatSet:
        return self.union(other)

    def inverse(self) -> MatSet:
        if not len(self):
            return self
        return MatSet(self.n, self.p, ffmat.inv_codes(self.codes, self.n, self.p))

    def conjugate_by(self, g: MatSL) -> MatSet:
        """``g S g^{-1}``."""
        gi = ffmat.mat_inv(g)
        arr = ffmat.mul_batch(ffmat.mul_batch(g.to_array(), self.array(), self.p), gi.to_array(), self.p)
        return MatSet.from_array(arr, self.p)

    def is_symmetric(self) -> bool:
        return self.inverse() == self

    def contains_identity(self) -> bool:
        return MatSL.identity(self.n, self.p) in self

    def __repr__(self):
        return f"MatSet(n={self.n}, p={self.p}, size={len(self)})"


def _check_same(a: MatSet, b: MatSet) -> None:
    if (a.n, a.p) != (b.n, b.p):
        raise UsageError(
            f"ambient mismatch: SL_{a.n}(F_{a.p}) vs SL_{b.n}(F_{b.p})"
        )


def _product_chunk(left: np.ndarray, right: np.ndarray, p: int) -> np.ndarray:
    prod = ffmat.mul_batch(left[:, None], right[None, :], p)
    return np.unique(ffmat.encode_batch(prod, p))


def product(a: MatSet, b: MatSet, budget: int = DEFAULT_BUDGET) -> MatSet:
    """The product set ``{xy : x in a, y in b}``."""
    _check_same(a, b)
    if not len(a) or not len(b):
        return MatSet(a.n, a.p)
    la, rb = a.array(), b.array()
    step = max(1, CHUNK_PAIRS // len(b))
    chunks = [la[i:i + step] for i in range(0, len(a), step)]
    if _threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=_threads) as pool:
            parts = list(pool.map(lambda c: _product_chunk(c, rb, a.p), chunks))
    else:
        parts = []
        acc = np.empty(0, dtype=np.int64)
        for c in chunks:
            acc = np.union1d(acc, _product_chunk(c, rb, a.p))
            if acc.size > budget:
                break
        parts = [acc]
    merged = np.unique(np.concatenate(parts))
    if merged.size > budget:
        raise ResourceBudgetError(
            f"product set has more than {budget} elements"
        )
    return MatSet(a.n, a.p, merged)


def power_set(a: MatSet, k: int, budget: int = DEFAULT_BUDGET) -> MatSet:
    """The k-fold product set ``A^k``."""
    if k < 1:
        raise UsageError("power_set needs k >= 1")
    result = a
    for _ in range(k - 1):
        # the growing factor goes on the outside (chunked), the small one inside
        result = product(result, a, budget=budget)
    return result


def symmetrize(a: MatSet) -> MatSet:
    return a.union(a.inverse(), MatSet.identity(a.n, a.p))


def _require_symmetric(a: MatSet, what: str) -> None:
    if not a.contains_identity() or not a.is_symmetric():
        raise UsageError(f"{what} needs a symmetric set containing the identity; symmetrize first")


@dataclass
class ControlWitness:
    X: MatSet
    K: Fraction
    label: str = "greedy upper bound"

    def to_dict(self) -> dict:
        return {
            "K": int(self.K) if self.K.denominator == 1 else str(self.K),
            "label": self.label,
            "X_codes": [int(c) for c in self.X.codes],
        }


@dataclass
class GrowthReport:
    size1: int
    size2: int
    size3: int
    greedy_k: int | None = None

    @property
    def doubling(self) -> Fraction:
        return Fraction(self.size2, self.size1)

    @property
    def tripling(self) -> Fraction:
        return Fraction(self.size3, self.size1)

    def to_dict(self) -> dict:
        return {
            "size1": self.size1,
            "size2": self.size2,
            "size3": self.size3,
            "doubling": str(self.doubling),
            "tripling": str(self.tripling),
            "doubling_float": float(self.doubling),
            "tripling_float": float(self.tripling),
            "greedy_k": self.greedy_k,
        }


def growth_report(a: MatSet, certify: bool = False, budget: int = DEFAULT_BUDGET) -> GrowthReport:
    _require_symmetric(a, "growth_report")
    a2 = product(a, a, budget=budget)
    a3 = product(a2, a, budget=budget)
    k = certify_approximate(a, budget=budget).K if certify else None
    return GrowthReport(len(a), len(a2), len(a3), None if k is None else int(k))


def _translate_hits(x: np.ndarray, a_arr: np.ndarray, target: MatSet, p: int) -> np.ndarray:
    """Indices into ``target`` of ``x * A`` (elements outside target dropped)."""
    codes = ffmat.encode_batch(ffmat.mul_batch(x, a_arr, p), p)
    idx = target.index_of(codes)
    return np.unique(idx[idx >= 0])


def certify_approximate(a: MatSet, budget: int = DEFAULT_BUDGET) -> ControlWitness:
    """Greedy symmetric X with ``A·A ⊆ X·A``.

    Candidates are pairs {x, x^{-1}} drawn from A·A. Each round picks the pair
    covering the most still-uncovered elements of A·A; ties go to the pair
    adding fewer elements to X, then to the lower canonical code. Selection
    uses lazy re-evaluation, which picks the same pair as a full rescan
    because coverage only ever shrinks.
    """
    _require_symmetric(a, "certify_approximate")
    a2 = product(a, a, budget=budget)
    p = a.p
    arr2 = a2.array()
    inv_idx = a2.index_of(ffmat.inv_codes(a2.codes, a.n, p))
    a_arr = a.array()
    uncovered = np.ones(len(a2), dtype=bool)

    def members(i: int) -> list[int]:
        j = int(inv_idx[i])
        return [i] if j == i else [i, j]

    def hits(i: int) -> np.ndarray:
        return np.unique(np.concatenate([_translate_hits(arr2[m], a_arr, a2, p) for m in members(i)]))

    heap = []
    for i in range(len(a2)):
        j = int(inv_idx[i])
        if j < i:
            continue
        h = hits(i)
        heap.append((-int(h.size), len(members(i)), int(a2.codes[i]), i))
    heapq.heapify(heap)

    chosen: list[int] = []
    remaining = len(a2)
    while remaining:
        neg, cost, code, i = heapq.heappop(heap)
        h = hits(i)
        cov = int(uncovered[h].sum())
        key = (-cov, cost, code, i)
        if heap and key > heap[0]:
            heapq.heappush(heap, key)
            continue
        if cov == 0:
            raise AssertionError("greedy cover stalled; A·A not covered by A·A·A")
        uncovered[h] = False
        remaining -= cov
        chosen.extend(members(i))

    X = MatSet(a.n, p, a2.codes[chosen])
    if not product(X, a, budget=budget).contains_codes(a2.codes).all():
        raise AssertionError("greedy certificate failed re-verification")
    return ControlWitness(X=X, K=Fraction(len(X)))


def verify_control(a: MatSet, b: MatSet, x: MatSet, k, budget: int = DEFAULT_BUDGET) -> bool:
    """Whether B k-controls A with witness X."""
    _check_same(a, b)
    _check_same(a, x)
    k = Fraction(k)
    if len(b) > k * len(a) or len(x) > k:
        return False
    if not len(a):
        return True
    xb = product(x, b, budget=budget)
    bx = product(b, x, budget=budget)
    return bool(xb.contains_codes(a.codes).all() and bx.contains_codes(a.codes).all())
