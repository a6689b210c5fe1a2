"""Constructors for the test sets and generating sets used by experiments."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from apxgrp import ffmat, setops
from apxgrp.cayley import GenSet, bfs_spheres
from apxgrp.errors import ResourceBudgetError, UsageError
from apxgrp.ffmat import MatSL
from apxgrp.setops import DEFAULT_BUDGET, MatSet

# standard unipotent generators of SL_2(Z)
UNIPOTENT_UPPER = [[1, 1], [0, 1]]
UNIPOTENT_LOWER = [[1, 0], [1, 1]]


def progression(g: MatSL, n: int) -> MatSet:
    """Geometric progression ``{g^i : |i| <= n}``."""
    if n < 0:
        raise UsageError("progression length must be >= 0")
    mats = [MatSL.identity(g.n, g.p)]
    ginv = ffmat.mat_inv(g)
    fwd = bwd = mats[0]
    for _ in range(n):
        fwd = ffmat.mat_mul(fwd, g)
        bwd = ffmat.mat_mul(bwd, ginv)
        mats += [fwd, bwd]
    return MatSet.from_matrices(mats)


def ball(s: GenSet, r: int, budget: int = DEFAULT_BUDGET) -> MatSet:
    """``(S ∪ {id})^r``, i.e. the word-metric ball of radius r."""
    if r < 0:
        raise UsageError("radius must be >= 0")
    visited, _ = bfs_spheres(s, max_radius=r, budget=budget)
    return MatSet(s.n, s.p, visited)


def borel_subset(p: int, n: int = 2, budget: int = DEFAULT_BUDGET) -> MatSet:
    """All upper-triangular elements of SL_n(F_p)."""
    p = ffmat.check_prime(p)
    size = p ** (n * (n - 1) // 2) * (p - 1) ** (n - 1)
    if size > budget:
        raise ResourceBudgetError(f"Borel subgroup has {size} elements, budget {budget}")
    upper = [(i, j) for i in range(n) for j in range(i + 1, n)]
    units = range(1, p)
    mats = []
    for diag in itertools.product(units, repeat=n - 1):
        last = 1
        for d in diag:
            last = last * pow(d, -1, p) % p
        dvals = list(diag) + [last]
        base = np.diag(dvals).astype(np.int64)
        for ups in itertools.product(range(p), repeat=len(upper)):
            m = base.copy()
            for (i, j), x in zip(upper, ups):
                m[i, j] = x
            mats.append(m)
    return MatSet.from_array(np.array(mats, dtype=np.int64), p)


def diagonal_torus(p: int, n: int = 2) -> MatSet:
    """The split diagonal torus of SL_n(F_p) as a subgroup."""
    p = ffmat.check_prime(p)
    mats = []
    for diag in itertools.product(range(1, p), repeat=n - 1):
        last = 1
        for d in diag:
            last = last * pow(d, -1, p) % p
        mats.append(np.diag(list(diag) + [last]))
    return MatSet.from_array(np.array(mats, dtype=np.int64), p)


def _int_rows(m) -> list[list[int]]:
    try:
        rows = [[int(x) for x in r] for r in m]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"malformed integer matrix {m!r}") from exc
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise UsageError(f"matrix must be square and nonempty: {m!r}")
    return rows


def reduce_mod_p(int_mats, p: int) -> GenSet:
    """Reduce integer matrices mod p and symmetrize."""
    p = ffmat.check_prime(p)
    mats = []
    for m in int_mats:
        rows = _int_rows(m)
        mats.append(MatSL.from_rows([[x % p for x in r] for r in rows], p))
    if not mats:
        raise UsageError("need at least one generator")
    return GenSet.from_matrices(mats)


def random_generators(p: int, n: int, count: int, seed: int) -> GenSet:
    """``count`` random elements of SL_n(F_p), symmetrized; deterministic per seed.

    Draws a uniform matrix, rejects singular ones, and rescales the first
    row by det^{-1}.
    """
    if count < 1:
        raise UsageError("count must be >= 1")
    p = ffmat.check_prime(p)
    rng = np.random.default_rng(seed)
    mats = []
    while len(mats) < count:
        rows = rng.integers(0, p, size=(n, n)).tolist()
        d = ffmat._det_int(rows, p)
        if d == 0:
            continue
        dinv = pow(d, -1, p)
        rows[0] = [x * dinv % p for x in rows[0]]
        mats.append(MatSL.from_rows(rows, p))
    return GenSet.from_matrices(mats)


def full_group(p: int, n: int = 2, budget: int = DEFAULT_BUDGET) -> MatSet:
    """SL_n(F_p) generated from the elementary unipotents."""
    p = ffmat.check_prime(p)
    gens = []
    for i in range(n):
        for j in range(n):
            if i != j:
                m = np.eye(n, dtype=np.int64)
                m[i, j] = 1
                gens.append(MatSL.from_rows(m.tolist(), p))
    from apxgrp.cayley import generate_group

    return generate_group(GenSet.from_matrices(gens), budget=budget)


KINDS = ("subgroup", "progression", "ball", "borel", "mod_p_reduction", "random", "explicit")


@dataclass
class FamilySpec:
    """On-disk description of a set A or a generating set S.

    ``kind`` selects the constructor; ``params`` carries its arguments.
    Recognised params: ``g`` (matrix rows), ``N``, ``radius``, ``generators``
    (list of matrices), ``seed``, ``count``, ``which`` (for subgroups:
    ``full``, ``borel``, ``torus``, ``generated``), ``elements``.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown family kind {self.kind!r}; expected one of {KINDS}")
        for key in ("N", "radius"):
            if key in self.params and int(self.params[key]) < 0:
                raise UsageError(f"{key} must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> FamilySpec:
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise UsageError("family table needs a 'kind'")
        return cls(kind, d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def _gens(self, p: int, n: int) -> GenSet:
        if "generators" in self.params:
            return reduce_mod_p(self.params["generators"], p)
        if "seed" in self.params:
            return random_generators(p, n, int(self.params.get("count", 2)), int(self.params["seed"]))
        if n != 2:
            raise UsageError("default unipotent generators are only defined for n = 2")
        return reduce_mod_p([UNIPOTENT_UPPER, UNIPOTENT_LOWER], p)

    def generating_set(self, p: int, n: int = 2) -> GenSet:
        if self.kind in ("ball", "mod_p_reduction", "random", "subgroup"):
            if self.kind == "random":
                return random_generators(p, n, int(self.params.get("count", 2)), int(self.params.get("seed", 0)))
            return self._gens(p, n)
        raise UsageError(f"family kind {self.kind!r} does not describe a generating set")

    def build(self, p: int, n: int = 2, budget: int = DEFAULT_BUDGET) -> MatSet:
        """Construct the set A (always symmetric and containing the identity)."""
        from apxgrp.cayley import generate_group

        prm = self.params
        k = self.kind
        if k == "progression":
            if "g" not in prm:
                raise UsageError("progression needs 'g'")
            g = MatSL.from_rows([[x % p for x in r] for r in _int_rows(prm["g"])], p)
            return progression(g, int(prm.get("N", 1)))
        if k == "ball":
            return ball(self._gens(p, n), int(prm.get("radius", 1)), budget=budget)
        if k == "borel":
            return borel_subset(p, n, budget=budget)
        if k == "subgroup":
            which = prm.get("which", "full")
            if which == "full":
                return full_group(p, n, budget=budget)
            if which == "borel":
                return borel_subset(p, n, budget=budget)
            if which == "torus":
                return diagonal_torus(p, n)
            if which == "generated":
                return generate_group(self._gens(p, n), budget=budget)
            raise UsageError(f"unknown subgroup {which!r}")
        if k in ("mod_p_reduction", "random"):
            s = self.generating_set(p, n)
            return setops.symmetrize(s.elements)
        if k == "explicit":
            mats = [MatSL.from_rows([[x % p for x in r] for r in _int_rows(m)], p) for m in prm.get("elements", [])]
            if not mats:
                return MatSet.identity(n, p)
            return setops.symmetrize(MatSet.from_matrices(mats))
        raise UsageError(f"unhandled family kind {k!r}")
