"""Cayley-graph analytics over finite subgroups of SL_n(F_p).

Edges are ``x -> x s`` for s in the generating set. The graph is never
stored as an edge list; neighbours come from multiplying by the generators,
and the spectral routine keeps one index map per generator into the sorted
vertex codes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from apxgrp import ffmat, setops
from apxgrp.errors import InvariantViolation, ResourceBudgetError, UsageError
from apxgrp.ffmat import MatSL
from apxgrp.setops import DEFAULT_BUDGET, MatSet

DEFAULT_ITER_CAP = 100_000
DEFAULT_RESIDUAL = 1e-8


class GenSet:
    """Symmetric generating set; the identity is dropped (no loops)."""

    __slots__ = ("elements",)

    def __init__(self, elements: MatSet):
        ident = ffmat.encode(MatSL.identity(elements.n, elements.p))
        sym = setops.symmetrize(elements)
        self.elements = MatSet(sym.n, sym.p, sym.codes[sym.codes != ident])

    @classmethod
    def from_matrices(cls, mats, n=None, p=None) -> GenSet:
        return cls(MatSet.from_matrices(mats, n=n, p=p))

    @property
    def n(self) -> int:
        return self.elements.n

    @property
    def p(self) -> int:
        return self.elements.p

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def array(self) -> np.ndarray:
        return self.elements.array()

    def inverse_index(self) -> np.ndarray:
        """``inv[i]`` is the position of the inverse of generator i."""
        return self.elements.index_of(ffmat.inv_codes(self.elements.codes, self.n, self.p))

    def __repr__(self):
        return f"GenSet(n={self.n}, p={self.p}, size={len(self)})"


@dataclass
class BfsStats:
    group_order: int
    diameter: int
    sphere_sizes: list[int]

    def to_dict(self) -> dict:
        return {
            "group_order": self.group_order,
            "diameter": self.diameter,
            "sphere_sizes": list(self.sphere_sizes),
        }


@dataclass
class SpectralReport:
    p: int
    n: int
    lambda2: float
    iterations: int
    residual: float
    converged: bool
    generated_full_group: bool
    group_order: int

    @property
    def gap(self) -> float:
        return 1.0 - self.lambda2

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "lambda2": self.lambda2,
            "gap": self.gap,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "generated_full_group": self.generated_full_group,
            "group_order": self.group_order,
        }


def _expand(frontier: np.ndarray, gens: np.ndarray, p: int) -> np.ndarray:
    """Codes of ``x s`` for x in frontier (codes) and every generator, shape (F, S)."""
    n = gens.shape[-1]
    arr = ffmat.decode_batch(frontier, n, p)
    step = max(1, setops.CHUNK_PAIRS // max(1, len(gens)))
    chunks = [arr[i:i + step] for i in range(0, len(arr), step)]

    def run(c):
        return ffmat.encode_batch(ffmat.mul_batch(c[:, None], gens[None, :], p), p)

    if setops.get_threads() > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=setops.get_threads()) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    if not parts:
        return np.empty((0, len(gens)), dtype=np.int64)
    return np.concatenate(parts)


def bfs_spheres(s: GenSet, max_radius: int | None = None, budget: int = DEFAULT_BUDGET):
    """BFS from the identity; returns ``(visited_codes_sorted, spheres)``."""
    ident = np.array([ffmat.encode(MatSL.identity(s.n, s.p))], dtype=np.int64)
    visited = ident
    frontier = ident
    spheres = [ident]
    gens = s.array()
    radius = 0
    while frontier.size and len(gens) and (max_radius is None or radius < max_radius):
        nxt = np.unique(_expand(frontier, gens, s.p))
        nxt = nxt[~np.isin(nxt, visited, assume_unique=True)]
        if not nxt.size:
            break
        visited = np.union1d(visited, nxt)
        if visited.size > budget:
            raise ResourceBudgetError(f"group exceeds element budget {budget}")
        spheres.append(nxt)
        frontier = nxt
        radius += 1
    return visited, spheres


def generate_group(s: GenSet, budget: int = DEFAULT_BUDGET) -> MatSet:
    """The subgroup generated by s, by closure from the identity."""
    visited, _ = bfs_spheres(s, budget=budget)
    return MatSet(s.n, s.p, visited)


def diameter(s: GenSet, budget: int = DEFAULT_BUDGET) -> BfsStats:
    """Diameter as the eccentricity of the identity (Cayley graphs are vertex-transitive)."""
    visited, spheres = bfs_spheres(s, budget=budget)
    sizes = [int(x.size) for x in spheres]
    return BfsStats(group_order=int(visited.size), diameter=len(sizes) - 1, sphere_sizes=sizes)


def girth(s: GenSet, budget: int = DEFAULT_BUDGET) -> int | None:
    """Length of the shortest non-backtracking closed walk at the identity.

    An involution in s counts as a 2-cycle. A single generator pair {t, t^-1}
    gives the order of t. Returns None when the graph has no cycle (only
    possible for an empty generating set).
    """
    if not len(s):
        return None
    gens = s.array()
    p = s.p
    inv = s.inverse_index()
    if np.any(inv == np.arange(len(s))):
        return 2
    ident = ffmat.encode(MatSL.identity(s.n, p))
    # vertex code -> BFS depth
    dist = {ident: 0}
    frontier = np.array([ident], dtype=np.int64)
    parent_gen = np.array([-1], dtype=np.int64)
    best = math.inf
    level = 0
    while frontier.size:
        nb = _expand(frontier, gens, p)  # (F, S)
        F, S = nb.shape
        # drop the tree edge back to each vertex's parent
        back = np.zeros((F, S), dtype=bool)
        has_parent = parent_gen >= 0
        back[np.nonzero(has_parent)[0], inv[parent_gen[has_parent]]] = True
        flat = nb.ravel()
        keep = ~back.ravel()
        new_codes, new_parent = [], []
        seen_new: set[int] = set()
        for pos in np.nonzero(keep)[0]:
            v = int(flat[pos])
            d = dist.get(v)
            if d is None:
                dist[v] = level + 1
                seen_new.add(v)
                new_codes.append(v)
                new_parent.append(pos % S)
            elif v in seen_new:
                best = min(best, 2 * level + 2)
            else:
                best = min(best, level + d + 1)
        if len(dist) > budget:
            raise ResourceBudgetError(f"girth search exceeds element budget {budget}")
        if best <= 2 * level + 2:
            break
        frontier = np.array(new_codes, dtype=np.int64)
        parent_gen = np.array(new_parent, dtype=np.int64)
        level += 1
    return None if best is math.inf else int(best)


def neighbour_maps(group: MatSet, s: GenSet) -> np.ndarray:
    """``maps[k, i]`` = index of ``group[i] * s_k`` in group; shape (S, |G|)."""
    nb = _expand(group.codes, s.array(), s.p)
    idx = group.index_of(nb)
    if np.any(idx < 0):
        raise UsageError("group is not closed under right multiplication by the generators")
    return np.ascontiguousarray(idx.T)


def _start_vector(codes: np.ndarray) -> np.ndarray:
    # splitmix-style scramble of the codes: deterministic, roughly uniform
    z = codes.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) / float(1 << 53) - 0.5


def adjacency_apply(maps: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Normalized adjacency: ``(A v)[i] = mean_k v[maps[k, i]]``, fixed summation order."""
    out = v[maps[0]].copy()
    for k in range(1, maps.shape[0]):
        out += v[maps[k]]
    out /= maps.shape[0]
    return out


@njit(cache=True)
def _shifted_step(maps, v, w):
    """w = (A v + v)/2 projected to mean zero; returns (<v, w>, ||w||^2, ||w - <v,w> v||^2).

    Sequential sums in index order, so results are bit-reproducible.
    """
    S, N = maps.shape
    total = 0.0
    for i in range(N):
        acc = 0.0
        for k in range(S):
            acc += v[maps[k, i]]
        x = 0.5 * (acc / S + v[i])
        w[i] = x
        total += x
    mean = total / N
    dot = 0.0
    nrm = 0.0
    for i in range(N):
        x = w[i] - mean
        w[i] = x
        dot += x * v[i]
        nrm += x * x
    res = 0.0
    for i in range(N):
        r = w[i] - dot * v[i]
        res += r * r
    return dot, nrm, res


def dense_adjacency(group: MatSet, s: GenSet) -> np.ndarray:
    maps = neighbour_maps(group, s)
    N = len(group)
    A = np.zeros((N, N))
    for k in range(maps.shape[0]):
        np.add.at(A, (np.arange(N), maps[k]), 1.0 / maps.shape[0])
    return A


def spectral_gap(
    s: GenSet,
    iter_cap: int = DEFAULT_ITER_CAP,
    residual_tol: float = DEFAULT_RESIDUAL,
    budget: int = DEFAULT_BUDGET,
    group: MatSet | None = None,
) -> SpectralReport:
    """Second-largest eigenvalue of the normalized adjacency operator.

    Power iteration on ``(A + I)/2`` restricted to mean-zero vectors; the
    shift keeps the spectrum in [0, 1] so negative eigenvalues cannot win.
    Stops when ``||B v - mu v|| < residual_tol``.
    """
    if group is None:
        group = generate_group(s, budget=budget)
    N = len(group)
    full = N == ffmat.sl_order(s.n, s.p)
    if N <= 1 or not len(s):
        return SpectralReport(s.p, s.n, 0.0, 0, 0.0, True, full, N)
    maps = neighbour_maps(group, s)
    v = _start_vector(group.codes)
    v -= v.mean()
    v /= math.sqrt(float(np.sum(v * v)))
    w = np.empty_like(v)
    mu, res = 0.0, math.inf
    it = 0
    for it in range(1, iter_cap + 1):
        mu, nrm2, res2 = _shifted_step(maps, v, w)
        res = math.sqrt(res2)
        if res < residual_tol or nrm2 == 0.0:
            break
        np.multiply(w, 1.0 / math.sqrt(nrm2), out=v)
    lam = 2.0 * mu - 1.0
    return SpectralReport(
        p=s.p,
        n=s.n,
        lambda2=lam,
        iterations=it,
        residual=res,
        converged=res < residual_tol,
        generated_full_group=full,
        group_order=N,
    )


@dataclass
class SweepRow:
    p: int
    group_order: int
    diameter: int | None
    girth: int | None
    lambda2: float | None
    gap: float | None
    generated: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "group_order": self.group_order,
            "diameter": self.diameter,
            "girth": self.girth,
            "lambda2": self.lambda2,
            "gap": self.gap,
            "generated": self.generated,
            "note": self.note,
        }


CSV_COLUMNS = ["p", "group_order", "diameter", "girth", "lambda2", "gap", "generated"]


@dataclass
class SweepTable:
    rows: list[SweepRow] = field(default_factory=list)

    def fit(self) -> dict | None:
        return fit_log_power([r.p for r in self.rows], [r.diameter for r in self.rows])

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "diameter_fit": self.fit()}


def fit_log_power(ps, diams) -> dict | None:
    """Least-squares fit ``diam = a (log p)^b`` in log-log coordinates."""
    pts = [(math.log(math.log(p)), math.log(d)) for p, d in zip(ps, diams) if d and d > 0 and p > 2]
    if len(pts) < 2:
        return None
    x = np.array([q[0] for q in pts])
    y = np.array([q[1] for q in pts])
    b, loga = np.polyfit(x, y, 1)
    resid = y - (loga + b * x)
    # C such that diam <= C log^2 p across the sweep
    c2 = max(d / math.log(p) ** 2 for p, d in zip(ps, diams) if d and p > 2)
    return {"a": float(math.exp(loga)), "b": float(b), "rms_log_residual": float(np.sqrt(np.mean(resid**2))), "c_log2": float(c2)}


def sweep(
    int_mats,
    p_list,
    *,
    do_diameter: bool = True,
    do_girth: bool = True,
    do_gap: bool = True,
    iter_cap: int = DEFAULT_ITER_CAP,
    residual_tol: float = DEFAULT_RESIDUAL,
    budget: int = DEFAULT_BUDGET,
) -> SweepTable:
    """Reduce integer generators mod each p and tabulate Cayley-graph data."""
    from apxgrp.families import reduce_mod_p

    table = SweepTable()
    for p in p_list:
        try:
            s = reduce_mod_p(int_mats, p)
        except UsageError as exc:
            table.rows.append(SweepRow(p, 0, None, None, None, None, False, note=f"skipped: {exc}"))
            continue
        visited, spheres = bfs_spheres(s, budget=budget)
        group = MatSet(s.n, s.p, visited)
        order = len(group)
        if sum(x.size for x in spheres) != order:
            raise InvariantViolation(f"sphere sizes do not sum to the group order at p={p}")
        generated = order == ffmat.sl_order(s.n, p)
        diam = len(spheres) - 1 if do_diameter else None
        g = girth(s, budget=budget) if do_girth else None
        lam = gap = None
        note = ""
        if do_gap:
            rep = spectral_gap(s, iter_cap=iter_cap, residual_tol=residual_tol, group=group)
            lam, gap = rep.lambda2, rep.gap
            if not rep.converged:
                note = f"not converged (residual {rep.residual:.2e})"
        table.rows.append(SweepRow(p, order, diam, g, lam, gap, generated, note))
    return table
