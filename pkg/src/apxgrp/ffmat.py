"""Exact arithmetic over F_p and over n x n matrices of determinant one.

Scalars are plain Python ints reduced into ``[0, p)``; :class:`FpElem` is a
thin wrapper for code that wants operator syntax. Matrices are
:class:`MatSL` values whose canonical key is the row-major residue tuple
packed into a single integer (see :func:`encode`).

Batched helpers (``*_batch``) work on ``(N, n, n)`` int64 arrays and are
what the set-level modules use; the scalar functions are the reference
path and the one the tests pin down by hand.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sympy import isprime

from apxgrp.errors import UnsupportedParameterError, UsageError

INT64_MAX = np.iinfo(np.int64).max


def check_prime(p: int) -> int:
    if not isinstance(p, (int, np.integer)) or p < 2 or not isprime(int(p)):
        raise UsageError(f"modulus must be prime, got {p!r}")
    return int(p)


@lru_cache(maxsize=None)
def _weights(n: int, p: int) -> np.ndarray:
    if p ** (n * n) > INT64_MAX:
        raise UnsupportedParameterError(
            f"p^(n^2) = {p}^{n * n} does not fit a 64-bit code"
        )
    w = np.array([p ** (n * n - 1 - i) for i in range(n * n)], dtype=np.int64)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def inverse_table(p: int) -> np.ndarray:
    """``table[x] = x^{-1} mod p`` (``table[0] = 0``)."""
    t = np.zeros(p, dtype=np.int64)
    for x in range(1, p):
        t[x] = pow(x, -1, p)
    t.setflags(write=False)
    return t


@dataclass(frozen=True, slots=True)
class FpElem:
    value: int
    p: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.value % self.p)

    def _coerce(self, other) -> int:
        if isinstance(other, FpElem):
            if other.p != self.p:
                raise UsageError("mixing residues of different moduli")
            return other.value
        return int(other)

    def __add__(self, other):
        return FpElem(self.value + self._coerce(other), self.p)

    __radd__ = __add__

    def __sub__(self, other):
        return FpElem(self.value - self._coerce(other), self.p)

    def __rsub__(self, other):
        return FpElem(self._coerce(other) - self.value, self.p)

    def __mul__(self, other):
        return FpElem(self.value * self._coerce(other), self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return FpElem(-self.value, self.p)

    def inverse(self) -> FpElem:
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse in F_p")
        return FpElem(pow(self.value, -1, self.p), self.p)

    def __truediv__(self, other):
        return self * FpElem(self._coerce(other), self.p).inverse()

    def __pow__(self, k: int):
        return FpElem(pow(self.value, k, self.p), self.p)

    def __int__(self):
        return self.value

    def __eq__(self, other):
        if isinstance(other, FpElem):
            return self.p == other.p and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.p
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.p))


def _det_int(rows: list[list[int]], p: int) -> int:
    """Determinant mod p by Gaussian elimination."""
    m = [[x % p for x in r] for r in rows]
    n = len(m)
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c]), None)
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det = det * m[c][c] % p
        inv = pow(m[c][c], -1, p)
        for r in range(c + 1, n):
            f = m[r][c] * inv % p
            if f:
                m[r] = [(x - f * y) % p for x, y in zip(m[r], m[c])]
    return det % p


@dataclass(frozen=True, slots=True)
class MatSL:
    """An element of SL_n(F_p); entries are row-major residues."""

    n: int
    p: int
    entries: tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) != self.n * self.n:
            raise UsageError(f"expected {self.n * self.n} entries, got {len(self.entries)}")
        ent = tuple(int(x) % self.p for x in self.entries)
        object.__setattr__(self, "entries", ent)
        if _det_int(self.rows(), self.p) != 1:
            raise UsageError(f"matrix {self.rows()} has determinant != 1 mod {self.p}")

    @classmethod
    def from_rows(cls, rows, p: int) -> MatSL:
        rows = [list(r) for r in rows]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise UsageError("matrix must be square")
        return cls(n, p, tuple(x for r in rows for x in r))

    @classmethod
    def identity(cls, n: int, p: int) -> MatSL:
        return cls(n, p, tuple(int(i == j) for i in range(n) for j in range(n)))

    @classmethod
    def diag(cls, values, p: int) -> MatSL:
        n = len(values)
        return cls(n, p, tuple(values[i] if i == j else 0 for i in range(n) for j in range(n)))

    @classmethod
    def _trusted(cls, n: int, p: int, entries: tuple[int, ...]) -> MatSL:
        # skips the determinant check; only for values derived from SL elements
        obj = object.__new__(cls)
        object.__setattr__(obj, "n", n)
        object.__setattr__(obj, "p", p)
        object.__setattr__(obj, "entries", entries)
        return obj

    def rows(self) -> list[list[int]]:
        n = self.n
        return [list(self.entries[i * n:(i + 1) * n]) for i in range(n)]

    def __getitem__(self, ij) -> int:
        i, j = ij
        return self.entries[i * self.n + j]

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(self.n, self.n)

    @property
    def code(self) -> int:
        return encode(self)

    def trace(self) -> int:
        return sum(self.entries[i * self.n + i] for i in range(self.n)) % self.p

    def is_identity(self) -> bool:
        return self == MatSL.identity(self.n, self.p)

    def __matmul__(self, other: MatSL) -> MatSL:
        return mat_mul(self, other)

    def __pow__(self, k: int) -> MatSL:
        return mat_pow(self, k)

    def __repr__(self):
        return f"MatSL(p={self.p}, {self.rows()})"


def _check_compatible(a: MatSL, b: MatSL) -> None:
    if a.n != b.n or a.p != b.p:
        raise UsageError(f"incompatible matrices: SL_{a.n}(F_{a.p}) vs SL_{b.n}(F_{b.p})")


def mat_mul(a: MatSL, b: MatSL) -> MatSL:
    _check_compatible(a, b)
    n, p = a.n, a.p
    ae, be = a.entries, b.entries
    out = tuple(
        sum(ae[i * n + k] * be[k * n + j] for k in range(n)) % p
        for i in range(n)
        for j in range(n)
    )
    return MatSL._trusted(n, p, out)


def mat_inv(a: MatSL) -> MatSL:
    """Inverse via Gauss-Jordan elimination mod p."""
    n, p = a.n, a.p
    m = [r + [int(i == j) for j in range(n)] for i, r in enumerate(a.rows())]
    for c in range(n):
        piv = next(r for r in range(c, n) if m[r][c])
        m[c], m[piv] = m[piv], m[c]
        inv = pow(m[c][c], -1, p)
        m[c] = [x * inv % p for x in m[c]]
        for r in range(n):
            if r != c and m[r][c]:
                f = m[r][c]
                m[r] = [(x - f * y) % p for x, y in zip(m[r], m[c])]
    return MatSL._trusted(n, p, tuple(x for r in m for x in r[n:]))


def mat_pow(a: MatSL, k: int) -> MatSL:
    if k < 0:
        a, k = mat_inv(a), -k
    result = MatSL.identity(a.n, a.p)
    base = a
    while k:
        if k & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        k >>= 1
    return result


def conjugate(g: MatSL, a: MatSL) -> MatSL:
    """``g a g^{-1}``."""
    return mat_mul(mat_mul(g, a), mat_inv(g))


def element_order(a: MatSL) -> int:
    ident = MatSL.identity(a.n, a.p)
    x, k = a, 1
    while x != ident:
        x = mat_mul(x, a)
        k += 1
    return k


# -- encoding -----------------------------------------------------------------


def encode(a: MatSL) -> int:
    code = 0
    for x in a.entries:
        code = code * a.p + x
    return code


def decode(code: int, n: int, p: int) -> MatSL:
    ent = []
    for _ in range(n * n):
        code, r = divmod(int(code), p)
        ent.append(r)
    return MatSL._trusted(n, p, tuple(reversed(ent)))


def encode_batch(arr: np.ndarray, p: int) -> np.ndarray:
    n = arr.shape[-1]
    return arr.reshape(arr.shape[:-2] + (n * n,)) @ _weights(n, p)


def decode_batch(codes: np.ndarray, n: int, p: int) -> np.ndarray:
    w = _weights(n, p)
    codes = np.asarray(codes, dtype=np.int64)
    out = (codes[..., None] // w) % p
    return out.reshape(codes.shape + (n, n))


def mul_batch(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """Broadcasting product of ``(..., n, n)`` residue arrays mod p."""
    return np.matmul(a, b) % p


def inv_batch(arr: np.ndarray, p: int) -> np.ndarray:
    """Inverses of a stack of determinant-one matrices."""
    n = arr.shape[-1]
    if n == 2:
        out = np.empty_like(arr)
        out[..., 0, 0] = arr[..., 1, 1]
        out[..., 1, 1] = arr[..., 0, 0]
        out[..., 0, 1] = (-arr[..., 0, 1]) % p
        out[..., 1, 0] = (-arr[..., 1, 0]) % p
        return out
    flat = arr.reshape(-1, n, n)
    res = np.empty_like(flat)
    for i, m in enumerate(flat):
        res[i] = mat_inv(MatSL._trusted(n, p, tuple(int(x) for x in m.ravel()))).to_array()
    return res.reshape(arr.shape)


def inv_codes(codes: np.ndarray, n: int, p: int) -> np.ndarray:
    return encode_batch(inv_batch(decode_batch(codes, n, p), p), p)


# -- polynomials over F_p ------------------------------------------------------
# Polynomials are coefficient lists from the leading term down to the constant.


@dataclass(frozen=True, slots=True)
class CharPoly:
    coefficients: tuple[int, ...]
    p: int

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def trace(self) -> int:
        return (-self.coefficients[1]) % self.p

    def __repr__(self):
        terms = []
        d = self.degree
        for i, c in enumerate(self.coefficients):
            if c:
                e = d - i
                mono = "" if e == 0 else ("x" if e == 1 else f"x^{e}")
                coef = "" if (c == 1 and e) else str(c)
                terms.append(f"{coef}{mono}")
        return f"CharPoly({' + '.join(terms) or '0'} mod {self.p})"


def _poly_trim(f: list[int]) -> list[int]:
    i = 0
    while i < len(f) - 1 and f[i] == 0:
        i += 1
    return f[i:]


def poly_mod(f: list[int], g: list[int], p: int) -> list[int]:
    f = _poly_trim([x % p for x in f])
    g = _poly_trim([x % p for x in g])
    if g == [0]:
        raise ZeroDivisionError("polynomial division by zero")
    inv = pow(g[0], -1, p)
    while len(f) >= len(g) and f != [0]:
        q = f[0] * inv % p
        for i in range(len(g)):
            f[i] = (f[i] - q * g[i]) % p
        f = _poly_trim(f[1:]) if len(f) > 1 else [0]
    return f


def poly_gcd(f: list[int], g: list[int], p: int) -> list[int]:
    """Monic gcd over F_p."""
    f = _poly_trim([x % p for x in f])
    g = _poly_trim([x % p for x in g])
    while g != [0]:
        f, g = g, poly_mod(f, g, p)
    if f == [0]:
        return f
    inv = pow(f[0], -1, p)
    return [x * inv % p for x in f]


def poly_derivative(f: list[int], p: int) -> list[int]:
    d = len(f) - 1
    out = [(c * (d - i)) % p for i, c in enumerate(f[:-1])]
    return _poly_trim(out) if out else [0]


def char_poly(a: MatSL) -> CharPoly:
    """det(xI - a) over F_p by the division-free Berkowitz recursion."""
    n, p = a.n, a.p
    m = a.rows()
    # Berkowitz: build up from the bottom-right 1x1 block
    poly = [1, (-m[n - 1][n - 1]) % p]
    for k in range(n - 2, -1, -1):
        # block is m[k:, k:]; a_kk, row R = m[k][k+1:], column S = m[k+1:][k], sub M
        size = n - k - 1
        r = m[k][k + 1:]
        s = [m[i][k] for i in range(k + 1, n)]
        sub = [row[k + 1:] for row in m[k + 1:]]
        # Toeplitz column: 1, -a_kk, -R S, -R M S, ..., -R M^{size-1} S
        col = [1, (-m[k][k]) % p]
        v = s[:]
        for _ in range(size):
            col.append((-sum(x * y for x, y in zip(r, v))) % p)
            v = [sum(sub[i][j] * v[j] for j in range(size)) % p for i in range(size)]
        # multiply lower-triangular Toeplitz (size+2 rows, size+1 cols) by poly
        new = []
        for i in range(size + 2):
            acc = 0
            for j in range(min(i, size) + 1):
                acc += col[i - j] * poly[j]
            new.append(acc % p)
        poly = new
    return CharPoly(tuple(poly), p)


def _require_large_char(n: int, p: int) -> None:
    if p <= n:
        raise UnsupportedParameterError(
            f"regular-semisimplicity test needs p > n (got p={p}, n={n})"
        )


def is_squarefree(coeffs, p: int) -> bool:
    f = list(coeffs)
    return len(poly_gcd(f, poly_derivative(f, p), p)) == 1


def is_regular_semisimple(a: MatSL) -> bool:
    _require_large_char(a.n, a.p)
    return is_squarefree(char_poly(a).coefficients, a.p)


def char_poly_batch(arr: np.ndarray, p: int) -> np.ndarray:
    """Characteristic polynomial coefficients for a stack, shape ``(N, n+1)``.

    Faddeev-LeVerrier, which divides by 1..n, so p > n is required.
    """
    n = arr.shape[-1]
    arr = arr.reshape(-1, n, n)
    N = arr.shape[0]
    coeffs = np.zeros((N, n + 1), dtype=np.int64)
    coeffs[:, 0] = 1
    if n == 2:
        coeffs[:, 1] = (-(arr[:, 0, 0] + arr[:, 1, 1])) % p
        coeffs[:, 2] = (arr[:, 0, 0] * arr[:, 1, 1] - arr[:, 0, 1] * arr[:, 1, 0]) % p
        return coeffs
    if p <= n:
        for i, m in enumerate(arr):
            coeffs[i] = char_poly(MatSL._trusted(n, p, tuple(int(x) for x in m.ravel()))).coefficients
        return coeffs
    inv = inverse_table(p)
    eye = np.eye(n, dtype=np.int64)
    mk = np.zeros_like(arr)
    for k in range(1, n + 1):
        mk = (np.matmul(arr, mk) + coeffs[:, k - 1, None, None] * eye) % p
        tr = np.trace(np.matmul(arr, mk) % p, axis1=1, axis2=2) % p
        coeffs[:, k] = (-tr * inv[k]) % p
    return coeffs


def regular_semisimple_mask(arr: np.ndarray, p: int) -> np.ndarray:
    """Boolean mask of regular semisimple matrices in a stack."""
    n = arr.shape[-1]
    _require_large_char(n, p)
    arr = arr.reshape(-1, n, n)
    if n == 2:
        tr = (arr[:, 0, 0] + arr[:, 1, 1]) % p
        # discriminant tr^2 - 4 (det is 1)
        return (tr * tr - 4) % p != 0
    cps = char_poly_batch(arr, p)
    uniq, inverse = np.unique(cps, axis=0, return_inverse=True)
    ok = np.array([is_squarefree(row.tolist(), p) for row in uniq], dtype=bool)
    return ok[inverse.reshape(-1)]


def commutes_mask(arr: np.ndarray, a: np.ndarray, p: int) -> np.ndarray:
    """Mask of stack elements x with x a = a x."""
    return np.all((np.matmul(arr, a) - np.matmul(a, arr)) % p == 0, axis=(-2, -1))


def sl_order(n: int, p: int) -> int:
    order = p ** (n * (n - 1) // 2)
    for k in range(2, n + 1):
        order *= p**k - 1
    return order
