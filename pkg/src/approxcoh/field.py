"""Prime fields, their small extensions, and linear algebra mod p.

Elements of F_{p^m} are encoded as integers ``0 <= a < p**m``; the base-p
digits of ``a`` (least significant first) are the coefficients of ``a`` in
the power basis of a fixed root of the defining polynomial.  With this
encoding the prime field F_p sits inside F_{p^m} as ``0..p-1``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import PreconditionError

MAX_PRIME = 31


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % k for k in range(2, int(n**0.5) + 1))


def check_prime(p) -> int:
    """Validate a field characteristic and return it as ``int``."""
    if isinstance(p, bool) or int(p) != p:
        raise PreconditionError(f"modulus must be an integer, got {p!r}")
    p = int(p)
    if not 2 <= p <= MAX_PRIME or not is_prime(p):
        raise PreconditionError(f"modulus must be a prime in [2, {MAX_PRIME}], got {p}")
    return p


def inv_mod(a: int, p: int) -> int:
    a %= p
    if a == 0:
        raise ZeroDivisionError("0 has no inverse")
    return pow(a, p - 2, p)


# --- enumeration helpers ----------------------------------------------------


def digits(idx, base: int, length: int) -> np.ndarray:
    """Base-``base`` digits of ``idx`` (array), most significant first.

    This is the lexicographic order used for every enumeration of F_p^n.
    """
    idx = np.asarray(idx, dtype=np.int64)
    out = np.empty(idx.shape + (length,), dtype=np.int64)
    rest = idx.copy()
    for j in range(length - 1, -1, -1):
        out[..., j] = rest % base
        rest //= base
    return out


def undigits(vecs, base: int) -> np.ndarray:
    """Inverse of :func:`digits` along the last axis."""
    vecs = np.asarray(vecs, dtype=np.int64)
    out = np.zeros(vecs.shape[:-1], dtype=np.int64)
    for j in range(vecs.shape[-1]):
        out = out * base + vecs[..., j]
    return out


def grid(p: int, n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Points of F_p^n with lexicographic indices in ``[start, stop)``."""
    if stop is None:
        stop = p**n
    return digits(np.arange(start, stop, dtype=np.int64), p, n)


@lru_cache(maxsize=64)
def addition_table(p: int, n: int) -> np.ndarray:
    """``table[i, j]`` is the index of ``point(i) + point(j)`` in F_p^n."""
    pts = grid(p, n)
    return undigits((pts[:, None, :] + pts[None, :, :]) % p, p)


# --- extension fields -------------------------------------------------------


def _poly_mod(num, den, p):
    # num, den: coefficient lists low->high, den monic
    num = list(num)
    while len(num) >= len(den):
        c = num[-1] % p
        shift = len(num) - len(den)
        if c:
            for i, d in enumerate(den):
                num[shift + i] = (num[shift + i] - c * d) % p
        num.pop()
    return [c % p for c in num]


def _is_irreducible(f, p):
    m = len(f) - 1
    for k in range(1, m // 2 + 1):
        for tail in itertools.product(range(p), repeat=k):
            g = list(tail) + [1]
            if not any(_poly_mod(f, g, p)):
                return False
    return True


@lru_cache(maxsize=None)
def first_irreducible(p: int, m: int) -> tuple[int, ...]:
    """The lexicographically first monic irreducible of degree ``m`` over F_p."""
    if m == 1:
        return (0, 1)
    for tail in itertools.product(range(p), repeat=m):
        f = list(reversed(tail)) + [1]
        if f[0] and _is_irreducible(f, p):
            return tuple(f)
    raise AssertionError("no irreducible polynomial found")  # pragma: no cover


class GF:
    """Table-driven arithmetic in F_{p^m}.

    ``add``, ``sub`` and ``mul`` are ``q x q`` lookup tables (nested lists,
    faster than numpy for scalar access); ``neg`` and ``inv`` are lists.
    """

    def __init__(self, p: int, m: int = 1):
        p = check_prime(p)
        if m < 1:
            raise PreconditionError("extension degree must be >= 1")
        self.p, self.m, self.q = p, m, p**m
        self.modulus = first_irreducible(p, m)
        q = self.q
        vec = digits(np.arange(q), p, m)[:, ::-1]  # low digit first
        self._vec = vec
        add = undigits(((vec[:, None, :] + vec[None, :, :]) % p)[..., ::-1], p)
        sub = undigits(((vec[:, None, :] - vec[None, :, :]) % p)[..., ::-1], p)
        self.add = add.tolist()
        self.sub = sub.tolist()
        self.neg = sub[0].tolist()
        self.mul = self._mul_table().tolist()
        self.inv = [0] * q
        for a in range(1, q):
            self.inv[a] = self.mul[a].index(1)

    def _encode(self, coeffs):
        return sum(int(c) % self.p * self.p**i for i, c in enumerate(coeffs))

    def _mul_poly(self, a, b):
        va, vb = self._vec[a], self._vec[b]
        prod = [0] * (2 * self.m - 1)
        for i, x in enumerate(va):
            if x:
                for j, y in enumerate(vb):
                    prod[i + j] += int(x) * int(y)
        return self._encode(_poly_mod(prod, self.modulus, self.p))

    def _mul_table(self):
        q = self.q
        if self.m == 1:
            a = np.arange(q)
            return np.outer(a, a) % q
        # log/antilog through a primitive element
        gen = None
        for g in range(2, q):
            seen, x = 1, g
            while x != 1:
                x = self._mul_poly(x, g)
                seen += 1
            if seen == q - 1:
                gen = g
                break
        exp = [1] * (q - 1)
        for k in range(1, q - 1):
            exp[k] = self._mul_poly(exp[k - 1], gen)
        log = np.zeros(q, dtype=np.int64)
        log[np.array(exp)] = np.arange(q - 1)
        exp_arr = np.array(exp, dtype=np.int64)
        table = exp_arr[(log[:, None] + log[None, :]) % (q - 1)]
        table[0, :] = 0
        table[:, 0] = 0
        return table

    def element_str(self, a: int) -> str:
        if self.m == 1:
            return str(a)
        return "[" + ",".join(str(int(c)) for c in self._vec[a]) + "]"

    def __repr__(self):
        return f"GF({self.p}^{self.m})"


@lru_cache(maxsize=32)
def gf(p: int, m: int = 1) -> GF:
    return GF(p, m)


# --- linear algebra mod p ---------------------------------------------------


def rref(matrix, p: int):
    """Row-reduced echelon form mod ``p``; returns ``(R, pivot_columns)``."""
    a = np.array(matrix, dtype=np.int64) % p
    if a.ndim != 2:
        raise PreconditionError("rref expects a 2-d matrix")
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        k = r + nz[0]
        if k != r:
            a[[r, k]] = a[[k, r]]
        a[r] = a[r] * inv_mod(int(a[r, c]), p) % p
        col = a[:, c].copy()
        col[r] = 0
        a = (a - np.outer(col, a[r])) % p
        pivots.append(c)
        r += 1
    return a, pivots


def matrix_rank(matrix, p: int) -> int:
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0
    return len(rref(matrix, p)[1])


def in_span(rows, target, p: int) -> np.ndarray | None:
    """Coefficients ``c`` with ``c @ rows == target`` mod p, or ``None``."""
    rows = np.array(rows, dtype=np.int64).reshape(-1, len(target)) % p
    target = np.array(target, dtype=np.int64) % p
    k = rows.shape[0]
    if k == 0:
        return np.zeros(0, dtype=np.int64) if not target.any() else None
    # solve rows^T c = target
    aug = np.concatenate([rows.T, target[:, None]], axis=1)
    red, piv = rref(aug, p)
    if k in piv:
        return None
    sol = np.zeros(k, dtype=np.int64)
    for i, c in enumerate(piv):
        sol[c] = red[i, k]
    return sol


def batched_rank(mats, p: int) -> np.ndarray:
    """Ranks mod ``p`` of a stack of matrices with shape ``(..., r, c)``."""
    a = np.array(mats, dtype=np.int64) % p
    lead = a.shape[:-2]
    r, c = a.shape[-2:]
    a = a.reshape(-1, r, c)
    k = a.shape[0]
    inv = np.array([0] + [pow(x, p - 2, p) for x in range(1, p)], dtype=np.int64)
    rank = np.zeros(k, dtype=np.int64)
    rows = np.arange(k)
    for col in range(c):
        # first row at or below the current rank with a nonzero entry in col
        below = np.arange(r)[None, :] >= rank[:, None]
        cand = (a[:, :, col] != 0) & below
        has = cand.any(axis=1)
        if not has.any():
            continue
        piv = np.argmax(cand, axis=1)
        sel = rows[has]
        tgt = rank[has].clip(max=r - 1)
        prow, trow = a[sel, piv[has]].copy(), a[sel, tgt].copy()
        a[sel, tgt], a[sel, piv[has]] = prow, trow
        pivot_row = a[sel, tgt] * inv[a[sel, tgt, col]][:, None] % p
        a[sel, tgt] = pivot_row
        factors = a[sel, :, col].copy()
        factors[np.arange(len(sel)), tgt] = 0
        a[sel] = (a[sel] - factors[:, :, None] * pivot_row[:, None, :]) % p
        rank[has] += 1
    return rank.reshape(lead)
