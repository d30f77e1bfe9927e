"""Exact polynomials over F_p, difference operators and character sums.

Polynomials are formal: ``x0**2`` and ``x0`` are different elements even
over F_2.  Use :meth:`Poly.check_reduced` when a polynomial must stand for a
function (every exponent at most ``p - 1``).

Text format (used by every CLI command)::

    p=5 n=3 d=2
    3*x0^2 + 1*x0*x1 + 4*x2

The header gives the modulus, the number of variables and a degree bound.
Terms are ``+``-separated; whitespace is ignored.
"""

from __future__ import annotations

import itertools
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded, PreconditionError
from .field import check_prime, grid, inv_mod

DEFAULT_BUDGET = 1 << 24
_CHUNK = 1 << 18

Monomial = tuple


def default_workers() -> int:
    return max(1, int(os.environ.get("APPROXCOH_WORKERS", "1")))


class Poly:
    """Immutable multivariate polynomial over F_p.

    ``terms`` maps exponent tuples to nonzero residues.
    """

    __slots__ = ("p", "nvars", "_terms", "_key")

    def __init__(self, p: int, nvars: int, terms: Mapping[Monomial, int] | None = None):
        self.p = check_prime(p)
        if nvars < 0:
            raise PreconditionError("nvars must be non-negative")
        self.nvars = int(nvars)
        clean = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != nvars or min(mono, default=0) < 0:
                raise PreconditionError(f"bad exponent vector {mono} for {nvars} variables")
            c = int(c) % p
            if c:
                clean[mono] = c
        self._terms = clean
        self._key = None

    # constructors
    @classmethod
    def zero(cls, p, nvars):
        return cls(p, nvars)

    @classmethod
    def constant(cls, p, nvars, c):
        return cls(p, nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, p, nvars, i, power=1):
        mono = [0] * nvars
        mono[i] = power
        return cls(p, nvars, {tuple(mono): 1})

    @classmethod
    def linear(cls, p, coeffs):
        n = len(coeffs)
        return cls(p, n, {tuple(int(i == j) for j in range(n)): c for i, c in enumerate(coeffs)})

    # basic properties
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, mono) -> int:
        return self._terms.get(tuple(mono), 0)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return max((sum(m) for m in self._terms), default=-1)

    @property
    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self._terms}) <= 1

    def check_reduced(self):
        """Raise unless every exponent is at most ``p - 1``."""
        for mono in self._terms:
            if max(mono, default=0) > self.p - 1:
                raise PreconditionError(
                    f"exponent in {mono} exceeds p-1={self.p - 1}; not a function representative"
                )
        return self

    def key(self):
        """Canonical hashable form."""
        if self._key is None:
            self._key = (self.p, self.nvars, tuple(sorted(self._terms.items(), reverse=True)))
        return self._key

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.key() == other.key()

    def __repr__(self):
        return f"Poly({self.body()!r}, p={self.p}, n={self.nvars})"

    # arithmetic
    def _check(self, other):
        if not isinstance(other, Poly):
            raise TypeError(f"expected Poly, got {type(other).__name__}")
        if other.p != self.p or other.nvars != self.nvars:
            raise PreconditionError(
                f"mismatched polynomials: (p={self.p}, n={self.nvars}) vs (p={other.p}, n={other.nvars})"
            )

    def __add__(self, other):
        if isinstance(other, int):
            other = Poly.constant(self.p, self.nvars, other)
        self._check(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = (out.get(m, 0) + c) % self.p
        return Poly(self.p, self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.p, self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, int):
            other = Poly.constant(self.p, self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, np.integer)):
            return Poly(self.p, self.nvars, {m: c * int(other) for m, c in self._terms.items()})
        self._check(other)
        out: dict = {}
        p = self.p
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = (out.get(m, 0) + c1 * c2) % p
        return Poly(p, self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.constant(self.p, self.nvars, 1)
        for _ in range(k):
            out = out * self
        return out

    def __call__(self, x):
        return eval_poly(self, x)

    # text format
    def body(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for mono, c in sorted(self._terms.items(), reverse=True):
            factors = [str(c)]
            for i, e in enumerate(mono):
                if e == 1:
                    factors.append(f"x{i}")
                elif e > 1:
                    factors.append(f"x{i}^{e}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    def to_text(self, d: int | None = None) -> str:
        if d is None:
            d = max(self.degree, 0)
        if self.degree > d:
            raise PreconditionError(f"degree {self.degree} exceeds bound d={d}")
        return f"p={self.p} n={self.nvars} d={d}\n{self.body()}\n"


# --- text format ------------------------------------------------------------

_HEADER = re.compile(r"^\s*p\s*=\s*(\d+)\s+n\s*=\s*(\d+)\s+d\s*=\s*(\d+)\s*$")
_FACTOR = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def parse_body(body: str, p: int, nvars: int) -> Poly:
    text = re.sub(r"\s+", "", body)
    if not text:
        raise PreconditionError("empty polynomial body")
    text = re.sub(r"(?<=[^+^*])-", "+-", text)
    terms: dict = {}
    for term in text.split("+"):
        if not term:
            raise PreconditionError(f"malformed polynomial {body!r}")
        sign = 1
        if term.startswith("-"):
            sign, term = -1, term[1:]
        coeff = 1
        mono = [0] * nvars
        for k, factor in enumerate(term.split("*")):
            if k == 0 and factor.isdigit():
                coeff = int(factor)
                continue
            match = _FACTOR.match(factor)
            if not match:
                raise PreconditionError(f"malformed factor {factor!r} in {body!r}")
            i = int(match.group(1))
            if i >= nvars:
                raise PreconditionError(f"variable x{i} out of range for n={nvars}")
            mono[i] += int(match.group(2) or 1)
        mono = tuple(mono)
        terms[mono] = (terms.get(mono, 0) + sign * coeff) % p
    return Poly(p, nvars, terms)


def parse_header(line: str) -> tuple[int, int, int]:
    match = _HEADER.match(line)
    if not match:
        raise PreconditionError(f"bad polynomial header {line!r}; expected 'p=<p> n=<n> d=<d>'")
    return tuple(int(g) for g in match.groups())


def parse_poly(text: str) -> Poly:
    """Parse the header-plus-body text format."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise PreconditionError("empty polynomial text")
    p, n, d = parse_header(lines[0])
    poly = parse_body(" ".join(lines[1:]) or "0", p, n)
    if poly.degree > d:
        raise PreconditionError(f"polynomial degree {poly.degree} exceeds header bound d={d}")
    return poly


# --- evaluation -------------------------------------------------------------


def _as_point(x, p, n):
    x = tuple(int(c) for c in x)
    if len(x) != n:
        raise PreconditionError(f"point has {len(x)} coordinates, polynomial has {n} variables")
    if any(not 0 <= c < p for c in x):
        raise PreconditionError(f"coordinates of {x} must lie in [0, {p})")
    return x


def eval_poly(P: Poly, x) -> int:
    x = _as_point(x, P.p, P.nvars)
    total = 0
    for mono, c in P.items():
        t = c
        for xi, e in zip(x, mono):
            if e:
                t = t * pow(xi, e, P.p)
        total += t
    return total % P.p


def eval_grid(P: Poly, points: np.ndarray) -> np.ndarray:
    """Vectorised evaluation at the rows of ``points``."""
    p = P.p
    points = np.asarray(points, dtype=np.int64)
    out = np.zeros(points.shape[0], dtype=np.int64)
    if P.is_zero():
        return out
    maxe = max(max(m, default=0) for m in P._terms)
    base = np.arange(p, dtype=np.int64)
    powtab = np.ones((maxe + 1, p), dtype=np.int64)
    for e in range(1, maxe + 1):
        powtab[e] = powtab[e - 1] * base % p
    for mono, c in P.items():
        t = np.full(points.shape[0], c, dtype=np.int64)
        for i, e in enumerate(mono):
            if e:
                t = t * powtab[e][points[:, i]] % p
        out += t
    return out % p


def value_table(P: Poly, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    size = P.p**P.nvars
    if size > budget:
        raise BudgetExceeded("value table", size, budget)
    return eval_grid(P, grid(P.p, P.nvars))


# --- difference operators ---------------------------------------------------


def translate(P: Poly, h) -> Poly:
    """The polynomial ``x -> P(x + h)``."""
    h = _as_point(h, P.p, P.nvars)
    p, n = P.p, P.nvars
    out: dict = {}
    for mono, c in P.items():
        partial = {(): c}
        for i, e in enumerate(mono):
            nxt: dict = {}
            for k in range(e + 1):
                w = math.comb(e, k) * pow(h[i], e - k, p) % p
                if not w:
                    continue
                for head, v in partial.items():
                    key = head + (k,)
                    nxt[key] = (nxt.get(key, 0) + v * w) % p
            partial = nxt
        for m, v in partial.items():
            out[m] = (out.get(m, 0) + v) % p
    return Poly(p, n, out)


def delta(P: Poly, h) -> Poly:
    """``x -> P(x + h) - P(x)``."""
    return translate(P, h) - P


def top_degree(P: Poly, d: int) -> Poly:
    """The homogeneous degree-``d`` component of ``P``."""
    if P.degree > d:
        raise PreconditionError(f"polynomial of degree {P.degree} exceeds d={d}")
    return Poly(P.p, P.nvars, {m: c for m, c in P.items() if sum(m) == d})


def project(P: Poly, l: int) -> Poly:
    """Set every variable of index ``>= l`` to zero; the result has ``l`` variables."""
    if not 0 <= l <= P.nvars:
        raise PreconditionError(f"projection level {l} outside [0, {P.nvars}]")
    return Poly(P.p, l, {m[:l]: c for m, c in P.items() if not any(m[l:])})


def embed(P: Poly, nvars: int) -> Poly:
    """View ``P`` as a polynomial in ``nvars >= P.nvars`` variables."""
    if nvars < P.nvars:
        raise PreconditionError("cannot embed into fewer variables")
    pad = (0,) * (nvars - P.nvars)
    return Poly(P.p, nvars, {m + pad: c for m, c in P.items()})


def support_width(P: Poly) -> int:
    """Least ``l`` with ``project(P, l) == P``."""
    width = 0
    for mono in P._terms:
        for i in range(len(mono) - 1, -1, -1):
            if mono[i]:
                width = max(width, i + 1)
                break
    return width


def monomials(nvars: int, d: int) -> list[tuple]:
    """Exponent vectors of degree exactly ``d`` in canonical (descending lex) order."""
    out = []
    for combo in itertools.combinations_with_replacement(range(nvars), d):
        mono = [0] * nvars
        for i in combo:
            mono[i] += 1
        out.append(tuple(mono))
    return sorted(set(out), reverse=True)


# --- multilinear forms ------------------------------------------------------


class MultilinearForm:
    """A ``d``-block multilinear form with ``nvars`` variables per block.

    ``coeffs[(j1, ..., jd)]`` is the coefficient of ``x_{1,j1} ... x_{d,jd}``.
    As a polynomial on the product space, block ``b`` variable ``j`` is the
    flattened variable ``b * nvars + j``.
    """

    __slots__ = ("p", "d", "nvars", "coeffs")

    def __init__(self, p, d, nvars, coeffs=None):
        self.p = check_prime(p)
        self.d, self.nvars = int(d), int(nvars)
        clean = {}
        for idx, c in (coeffs or {}).items():
            idx = tuple(int(j) for j in idx)
            if len(idx) != d or any(not 0 <= j < nvars for j in idx):
                raise PreconditionError(f"bad index tuple {idx}")
            c = int(c) % p
            if c:
                clean[idx] = (clean.get(idx, 0) + c) % p
        self.coeffs = {k: v for k, v in clean.items() if v}

    @classmethod
    def from_tensor(cls, p, tensor):
        tensor = np.asarray(tensor)
        d, n = tensor.ndim, tensor.shape[0]
        coeffs = {idx: int(tensor[idx]) for idx in itertools.product(range(n), repeat=d)}
        return cls(p, d, n, coeffs)

    def tensor(self) -> np.ndarray:
        t = np.zeros((self.nvars,) * self.d, dtype=np.int64)
        for idx, c in self.coeffs.items():
            t[idx] = c
        return t

    def is_zero(self):
        return not self.coeffs

    def permute_blocks(self, perm) -> "MultilinearForm":
        return MultilinearForm(
            self.p, self.d, self.nvars,
            {tuple(idx[perm[b]] for b in range(self.d)): c for idx, c in self.coeffs.items()},
        )

    @property
    def symmetric(self) -> bool:
        return all(
            self.coeffs.get(tuple(idx[b] for b in perm), 0) == c
            for idx, c in self.coeffs.items()
            for perm in itertools.permutations(range(self.d))
        )

    def as_poly(self) -> Poly:
        n = self.nvars
        terms = {}
        for idx, c in self.coeffs.items():
            mono = [0] * (self.d * n)
            for b, j in enumerate(idx):
                mono[b * n + j] += 1
            terms[tuple(mono)] = c
        return Poly(self.p, self.d * n, terms)

    def evaluate(self, *blocks) -> int:
        total = 0
        for idx, c in self.coeffs.items():
            t = c
            for b, j in enumerate(idx):
                t *= blocks[b][j]
            total += t
        return total % self.p

    def __eq__(self, other):
        if not isinstance(other, MultilinearForm):
            return NotImplemented
        return (self.p, self.d, self.nvars, self.coeffs) == (other.p, other.d, other.nvars, other.coeffs)

    def __repr__(self):
        return f"MultilinearForm(p={self.p}, d={self.d}, nvars={self.nvars}, coeffs={self.coeffs})"


def polarize(P: Poly, d: int | None = None) -> MultilinearForm:
    """``Delta_{x_d} ... Delta_{x_1} P`` as a d-block form, for any characteristic.

    For a homogeneous degree-``d`` monomial ``x^e`` the iterated difference
    puts coefficient ``prod(e_i!)`` on every index tuple whose multiset of
    variables is ``e``; that identity holds over Z and hence mod p.
    """
    if d is None:
        if P.is_zero():
            raise PreconditionError("degree of the zero polynomial must be given")
        d = P.degree
    if not P.is_zero() and (not P.is_homogeneous or P.degree != d):
        raise PreconditionError(f"polarization needs a homogeneous polynomial of degree {d}")
    p = P.p
    coeffs: dict = {}
    for mono, c in P.items():
        idx = [i for i, e in enumerate(mono) for _ in range(e)]
        w = c
        for e in mono:
            w = w * math.factorial(e) % p
        if not w:
            continue
        for t in set(itertools.permutations(idx)):
            coeffs[t] = (coeffs.get(t, 0) + w) % p
    return MultilinearForm(p, d, P.nvars, coeffs)


def multilinearize(P: Poly, d: int | None = None) -> MultilinearForm:
    """The symmetric multilinear form of a homogeneous polynomial, ``d < p``."""
    if d is None and not P.is_zero():
        d = P.degree
    if d is None:
        raise PreconditionError("degree of the zero polynomial must be given")
    if d >= P.p:
        raise PreconditionError(f"multilinearization needs d < p (d={d}, p={P.p}): d! is not invertible")
    return polarize(P, d)


def diagonal_restore(T: MultilinearForm, d: int | None = None) -> Poly:
    """``x -> T(x, ..., x) / d!``; inverse of :func:`multilinearize`."""
    d = T.d if d is None else d
    if d != T.d:
        raise PreconditionError(f"form has {T.d} blocks, asked to restore degree {d}")
    if d >= T.p:
        raise PreconditionError(f"d! is not invertible mod p for d={d}, p={T.p}")
    if not T.symmetric:
        raise PreconditionError("diagonal_restore needs a symmetric form")
    scale = inv_mod(math.factorial(d), T.p)
    terms: dict = {}
    for idx, c in T.coeffs.items():
        mono = [0] * T.nvars
        for j in idx:
            mono[j] += 1
        mono = tuple(mono)
        terms[mono] = (terms.get(mono, 0) + c * scale) % T.p
    return Poly(T.p, T.nvars, terms)


# --- character sums ---------------------------------------------------------


@dataclass(frozen=True)
class CharacterSum:
    """Residue counts of a function into Z/q together with the domain size.

    The character is ``a -> exp(2 pi i a / q)``.  ``q`` is ``p`` for
    polynomial phases and ``p**k`` for torsion-valued tables.
    """

    q: int
    counts: tuple
    total: int

    def __post_init__(self):
        if len(self.counts) != self.q or sum(self.counts) != self.total:
            raise AssertionError("inconsistent character-sum counts")

    def __add__(self, other):
        if self.q != other.q:
            raise PreconditionError("cannot merge sums over different moduli")
        return CharacterSum(
            self.q, tuple(a + b for a, b in zip(self.counts, other.counts)), self.total + other.total
        )

    def value(self) -> complex:
        q = self.q
        acc = 0j
        for a, c in enumerate(self.counts):
            if c:
                acc += c * complex(math.cos(2 * math.pi * a / q), math.sin(2 * math.pi * a / q))
        return acc / self.total

    def is_real(self) -> bool:
        q = self.q
        return all(self.counts[a] == self.counts[(-a) % q] for a in range(q))

    def fraction(self) -> Fraction | None:
        """The exact value when it is rational by class symmetry, else ``None``.

        Residues of the same additive order with equal counts contribute a
        Ramanujan sum, which is 1 for order 1, -1 for order p and 0 beyond.
        """
        q = self.q
        p = _smallest_prime_factor(q)
        classes: dict = {}
        for a in range(q):
            classes.setdefault(q // math.gcd(a, q), set()).add(self.counts[a])
        if any(len(v) != 1 for v in classes.values()):
            return None
        c0 = self.counts[0]
        c1 = next(iter(classes[p])) if p in classes else 0
        return Fraction(c0 - c1, self.total)

    def bias(self) -> float:
        return self.value().real


def _smallest_prime_factor(q):
    for k in range(2, q + 1):
        if q % k == 0:
            return k
    return q


def counts_of(values: np.ndarray, q: int) -> CharacterSum:
    counts = np.bincount(np.asarray(values, dtype=np.int64).ravel() % q, minlength=q)
    return CharacterSum(q, tuple(int(c) for c in counts), int(counts.sum()))


def bias(P: Poly, budget: int = DEFAULT_BUDGET, workers: int | None = None) -> CharacterSum:
    """Exact residue counts of ``P`` over all of F_p^n.

    The domain is cut into fixed chunks; chunk counts are integer vectors
    merged by addition, so the result does not depend on ``workers``.
    """
    p, n = P.p, P.nvars
    size = p**n
    if size > budget:
        raise BudgetExceeded("bias enumeration", size, budget)
    if P.is_zero():
        counts = [0] * p
        counts[0] = size
        return CharacterSum(p, tuple(counts), size)
    bounds = [(s, min(s + _CHUNK, size)) for s in range(0, size, _CHUNK)]

    def chunk(b):
        vals = eval_grid(P, grid(p, n, *b))
        return np.bincount(vals, minlength=p)

    workers = default_workers() if workers is None else workers
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(chunk, bounds))
    else:
        parts = [chunk(b) for b in bounds]
    counts = np.sum(parts, axis=0)
    return CharacterSum(p, tuple(int(c) for c in counts), size)


def random_homogeneous(p: int, nvars: int, d: int, rng, density: float = 1.0) -> Poly:
    terms = {}
    for mono in monomials(nvars, d):
        if rng.random() < density:
            terms[mono] = int(rng.integers(p))
    return Poly(p, nvars, terms)


def random_poly(p: int, nvars: int, d: int, rng) -> Poly:
    """Random polynomial of degree at most ``d`` (all monomials present)."""
    terms = {}
    for k in range(d + 1):
        for mono in monomials(nvars, k):
            terms[mono] = int(rng.integers(p))
    return Poly(p, nvars, terms)


def linear_combination(polys: Sequence[Poly], coeffs: Iterable[int], p: int, nvars: int) -> Poly:
    out = Poly.zero(p, nvars)
    for P, c in zip(polys, coeffs):
        if c:
            out = out + P * int(c)
    return out
