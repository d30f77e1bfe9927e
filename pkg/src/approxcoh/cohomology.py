"""Cochains on G = F_p^s with polynomial values, and their coboundaries.

Sign convention: the coboundary is the negated bar differential for a left
action,

    (dc)(g_1..g_{n+1}) = -[g_1.c(g_2..) + sum_i (-1)^i c(..g_i+g_{i+1}..)
                           + (-1)^{n+1} c(g_1..g_n)],

so a 1-cochain gets ``dA(g, h) = A(g + h) - g.A(h) - A(g)``.  Ranks never
depend on the overall sign.

Rank levels are three-valued: every value is bracketed ``lo <= rank <= hi``
by :mod:`approxcoh.rank`, predicates answer ``True``/``False`` only when the
bracket decides them and ``None`` otherwise.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, PreconditionError
from .ffpoly import Poly, monomials, parse_body, parse_header, polarize, top_degree, translate
from .field import addition_table, check_prime, grid, in_span
from .rank import multilinear_bias, quadratic_rank_value, rank

SIGN_CONVENTION = "dA(g,h) = A(g+h) - g.A(h) - A(g) (negated bar differential)"
ACTIONS = ("trivial", "translation")


@dataclass(frozen=True)
class GroupSpec:
    """G = F_p^s, elements enumerated in lexicographic order."""

    p: int
    s: int

    def __post_init__(self):
        check_prime(self.p)
        if self.s < 0:
            raise PreconditionError("group dimension must be >= 0")

    @property
    def size(self) -> int:
        return self.p**self.s

    def elements(self) -> list[tuple]:
        return [tuple(int(c) for c in row) for row in grid(self.p, self.s)]

    def index(self, g) -> int:
        idx = 0
        for c in g:
            idx = idx * self.p + int(c) % self.p
        return idx

    def add_table(self) -> np.ndarray:
        return addition_table(self.p, self.s)

    def basis(self) -> list[tuple]:
        return [tuple(int(i == j) for j in range(self.s)) for i in range(self.s)]


@dataclass(frozen=True)
class FiltrationTag:
    """``Ad``: homogeneous degree-d rank; ``Bd``: degree <= d rank."""

    kind: str
    d: int

    def __post_init__(self):
        if self.kind not in ("Ad", "Bd"):
            raise PreconditionError(f"unknown filtration {self.kind!r}")


class Cochain:
    """A map ``G^n -> polynomials`` stored as a table in lexicographic order."""

    def __init__(self, group: GroupSpec, degree: int, values, action: str = "trivial"):
        if action not in ACTIONS:
            raise PreconditionError(f"unknown action {action!r}")
        values = tuple(values)
        if len(values) != group.size**degree:
            raise PreconditionError(
                f"a degree-{degree} cochain on F_{group.p}^{group.s} needs {group.size ** degree} values"
            )
        first = values[0]
        for P in values:
            if not isinstance(P, Poly) or P.p != group.p or P.nvars != first.nvars:
                raise PreconditionError("cochain values must share the group's p and one variable count")
        if action == "translation" and first.nvars != group.s:
            raise PreconditionError("translation action needs polynomials in s variables")
        self.group, self.degree, self.values, self.action = group, degree, values, action

    @classmethod
    def from_function(cls, group, degree, fn, action="trivial"):
        elems = group.elements()
        return cls(group, degree, [fn(*args) for args in itertools.product(elems, repeat=degree)], action)

    @property
    def p(self):
        return self.group.p

    @property
    def nvars(self):
        return self.values[0].nvars

    def index(self, args) -> int:
        idx = 0
        for g in args:
            idx = idx * self.group.size + (g if isinstance(g, (int, np.integer)) else self.group.index(g))
        return idx

    def __call__(self, *args) -> Poly:
        return self.values[self.index(args)]

    def _same_shape(self, other):
        if (self.group, self.degree, self.action) != (other.group, other.degree, other.action):
            raise PreconditionError("cochains differ in group, degree or action")

    def __add__(self, other):
        self._same_shape(other)
        return Cochain(self.group, self.degree, [a + b for a, b in zip(self.values, other.values)], self.action)

    def __sub__(self, other):
        self._same_shape(other)
        return Cochain(self.group, self.degree, [a - b for a, b in zip(self.values, other.values)], self.action)

    def __neg__(self):
        return Cochain(self.group, self.degree, [-a for a in self.values], self.action)

    def __eq__(self, other):
        if not isinstance(other, Cochain):
            return NotImplemented
        return (self.group, self.degree, self.action, self.values) == (
            other.group, other.degree, other.action, other.values)

    def with_action(self, action):
        return Cochain(self.group, self.degree, self.values, action)

    def max_degree(self) -> int:
        return max(P.degree for P in self.values)

    def to_json(self, d: int | None = None) -> dict:
        d = max(self.max_degree(), 0) if d is None else d
        return {
            "group": {"p": self.p, "s": self.group.s},
            "degree": self.degree,
            "action": self.action,
            "nvars": self.nvars,
            "d": d,
            "sign_convention": SIGN_CONVENTION,
            "values": {str(i): P.body() for i, P in enumerate(self.values)},
        }

    @classmethod
    def from_json(cls, data: dict) -> "Cochain":
        try:
            group = GroupSpec(int(data["group"]["p"]), int(data["group"]["s"]))
            degree = int(data.get("degree", 1))
            nvars = int(data["nvars"])
            raw = data["values"]
        except (KeyError, TypeError) as exc:
            raise PreconditionError(f"malformed cochain JSON: missing {exc}") from exc
        count = group.size**degree
        if isinstance(raw, dict):
            missing = [i for i in range(count) if str(i) not in raw]
            if missing:
                raise PreconditionError(f"cochain JSON misses values for indices {missing[:5]}")
            raw = [raw[str(i)] for i in range(count)]
        values = [_parse_value(text, group.p, nvars) for text in raw]
        d = data.get("d")
        if d is not None and any(P.degree > int(d) for P in values):
            raise PreconditionError(f"cochain value exceeds degree bound d={d}")
        return cls(group, degree, values, data.get("action", "trivial"))

    def dumps(self, d=None) -> str:
        return json.dumps(self.to_json(d), indent=2, sort_keys=True)


def _parse_value(text, p, nvars):
    lines = [ln for ln in str(text).strip().splitlines() if ln.strip()]
    if lines and lines[0].lstrip().startswith("p="):
        hp, hn, hd = parse_header(lines[0])
        if (hp, hn) != (p, nvars):
            raise PreconditionError("value header disagrees with the cochain header")
        lines = lines[1:]
    return parse_body(" ".join(lines) or "0", p, nvars)


def act(group: GroupSpec, g: int, P: Poly, action: str) -> Poly:
    if action == "trivial":
        return P
    return translate(P, group.elements()[g])


def coboundary(c: Cochain) -> Cochain:
    """The degree ``n + 1`` coboundary (see the module docstring for signs)."""
    G, n = c.group, c.degree
    size = G.size
    add = G.add_table()
    elems = G.elements()
    translated: dict = {}

    def acted(g, P):
        if c.action == "trivial":
            return P
        key = (g, P.key())
        if key not in translated:
            translated[key] = translate(P, elems[g])
        return translated[key]

    out = []
    for args in itertools.product(range(size), repeat=n + 1):
        acc = acted(args[0], c.values[c.index(args[1:])])
        for i in range(1, n + 1):
            merged = args[: i - 1] + (int(add[args[i - 1], args[i]]),) + args[i + 1:]
            term = c.values[c.index(merged)]
            acc = acc - term if i % 2 else acc + term
        last = c.values[c.index(args[:n])]
        acc = acc - last if (n + 1) % 2 else acc + last
        out.append(-acc)
    return Cochain(G, n + 1, out, c.action)


# --- rank bracketing -----------------------------------------------------------


class RankOracle:
    """Cached rank brackets for one filtration.

    ``Bd`` ranks a polynomial of degree <= d by the rank of its degree-d
    homogenization ``z^d P(x / z)`` in one extra variable.  Setting ``z = 0``
    recovers the top-degree part, so its rank never exceeds the ``Bd`` rank.
    """

    def __init__(self, filtration: FiltrationTag, ext_degree: int | None = None):
        self.filtration = filtration
        self.ext_degree = ext_degree if ext_degree is not None else (2 if filtration.d <= 2 else 3)
        self._cache: dict = {}

    def homogeneous(self, P: Poly) -> tuple[int, int]:
        key = P.key()
        if key not in self._cache:
            if P.is_zero():
                self._cache[key] = (0, 0)
            elif P.degree == 2 and P.p != 2:
                # exact: half the rank of the symmetric matrix, rounded up
                v = quadratic_rank_value(P)
                self._cache[key] = (v, v)
            else:
                res = rank(P, ext_degree=self.ext_degree)
                self._cache[key] = (res.lower_bound, res.upper_bound)
        return self._cache[key]

    def __call__(self, P: Poly) -> tuple[int, int]:
        d = self.filtration.d
        if P.degree > d:
            raise PreconditionError(f"value of degree {P.degree} exceeds filtration degree {d}")
        if self.filtration.kind == "Ad":
            if not P.is_zero() and (not P.is_homogeneous or P.degree != d):
                raise PreconditionError("filtration Ad admits only homogeneous degree-d values")
            return self.homogeneous(P)
        return self.homogeneous(homogenize(P, d))


def homogenize(P: Poly, d: int) -> Poly:
    """``z^d P(x / z)`` with ``z`` appended as the last variable."""
    if P.degree > d:
        raise PreconditionError(f"cannot homogenize degree {P.degree} to degree {d}")
    return Poly(P.p, P.nvars + 1, {m + (d - sum(m),): c for m, c in P.items()})


@dataclass
class DefectReport:
    max_rank_upper: int
    max_rank_lower: int
    argmax: tuple
    histogram: dict
    ranks: dict = field(repr=False, default_factory=dict)
    sign_convention: str = SIGN_CONVENTION

    def nonzero_pairs(self) -> list[tuple]:
        return [pair for pair, (lo, hi) in self.ranks.items() if hi > 0]

    def to_dict(self) -> dict:
        return {
            "max_rank_upper": self.max_rank_upper,
            "max_rank_lower": self.max_rank_lower,
            "argmax": [list(g) for g in self.argmax],
            "histogram": dict(sorted(self.histogram.items())),
            "sign_convention": self.sign_convention,
        }


def _bracket_label(lo, hi):
    return str(lo) if lo == hi else f"{lo}..{hi}"


def _report(c: Cochain, oracle: RankOracle) -> DefectReport:
    elems = c.group.elements()
    size = c.group.size
    # pre-pass fills the cache; the sweep below only reads it
    for P in set(c.values):
        oracle(P)
    ranks, hist = {}, {}
    best = (-1, -1)
    argmax = ()
    for args in itertools.product(range(size), repeat=c.degree):
        lo, hi = oracle(c.values[c.index(args)])
        pair = tuple(elems[g] for g in args)
        ranks[pair] = (lo, hi)
        label = _bracket_label(lo, hi)
        hist[label] = hist.get(label, 0) + 1
        if (hi, lo) > best:
            best, argmax = (hi, lo), pair
    return DefectReport(best[0], best[1], argmax, hist, ranks)


def defect(A: Cochain, filtration: FiltrationTag, oracle: RankOracle | None = None) -> DefectReport:
    """Bracketed ranks of ``dA`` over all argument tuples."""
    oracle = oracle or RankOracle(filtration)
    return _report(coboundary(A), oracle)


def _decide(lo_max, hi_max, i):
    if hi_max <= i:
        return True
    if lo_max > i:
        return False
    return None


def is_approx_cocycle(A: Cochain, i: int, filtration: FiltrationTag,
                      oracle: RankOracle | None = None) -> bool | None:
    """``True`` if every value of ``dA`` has rank <= i, ``False`` if some exceeds it."""
    rep = defect(A, filtration, oracle)
    return _decide(rep.max_rank_lower, rep.max_rank_upper, i)


def is_approx_coboundary(r: Cochain, t: Cochain, i: int, filtration: FiltrationTag,
                         oracle: RankOracle | None = None) -> bool | None:
    """Whether every value of ``r - dt`` has rank <= i (three-valued)."""
    if t.degree != r.degree - 1:
        raise PreconditionError("t must have degree one less than r")
    rep = _report(r - coboundary(t), oracle or RankOracle(filtration))
    return _decide(rep.max_rank_lower, rep.max_rank_upper, i)


def top_degree_reduce(P: Cochain, i: int, d: int, oracle_b: RankOracle | None = None,
                      oracle_a: RankOracle | None = None) -> Cochain:
    """Pass from a translation cocycle into degree <= d to its top-degree part.

    The input must be an approximate translation cocycle at level ``i``;
    the output carries the trivial action and its defect is checked to be
    at most ``i + 1``.
    """
    if P.action != "translation" or P.degree != 1:
        raise PreconditionError("top_degree_reduce needs a translation 1-cochain")
    status = is_approx_cocycle(P, i, FiltrationTag("Bd", d), oracle_b)
    if status is not True:
        raise PreconditionError(f"input is not a certified approximate cocycle at level {i} ({status})")
    Q = Cochain(P.group, 1, [top_degree(v, d) for v in P.values], "trivial")
    rep = defect(Q, FiltrationTag("Ad", d), oracle_a)
    if rep.max_rank_upper > i + 1:  # pragma: no cover - would refute the reduction
        raise AssertionError(f"top-degree defect {rep.max_rank_upper} exceeds {i + 1}")
    return Q


# --- linear maps and finite rank ---------------------------------------------


class LinearMap:
    """``chi(sum a_i e_i) = sum a_i images[i]`` on G = F_p^s."""

    def __init__(self, group: GroupSpec, images):
        images = tuple(images)
        if len(images) != group.s:
            raise PreconditionError(f"need {group.s} basis images, got {len(images)}")
        if images and any(P.p != group.p or P.nvars != images[0].nvars for P in images):
            raise PreconditionError("images must share p and the number of variables")
        self.group, self.images = group, images

    def __call__(self, g) -> Poly:
        if isinstance(g, (int, np.integer)):
            g = self.group.elements()[g]
        out = self.images[0] * 0 if self.images else None
        for a, P in zip(g, self.images):
            if a:
                out = out + P * int(a)
        return out

    def values(self) -> list[Poly]:
        return [self(g) for g in self.group.elements()]

    def as_cochain(self, action="trivial") -> Cochain:
        return Cochain(self.group, 1, self.values(), action)

    def __eq__(self, other):
        return isinstance(other, LinearMap) and (self.group, self.images) == (other.group, other.images)

    def __repr__(self):
        return f"LinearMap(p={self.group.p}, s={self.group.s}, images={[P.body() for P in self.images]})"

    def to_json(self, d=None) -> dict:
        nv = self.images[0].nvars if self.images else 0
        d = max((P.degree for P in self.images), default=0) if d is None else d
        return {
            "group": {"p": self.group.p, "s": self.group.s},
            "nvars": nv,
            "d": max(d, 0),
            "images": [P.body() for P in self.images],
        }

    @classmethod
    def from_json(cls, data) -> "LinearMap":
        try:
            group = GroupSpec(int(data["group"]["p"]), int(data["group"]["s"]))
            nvars = int(data["nvars"])
            images = [_parse_value(t, group.p, nvars) for t in data["images"]]
        except (KeyError, TypeError) as exc:
            raise PreconditionError(f"malformed linear-map JSON: missing {exc}") from exc
        return cls(group, images)


@dataclass
class FiniteRankCertificate:
    """``chi(v) = sum_j Q_j(v) * R_j`` with fixed ``R_j`` and linear ``Q_j``.

    ``terms[j] = (R_j, [Q_j(e_1), ..., Q_j(e_s)])``.
    """

    terms: list

    def evaluate(self, chi: LinearMap, g) -> Poly:
        out = chi(g) * 0
        for R, qimgs in self.terms:
            Qv = LinearMap(chi.group, qimgs)(g)
            out = out + Qv * R
        return out

    def verify(self, chi: LinearMap) -> bool:
        return all(self.evaluate(chi, g) == chi(g) for g in chi.group.elements())

    def to_dict(self) -> dict:
        return {"terms": [{"R": R.body(), "Q": [q.body() for q in qs]} for R, qs in self.terms]}


def _normalized(P: Poly) -> bool:
    first = P.coeff(max(P.items())[0]) if not P.is_zero() else 0
    return first == 1


def finite_rank_test(chi: LinearMap, d: int, max_terms: int | None = None,
                     budget: int = 200_000) -> FiniteRankCertificate | None:
    """Smallest decomposition of a linear map into fixed-cofactor products.

    Searches sets of fixed factors ``R_j`` (homogeneous of degree 1..d-1,
    scaled so their leading coefficient is 1) by increasing size and checks
    by linear algebra whether every basis image lies in the span of
    ``{mono * R_j}``.  ``None`` means not found within the budget, not a
    disproof.
    """
    if d < 2:
        raise PreconditionError("finite-rank decompositions need d >= 2")
    p = chi.group.p
    n = chi.images[0].nvars if chi.images else 0
    for P in chi.images:
        if not P.is_zero() and (not P.is_homogeneous or P.degree != d):
            raise PreconditionError(f"images must be homogeneous of degree {d}")
    if all(P.is_zero() for P in chi.images):
        return FiniteRankCertificate([])
    target_monos = monomials(n, d)
    pos = {m: i for i, m in enumerate(target_monos)}

    def vec(P):
        v = np.zeros(len(target_monos), dtype=np.int64)
        for m, c in P.items():
            v[pos[m]] = c
        return v

    cands = []
    for k in range(1, d):
        mk = monomials(n, k)
        for coeffs in itertools.product(range(p), repeat=len(mk)):
            R = Poly(p, n, dict(zip(mk, coeffs)))
            if not R.is_zero() and _normalized(R):
                cofs = [Poly(p, n, {m: 1}) for m in monomials(n, d - k)]
                cands.append((R, cofs))
    targets = [vec(P) for P in chi.images]
    max_terms = n if max_terms is None else max_terms
    spent = 0
    for t in range(1, max_terms + 1):
        for combo in itertools.combinations(range(len(cands)), t):
            spent += 1
            if spent > budget:
                raise BudgetExceeded("finite_rank_test shape search", spent, budget)
            rows, owners = [], []
            for j in combo:
                R, cofs = cands[j]
                for mono in cofs:
                    rows.append(vec(mono * R))
                    owners.append((j, mono))
            sols = [in_span(rows, tv, p) for tv in targets]
            if any(s is None for s in sols):
                continue
            terms = []
            for j in combo:
                R, _ = cands[j]
                qimgs = []
                for sol in sols:
                    Q = Poly(p, n)
                    for c, (owner, mono) in zip(sol, owners):
                        if owner == j and c:
                            Q = Q + mono * int(c)
                    qimgs.append(Q)
                terms.append((R, qimgs))
            cert = FiniteRankCertificate(terms)
            if not cert.verify(chi):  # pragma: no cover
                raise AssertionError("finite-rank certificate failed to re-expand")
            return cert
    return None


def average_kernel_bias(chi: LinearMap, d: int) -> Fraction:
    """``E_v E_x psi(polarization of chi(v) at x)``."""
    total = Fraction(0)
    values = chi.values()
    for P in values:
        total += multilinear_bias(polarize(P, d))
    return total / len(values)


__all__ = [
    "GroupSpec", "FiltrationTag", "Cochain", "RankOracle", "DefectReport", "LinearMap",
    "FiniteRankCertificate", "coboundary", "defect", "is_approx_cocycle", "is_approx_coboundary",
    "top_degree_reduce", "finite_rank_test", "average_kernel_bias", "act", "homogenize",
    "SIGN_CONVENTION",
]
