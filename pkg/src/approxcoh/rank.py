"""Schmidt rank of homogeneous polynomials, certified by subspace search.

For degree 2 and 3 every term ``l_i * R_i`` of a decomposition has a linear
factor, so the rank is the least codimension of a subspace (over the
algebraic closure) on which the polynomial vanishes identically.  We search
subspaces over F_{p^m} for ``m <= ext_degree`` and report a bracket
``lower <= rank <= upper``:

* the upper bound always carries a decomposition certificate;
* lower bounds come from facts that hold over the closure: a quadratic's
  rank is ``ceil(m/2)`` for a symmetric matrix of rank ``m`` (odd p), every
  quadratic splits over F_{p^2}, and a cubic with a linear factor over the
  closure already has one over F_{p^m} with ``m <= 3``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, PreconditionError
from .ffpoly import DEFAULT_BUDGET, MultilinearForm, Poly, bias
from .field import GF, gf, matrix_rank, rref

SUBSPACE_BUDGET = 2_000_000


# --- polynomials over F_q as plain dicts -------------------------------------


def _q_mul(a: dict, b: dict, F: GF) -> dict:
    out: dict = {}
    add, mul = F.add, F.mul
    for m1, c1 in a.items():
        row = mul[c1]
        for m2, c2 in b.items():
            m = tuple(x + y for x, y in zip(m1, m2))
            out[m] = add[out.get(m, 0)][row[c2]]
    return {m: c for m, c in out.items() if c}


def _q_axpy(acc: dict, c: int, b: dict, F: GF):
    add, row = F.add, F.mul[c]
    for m, v in b.items():
        acc[m] = add[acc.get(m, 0)][row[v]]


def _q_clean(a: dict) -> dict:
    return {m: c for m, c in a.items() if c}


def _substitute(P: dict, images: list, F: GF) -> dict:
    """Replace variable ``i`` by the linear form ``images[i]`` (a dict poly)."""
    n = len(images)
    cache: dict = {}

    def power(i, e):
        key = (i, e)
        if key not in cache:
            cache[key] = {(0,) * n: 1} if e == 0 else _q_mul(power(i, e - 1), images[i], F)
        return cache[key]

    out: dict = {}
    for mono, c in P.items():
        term = {(0,) * n: c}
        for i, e in enumerate(mono):
            if e:
                term = _q_mul(term, power(i, e), F)
        for m, v in term.items():
            out[m] = F.add[out.get(m, 0)][v]
    return _q_clean(out)


def _unit(n, i):
    return tuple(int(i == j) for j in range(n))


# --- certificates ------------------------------------------------------------


@dataclass
class RankCertificate:
    """Witness ``P = sum_i l_i * R_i`` over F_{p^m}.

    ``forms[i]`` is the coefficient row of ``l_i`` (in reduced echelon form,
    so the ``l_i`` also cut out the vanishing subspace); ``cofactors[i]``
    maps exponent tuples to F_{p^m} elements.
    """

    kind: str
    p: int
    nvars: int
    field_extension_degree: int
    forms: list
    cofactors: list

    @property
    def field(self) -> GF:
        return gf(self.p, self.field_extension_degree)

    @property
    def rank_bound(self) -> int:
        return len(self.forms)

    def expand(self) -> dict:
        F, n = self.field, self.nvars
        total: dict = {}
        for row, R in zip(self.forms, self.cofactors):
            lin = {_unit(n, j): c for j, c in enumerate(row) if c}
            _q_axpy(total, 1, _q_mul(lin, R, F), F)
        return _q_clean(total)

    def verify(self, P: Poly) -> bool:
        """Re-expand the decomposition and compare with ``P`` exactly."""
        if P.p != self.p or P.nvars != self.nvars:
            return False
        ok_degrees = all(
            any(row) and all(sum(m) >= 1 for m in R) for row, R in zip(self.forms, self.cofactors)
        )
        return ok_degrees and self.expand() == dict(P.items())

    def vanishes_on_subspace(self, P: Poly, budget: int = DEFAULT_BUDGET) -> bool:
        """Evaluate ``P`` at every F_{p^m}-point of the subspace ``l_i = 0``."""
        F, n = self.field, self.nvars
        red = np.array(self.forms, dtype=np.int64).reshape(-1, n)
        pivots = [int(np.nonzero(row)[0][0]) for row in red]
        free = [j for j in range(n) if j not in pivots]
        if F.q ** len(free) > budget:
            raise BudgetExceeded("subspace evaluation", F.q ** len(free), budget)
        for vals in itertools.product(range(F.q), repeat=len(free)):
            x = [0] * n
            for j, v in zip(free, vals):
                x[j] = v
            for row, c in zip(red, pivots):
                acc = 0
                for j in free:
                    acc = F.add[acc][F.mul[int(row[j])][x[j]]]
                x[c] = F.neg[acc]
            total = 0
            for mono, coef in P.items():
                t = coef
                for xi, e in zip(x, mono):
                    for _ in range(e):
                        t = F.mul[t][xi]
                total = F.add[total][t]
            if total:
                return False
        return True

    def to_dict(self) -> dict:
        F = self.field
        names = [f"x{j}" for j in range(self.nvars)]

        def text(poly: dict) -> str:
            if not poly:
                return "0"
            parts = []
            for mono, c in sorted(poly.items(), reverse=True):
                factors = [F.element_str(c)]
                factors += [n if e == 1 else f"{n}^{e}" for n, e in zip(names, mono) if e]
                parts.append("*".join(factors))
            return " + ".join(parts)

        return {
            "kind": self.kind,
            "field": {"p": self.p, "m": self.field_extension_degree, "modulus": list(F.modulus)},
            "header": f"p={self.p} n={self.nvars}",
            "terms": [
                {"factor": text({_unit(self.nvars, j): c for j, c in enumerate(row) if c}),
                 "cofactor": text(R)}
                for row, R in zip(self.forms, self.cofactors)
            ],
        }


@dataclass
class RankResult:
    value: int | None
    lower_bound: int
    upper_bound: int
    certificate: RankCertificate | None = None
    method: str = "subspace-search"
    searched_ext: int = 1
    ext_improved: bool = False
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.lower_bound > self.upper_bound:
            raise AssertionError(f"rank bracket inverted: {self.lower_bound} > {self.upper_bound}")
        if self.value is not None and not self.lower_bound == self.upper_bound == self.value:
            raise AssertionError("definite rank must equal both bounds")

    @property
    def exact(self) -> bool:
        return self.value is not None

    def to_dict(self) -> dict:
        return {
            "value": self.value if self.value is not None else f"unknown above {self.lower_bound - 1}",
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "method": self.method,
            "searched_ext": self.searched_ext,
            "ext_improved": self.ext_improved,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "notes": list(self.notes),
        }


# --- subspace search ----------------------------------------------------------


def count_subspaces(n: int, r: int, q: int) -> int:
    """Number of codimension-``r`` subspaces of F_q^n (Gaussian binomial)."""
    num = den = 1
    for i in range(r):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def _echelon_forms(n: int, r: int, q: int):
    """Reduced echelon ``r x n`` matrices of rank ``r``, lexicographic order."""
    for piv in itertools.combinations(range(n), r):
        slots = [(i, j) for i, c in enumerate(piv) for j in range(c + 1, n) if j not in piv]
        for vals in itertools.product(range(q), repeat=len(slots)):
            rows = [[0] * n for _ in range(r)]
            for i, c in enumerate(piv):
                rows[i][c] = 1
            for (i, j), v in zip(slots, vals):
                rows[i][j] = v
            yield piv, rows


def _vanishes(Pq: dict, piv, rows, F: GF, n: int) -> bool:
    images = [{_unit(n, j): 1} for j in range(n)]
    for c, row in zip(piv, rows):
        images[c] = {_unit(n, j): F.neg[a] for j, a in enumerate(row) if a and j != c}
    return not _substitute(Pq, images, F)


def _decompose(Pq: dict, piv, rows, F: GF, n: int) -> list:
    """Cofactors ``R_i`` with ``P = sum_i l_i R_i`` for the forms in ``rows``."""
    # y_i = l_i(x) replaces the pivot variable: x_c = y_i - sum_j a_ij x_j
    to_y = [{_unit(n, j): 1} for j in range(n)]
    back = [{_unit(n, j): 1} for j in range(n)]
    for c, row in zip(piv, rows):
        to_y[c] = {_unit(n, c): 1}
        back[c] = {_unit(n, j): a for j, a in enumerate(row) if a}
        for j, a in enumerate(row):
            if a and j != c:
                to_y[c][_unit(n, j)] = F.neg[a]
    in_y = _substitute(Pq, to_y, F)
    parts = [dict() for _ in piv]
    for mono, c in in_y.items():
        for i, col in enumerate(piv):
            if mono[col]:
                reduced = list(mono)
                reduced[col] -= 1
                parts[i][tuple(reduced)] = c
                break
        else:  # pragma: no cover - excluded by the vanishing check
            raise AssertionError("polynomial does not vanish on the subspace")
    return [_substitute(part, back, F) for part in parts]


def _search(P: Poly, r: int, m: int, budget: int):
    n = P.nvars
    F = gf(P.p, m)
    need = count_subspaces(n, r, F.q)
    if need > budget:
        raise BudgetExceeded(f"subspace search (codim {r} over F_{P.p}^{m})", need, budget)
    Pq = dict(P.items())
    for piv, rows in _echelon_forms(n, r, F.q):
        if _vanishes(Pq, piv, rows, F, n):
            cof = _decompose(Pq, piv, rows, F, n)
            return RankCertificate("decomposition", P.p, n, m, rows, cof)
    return None


def _check_form(P: Poly, degrees):
    if not P.is_zero():
        if not P.is_homogeneous:
            raise PreconditionError("rank is defined here for homogeneous polynomials")
        if P.degree < 2:
            raise PreconditionError(f"rank needs degree >= 2, got degree {P.degree}")
        if P.degree not in degrees:
            raise PreconditionError(
                f"exact rank search supports degrees {sorted(degrees)}, got {P.degree}"
            )


def quadratic_matrix(P: Poly) -> np.ndarray:
    """Symmetric matrix ``S`` with ``2 P(x) = x^T S x``."""
    n = P.nvars
    S = np.zeros((n, n), dtype=np.int64)
    for mono, c in P.items():
        idx = [i for i, e in enumerate(mono) for _ in range(e)]
        i, j = idx
        if i == j:
            S[i, i] = 2 * c % P.p
        else:
            S[i, j] = S[j, i] = c
    return S


def quadratic_rank_value(P: Poly) -> int:
    """Rank over the closure of a quadratic form in odd characteristic."""
    return (matrix_rank(quadratic_matrix(P), P.p) + 1) // 2


def quad_rank(P: Poly, certificate: bool = True, budget: int = SUBSPACE_BUDGET) -> RankResult:
    """Exact rank of a quadratic form, odd p: ``ceil(rank(S) / 2)``.

    With ``certificate=True`` a decomposition over F_{p^2} (where every
    quadratic splits) is attached.
    """
    if P.p == 2:
        raise PreconditionError("quad_rank needs odd p; use strength_rank for p = 2")
    _check_form(P, {2})
    if P.is_zero():
        cert = RankCertificate("decomposition", P.p, P.nvars, 1, [], []) if certificate else None
        return RankResult(0, 0, 0, cert, "quadratic-oracle")
    value = quadratic_rank_value(P)
    cert = None
    if certificate:
        cert = _search(P, value, 1, budget) or _search(P, value, 2, budget)
        if cert is None:  # pragma: no cover - contradicts the splitting argument
            raise AssertionError(f"no certificate of rank {value} over F_{P.p}^2 for {P}")
    return RankResult(value, value, value, cert, "quadratic-oracle", searched_ext=2 if cert and cert.field_extension_degree == 2 else 1)


def strength_rank(P: Poly, max_r: int | None = None, ext_degree: int = 2,
                  budget: int = SUBSPACE_BUDGET) -> RankResult:
    """Bracket the rank of a homogeneous quadratic or cubic by subspace search.

    Subspaces are searched over F_p first, then over F_{p^m} for
    ``m = 2..ext_degree`` only for codimensions below the best so far.
    ``max_r`` caps the searched codimension; the trivial certificate
    ``P = sum_i x_i R_i`` always bounds the rank by the number of variables.
    """
    _check_form(P, {2, 3})
    if ext_degree < 1:
        raise PreconditionError("ext_degree must be >= 1")
    n = P.nvars
    if P.is_zero():
        return RankResult(0, 0, 0, RankCertificate("decomposition", P.p, n, 1, [], []), "subspace-search")
    cap = n if max_r is None else min(max_r, n)
    best, cert, best_m1 = None, None, None
    for m in range(1, ext_degree + 1):
        limit = cap if best is None else min(cap, best - 1)
        for r in range(1, limit + 1):
            found = _search(P, r, m, budget)
            if found is not None:
                best, cert = r, found
                break
        if m == 1:
            best_m1 = best
    notes = []
    found = best
    if best is None:
        cert = _search(P, n, 1, budget)
        best = n
        notes.append(f"no vanishing subspace of codimension <= {cap}; trivial bound used")
    upper = best
    lower = 1
    d = P.degree
    if d == 2:
        if P.p != 2:
            lower = quadratic_rank_value(P)
        elif ext_degree >= 2:
            lower = upper if found is not None else cap + 1
            notes.append("quadratics split over F_p^2: search is exact")
    elif d == 3 and upper >= 2 and ext_degree >= 3 and cap >= 1:
        lower = 2
        notes.append("no linear factor over F_p^m, m <= 3: no linear factor over the closure")
    if upper == 1:
        lower = 1
    lower = min(lower, upper)
    value = upper if lower == upper else None
    return RankResult(
        value, lower, upper, cert, "subspace-search", searched_ext=ext_degree,
        ext_improved=found is not None and (best_m1 is None or found < best_m1), notes=notes,
    )


def rank(P: Poly, method: str = "auto", ext_degree: int = 2, max_r: int | None = None,
         budget: int = SUBSPACE_BUDGET) -> RankResult:
    """Dispatch to :func:`quad_rank` or :func:`strength_rank`."""
    if method not in ("auto", "quad", "subspace"):
        raise PreconditionError(f"unknown rank method {method!r}")
    if P.is_zero():
        return strength_rank(P)
    if method == "quad" or (method == "auto" and P.degree == 2 and P.p != 2 and P.is_homogeneous):
        return quad_rank(P, budget=budget)
    return strength_rank(P, max_r=max_r, ext_degree=ext_degree, budget=budget)


# --- multilinear forms -------------------------------------------------------


def multilinear_bias(T: MultilinearForm, budget: int = DEFAULT_BUDGET) -> Fraction:
    """Exact ``E psi(T)`` over the product domain; always a rational in (0, 1]."""
    value = bias(T.as_poly(), budget=budget).fraction()
    if value is None:  # pragma: no cover - scaling one block makes counts uniform
        raise AssertionError("bias of a multilinear form must be rational")
    return value


def analytic_rank(T: MultilinearForm, budget: int = DEFAULT_BUDGET) -> float:
    """``-log_p`` of the bias of ``T``."""
    b = multilinear_bias(T, budget)
    if b <= 0:  # pragma: no cover
        raise AssertionError("multilinear bias must be positive")
    return -math.log(b.numerator / b.denominator, T.p) if b != 1 else 0.0


def multilinear_rank(T: MultilinearForm, ext_degree: int = 1, max_r: int | None = None,
                     budget: int = SUBSPACE_BUDGET) -> RankResult:
    """Rank of ``T`` as a polynomial on the product space.

    Bilinear forms have rank equal to their matrix rank (for every p); the
    certificate factors the matrix through its row echelon form.
    """
    if T.d == 2:
        M = T.tensor()
        red, piv = rref(M, T.p)
        n = T.nvars
        forms, cof = [], []
        for k, c in enumerate(piv):
            row = [0] * (2 * n)
            for i in range(n):
                row[i] = int(M[i, c])
            forms.append(row)
            cof.append({_unit(2 * n, n + j): int(red[k, j]) for j in range(n) if red[k, j]})
        cert = RankCertificate("decomposition", T.p, 2 * n, 1, forms, cof)
        m = len(piv)
        return RankResult(m, m, m, cert, "quadratic-oracle")
    if T.is_zero():
        return RankResult(0, 0, 0, None, "subspace-search")
    return strength_rank(T.as_poly(), max_r=max_r, ext_degree=ext_degree, budget=budget)


def all_multilinear_forms(p: int, d: int, nvars: int):
    shape = (nvars,) * d
    size = nvars**d
    for vals in itertools.product(range(p), repeat=size):
        yield MultilinearForm.from_tensor(p, np.array(vals, dtype=np.int64).reshape(shape))


def bias_rank_constant(L: int, d: int, nvars: int, p: int, budget: int = 1 << 16,
                       ext_degree: int = 1) -> Fraction:
    """Minimum bias over all d-block forms with certified rank ``<= L``.

    An empirical lower estimate of the constant in the bias-rank bound at
    this size.  Rank certification uses an upper bound, so only forms whose
    rank is proven ``<= L`` take part.
    """
    count = p ** (nvars**d)
    if count > budget:
        raise BudgetExceeded("bias_rank_constant form enumeration", count, budget)
    best = Fraction(1)
    for T in all_multilinear_forms(p, d, nvars):
        if T.is_zero():
            continue
        res = multilinear_rank(T, ext_degree=ext_degree, max_r=max(L, 1))
        if res.upper_bound <= L:
            best = min(best, multilinear_bias(T))
    if best <= 0:  # pragma: no cover
        raise AssertionError("bias-rank constant must be positive")
    return best
