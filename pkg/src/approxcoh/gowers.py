"""Exact Gowers uniformity norms of phase functions.

A phase ``f = psi(F)`` is given either by a polynomial carrier ``F`` over
F_p or by an explicit table of values in Z/p^k.  All norms are computed from
integer residue counts of the iterated difference over the full domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, PreconditionError
from .ffpoly import (
    DEFAULT_BUDGET,
    CharacterSum,
    Poly,
    bias,
    counts_of,
    delta,
    eval_grid,
    polarize,
)
from .field import addition_table, check_prime, grid


@dataclass(frozen=True)
class PhaseFunction:
    """``x -> exp(2 pi i F(x) / p^k)`` on F_p^n."""

    p: int
    nvars: int
    k: int = 1
    carrier: Poly | None = None
    table: np.ndarray | None = None

    def __post_init__(self):
        check_prime(self.p)
        if (self.carrier is None) == (self.table is None):
            raise PreconditionError("give exactly one of carrier / table")
        if self.carrier is not None:
            if self.k != 1:
                raise PreconditionError("polynomial carriers take values in F_p (k = 1)")
            if self.carrier.p != self.p or self.carrier.nvars != self.nvars:
                raise PreconditionError("carrier does not match the phase domain")
        else:
            tab = np.asarray(self.table, dtype=np.int64)
            if tab.shape != (self.p**self.nvars,):
                raise PreconditionError(
                    f"table must have p^n = {self.p ** self.nvars} entries, got {tab.shape}"
                )
            object.__setattr__(self, "table", tab % self.modulus)

    @classmethod
    def from_poly(cls, F: Poly):
        return cls(F.p, F.nvars, 1, carrier=F)

    @classmethod
    def from_table(cls, p, nvars, values, k=1):
        return cls(p, nvars, k, table=np.asarray(values))

    @property
    def modulus(self) -> int:
        return self.p**self.k

    def values(self, budget: int = DEFAULT_BUDGET) -> np.ndarray:
        if self.table is not None:
            return self.table
        size = self.p**self.nvars
        if size > budget:
            raise BudgetExceeded("phase table", size, budget)
        return eval_grid(self.carrier, grid(self.p, self.nvars))


@dataclass(frozen=True)
class GowersResult:
    m: int
    value: float
    raw_power: Fraction | None
    raw_power_real: float
    counts: CharacterSum
    algorithm: str

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "value": self.value,
            "raw_power": str(self.raw_power) if self.raw_power is not None else None,
            "raw_power_real": self.raw_power_real,
            "counts": list(self.counts.counts),
            "total": self.counts.total,
            "algorithm": self.algorithm,
        }


def _result(counts: CharacterSum, m: int, algorithm: str) -> GowersResult:
    if not counts.is_real():
        raise AssertionError("Gowers counts must be symmetric under negation")
    raw = counts.fraction()
    real = float(raw) if raw is not None else counts.value().real
    if real < -1e-9:
        raise AssertionError(f"negative Gowers power {real}")
    if raw is not None and raw == 1:
        value = 1.0
    else:
        value = max(real, 0.0) ** (1.0 / 2**m)
    return GowersResult(m, value, raw, real, counts, algorithm)


def _naive_counts(f: PhaseFunction, m: int, budget: int) -> CharacterSum:
    p, n, q = f.p, f.nvars, f.modulus
    size = p**n
    need = size ** (m + 1)
    if need > budget:
        raise BudgetExceeded("naive Gowers enumeration", need, budget)
    add = addition_table(p, n)
    g = f.values(budget).reshape(size, 1)  # axes: (v, v_1..v_k flattened)
    for _ in range(m):
        shifted = g[add]  # [v, h, rest] = g[v + h, rest]
        g = (shifted - g[:, None, :]) % q
        g = g.transpose(0, 2, 1).reshape(size, -1)
    return counts_of(g, q)


def _derivative_counts(F: Poly, m: int, budget: int) -> CharacterSum:
    p, n = F.p, F.nvars
    size = p**n
    if size ** m > budget or size > budget:
        raise BudgetExceeded("derivative Gowers enumeration", size**m, budget)
    points = [tuple(int(c) for c in row) for row in grid(p, n)]
    step_memo: dict = {}
    bias_memo: dict = {}
    total = CharacterSum(p, (0,) * p, 0)

    def step(P, h):
        key = (P.key(), h)
        if key not in step_memo:
            step_memo[key] = delta(P, h)
        return step_memo[key]

    frontier = {(): F}
    for _ in range(m):
        frontier = {dirs + (h,): step(P, h) for dirs, P in frontier.items() for h in points}
    for P in frontier.values():
        key = P.key()
        if key not in bias_memo:
            bias_memo[key] = bias(P, budget=budget)
        total = total + bias_memo[key]
    return total


class CyclotomicValue:
    """An exact element ``sum_j c_j zeta^j`` of Q(zeta_q), q a prime power.

    Stored reduced modulo the cyclotomic polynomial, so equality is exact.
    """

    def __init__(self, q: int, coeffs):
        self.q = q
        self.p = _prime_of(q)
        self.phi = q - q // self.p
        self.coeffs = _reduce_cyclotomic([Fraction(c) for c in coeffs], q, self.p)

    @classmethod
    def from_counts(cls, counts: CharacterSum) -> "CyclotomicValue":
        return cls(counts.q, [Fraction(c, counts.total) for c in counts.counts])

    def __sub__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + [Fraction(0)] * (n - len(self.coeffs))
        b = other.coeffs + [Fraction(0)] * (n - len(other.coeffs))
        return CyclotomicValue(self.q, [x - y for x, y in zip(a, b)])

    def __mul__(self, other):
        out = [Fraction(0)] * self.q
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        out[(i + j) % self.q] += a * b
        return CyclotomicValue(self.q, out)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __complex__(self):
        return complex(sum(float(c) * np.exp(2j * np.pi * k / self.q) for k, c in enumerate(self.coeffs)))


def _prime_of(q):
    for k in range(2, q + 1):
        if q % k == 0:
            return k
    raise PreconditionError("modulus must be >= 2")


def _reduce_cyclotomic(coeffs, q, p):
    # Phi_q(x) = sum_{j<p} x^{j q/p}; x^k with k >= phi(q) is rewritten via x^{(p-1) q/p}
    step = q // p
    phi = q - step
    coeffs = coeffs + [Fraction(0)] * max(0, q - len(coeffs))
    for k in range(len(coeffs) - 1, phi - 1, -1):
        c = coeffs[k]
        if c:
            coeffs[k] = Fraction(0)
            base = k - (p - 1) * step
            for j in range(p - 1):
                coeffs[base + j * step] -= c
    return coeffs[:phi]


def norm_leq(a: GowersResult, b: GowersResult, margin: float = 1e-9) -> bool:
    """Exact test of ``||f||_{U^m} <= ||g||_{U^{m+1}}`` for ``a`` at m, ``b`` at m + 1.

    Compares ``raw_a^2`` with ``raw_b`` in Q(zeta_q): equality is decided
    algebraically; a nonzero difference takes its sign from a floating
    evaluation, which must clear ``margin``.
    """
    if b.m != a.m + 1:
        raise PreconditionError("norm_leq compares consecutive orders")
    if a.raw_power is not None and b.raw_power is not None:
        return a.raw_power**2 <= b.raw_power
    x = CyclotomicValue.from_counts(a.counts)
    diff = CyclotomicValue.from_counts(b.counts) - x * x
    if diff.is_zero():
        return True
    val = complex(diff).real
    if abs(val) < margin:  # pragma: no cover - never seen at tested sizes
        raise AssertionError(f"nonzero cyclotomic difference {val} below float margin")
    return val > 0


def gowers_norm(f, m: int, algorithm: str = "naive", budget: int = 10**8) -> GowersResult:
    """The ``U^m`` norm of a phase (a :class:`PhaseFunction` or a :class:`Poly`)."""
    if isinstance(f, Poly):
        f = PhaseFunction.from_poly(f)
    if m < 1:
        raise PreconditionError("Gowers norms need m >= 1")
    if algorithm == "naive":
        counts = _naive_counts(f, m, budget)
    elif algorithm == "derivative":
        if f.carrier is None:
            raise PreconditionError("the derivative algorithm needs a polynomial carrier")
        counts = _derivative_counts(f.carrier, m, budget)
    else:
        raise PreconditionError(f"unknown algorithm {algorithm!r}")
    return _result(counts, m, algorithm)


def iterated_delta(f, dirs) -> PhaseFunction:
    """``Delta_{h_k} ... Delta_{h_1} F`` (symbolic for polynomial carriers)."""
    if isinstance(f, Poly):
        f = PhaseFunction.from_poly(f)
    dirs = [tuple(int(c) for c in h) for h in dirs]
    for h in dirs:
        if len(h) != f.nvars or any(not 0 <= c < f.p for c in h):
            raise PreconditionError(f"direction {h} is not a point of F_{f.p}^{f.nvars}")
    if f.carrier is not None:
        P = f.carrier
        for h in dirs:
            P = delta(P, h)
        return PhaseFunction.from_poly(P)
    add = addition_table(f.p, f.nvars)
    tab = f.table
    idx = np.arange(f.p**f.nvars)
    for h in dirs:
        j = int(np.ravel_multi_index(h, (f.p,) * f.nvars))
        tab = (tab[add[idx, j]] - tab) % f.modulus
    return PhaseFunction(f.p, f.nvars, f.k, table=tab)


def delta_degree(f, max_d: int, budget: int = 10**8) -> int | None:
    """Least ``d`` such that every ``(d+1)``-fold difference vanishes, or ``None``.

    Works on tables into Z/p^k, so nonclassical polynomials get their true
    degree.  Each level keeps only the distinct nonzero difference functions.
    """
    if isinstance(f, Poly):
        f = PhaseFunction.from_poly(f)
    size = f.p**f.nvars
    q = f.modulus
    add = addition_table(f.p, f.nvars)
    funcs = np.unique(f.values(budget).reshape(1, size), axis=0)
    for d in range(max_d + 1):
        if funcs.shape[0] * size * size > budget:
            raise BudgetExceeded("delta_degree level", funcs.shape[0] * size * size, budget)
        # diffs[g, h, x] = g[x + h] - g[x]
        diffs = (funcs[:, add.T] - funcs[:, None, :]) % q
        diffs = diffs.reshape(-1, size)
        nonzero = diffs[diffs.any(axis=1)]
        if nonzero.shape[0] == 0:
            return d
        funcs = np.unique(nonzero, axis=0)
    return None


def cocycle_phase(values, s: int, d: int, budget: int = DEFAULT_BUDGET) -> PhaseFunction:
    """Phase of ``(v, x_1..x_d) -> polarization of A(v) at (x_1..x_d)``.

    ``values`` lists ``A(v)`` for the points ``v`` of F_p^s in lexicographic
    order (a :class:`~approxcoh.cohomology.Cochain` of degree 1 works too).
    The domain V x W^d is flattened as ``[v, x_1, ..., x_d]``.
    """
    values = list(getattr(values, "values", values))
    if not values:
        raise PreconditionError("empty cochain")
    p, nvars = values[0].p, values[0].nvars
    if len(values) != p**s:
        raise PreconditionError(f"cochain must have p^s = {p ** s} values")
    inner = p ** (d * nvars)
    if inner * len(values) > budget:
        raise BudgetExceeded("cocycle phase table", inner * len(values), budget)
    pts = grid(p, d * nvars)
    table = np.concatenate([eval_grid(polarize(A, d).as_poly(), pts) for A in values])
    return PhaseFunction(p, s + d * nvars, 1, table=table)
