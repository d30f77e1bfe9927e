import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from approxcoh.errors import BudgetExceeded, PreconditionError
from approxcoh.ffpoly import MultilinearForm, Poly, monomials, parse_body, project
from approxcoh.rank import (
    analytic_rank,
    bias_rank_constant,
    count_subspaces,
    multilinear_bias,
    multilinear_rank,
    quad_rank,
    rank,
    strength_rank,
)
from oracles import bilinear_bias, points, rank_mod_p


def homogeneous(p, n, d, coeffs):
    return Poly(p, n, dict(zip(monomials(n, d), coeffs)))


@st.composite
def forms(draw, primes=(2, 3, 5), degrees=(2, 3), max_vars=3):
    p = draw(st.sampled_from(primes))
    d = draw(st.sampled_from(degrees))
    n = draw(st.integers(1, max_vars if d == 2 else 2))
    k = len(monomials(n, d))
    return homogeneous(p, n, d, draw(st.lists(st.integers(0, p - 1), min_size=k, max_size=k)))


def linear_product_exists(P):
    """Brute force: is P = l1 * l2 for linear forms over F_p?"""
    n, p = P.nvars, P.p
    for a in points(p, n):
        for b in points(p, n):
            l1 = Poly(p, n, {tuple(int(i == j) for j in range(n)): c for i, c in enumerate(a)})
            l2 = Poly(p, n, {tuple(int(i == j) for j in range(n)): c for i, c in enumerate(b)})
            if l1 * l2 == P:
                return True
    return False


# frozen values; each comment names the independent argument
@pytest.mark.parametrize("body,p,n,expected,ext", [
    ("x0*x1", 5, 2, 1, 2),                    # visibly a product
    ("x0^2 + x1^2", 3, 2, 1, 2),              # splits over F_9 since -1 is a square there
    ("x0*x1 + x2*x3", 5, 4, 2, 2),            # symmetric matrix of rank 4
    ("x0*x1 + x2*x3", 2, 4, 2, 2),            # Arf-type form; any isotropic space has codim 2
    ("x0^2 + x0*x1 + x1^2", 2, 2, 1, 2),      # splits over F_4
    ("x0*x1*x2", 5, 3, 1, 1),                 # visibly a product
    ("x0^3 + x1^3 + x2^3", 5, 3, 2, 3),       # smooth plane cubic: no line, has a point
])
def test_frozen_ranks(body, p, n, expected, ext):
    P = parse_body(body, p, n)
    res = rank(P, ext_degree=ext)
    assert res.exact and res.value == expected
    assert res.certificate.verify(P)
    assert res.certificate.vanishes_on_subspace(P)


def test_quadratic_needs_extension_for_certificate():
    P = parse_body("x0^2 + x1^2", 3, 2)
    res = quad_rank(P)
    assert res.certificate.field_extension_degree == 2
    only_base = strength_rank(P, ext_degree=1)
    assert only_base.upper_bound == 2 and only_base.lower_bound == 1
    assert strength_rank(P, ext_degree=2).ext_improved


def test_cubic_bracket_without_enough_extension():
    P = parse_body("x0^3 + x1^3 + x2^3", 5, 3)
    res = strength_rank(P, ext_degree=1)
    assert (res.lower_bound, res.upper_bound) == (1, 2) and not res.exact
    assert res.to_dict()["value"] == "unknown above 0"


def test_zero_and_preconditions():
    assert rank(Poly(5, 3)).value == 0
    with pytest.raises(PreconditionError):
        rank(parse_body("x0^2 + x1", 5, 2))
    with pytest.raises(PreconditionError):
        rank(parse_body("x0", 5, 2))
    with pytest.raises(PreconditionError):
        rank(parse_body("x0^4", 5, 2))
    with pytest.raises(PreconditionError):
        quad_rank(parse_body("x0*x1", 2, 2))


def test_budget_is_enforced():
    P = homogeneous(7, 5, 3, [1] * len(monomials(5, 3)))
    with pytest.raises(BudgetExceeded):
        strength_rank(P, ext_degree=3, budget=1000)


def test_count_subspaces_against_enumeration():
    for n, r, q in [(3, 1, 2), (3, 2, 2), (4, 2, 2), (3, 1, 3)]:
        spans = set()
        for rows in itertools.product(points(q, n), repeat=r):
            if rank_mod_p([list(x) for x in rows], q) == r:
                span = frozenset(
                    tuple(sum(c * row[j] for c, row in zip(cs, rows)) % q for j in range(n))
                    for cs in points(q, r))
                spans.add(span)
        assert count_subspaces(n, r, q) == len(spans)


@given(forms())
def test_bracket_is_consistent_and_certified(P):
    res = rank(P, ext_degree=3 if P.degree == 3 else 2)
    assert res.lower_bound <= res.upper_bound <= max(P.nvars, 0)
    if not P.is_zero():
        assert res.certificate.verify(P)
        assert res.certificate.rank_bound == res.upper_bound


@given(forms(degrees=(2,), max_vars=2))
def test_rank_one_over_base_field_matches_factor_oracle(P):
    if P.is_zero():
        return
    base = strength_rank(P, ext_degree=1, max_r=1)
    assert (base.upper_bound == 1) == linear_product_exists(P)


@given(forms(primes=(3, 5), degrees=(2,)), st.data())
def test_rank_invariant_under_change_of_variables(P, data):
    n, p = P.nvars, P.p
    while True:
        M = [[data.draw(st.integers(0, p - 1)) for _ in range(n)] for _ in range(n)]
        if rank_mod_p(M, p) == n:
            break
    images = [Poly(p, n, {tuple(int(i == j) for j in range(n)): M[k][i] for i in range(n)})
              for k in range(n)]
    Q = Poly(p, n)
    for mono, c in P.items():
        term = Poly.constant(p, n, c)
        for k, e in enumerate(mono):
            term = term * images[k] ** e
        Q = Q + term
    assert quad_rank(Q, certificate=False).value == quad_rank(P, certificate=False).value


@given(forms(primes=(3, 5), degrees=(2, 3)))
def test_projection_does_not_increase_rank(P):
    ext = 3 if P.degree == 3 else 2
    full = rank(P, ext_degree=ext)
    for l in range(P.nvars + 1):
        Q = project(P, l)
        if Q.is_zero():
            continue
        sub = rank(Q, ext_degree=ext)
        assert sub.lower_bound <= full.upper_bound


@given(st.sampled_from((2, 3, 5)), st.integers(1, 2), st.data())
def test_bilinear_bias_is_p_to_minus_rank(p, n, data):
    M = [[data.draw(st.integers(0, p - 1)) for _ in range(n)] for _ in range(n)]
    T = MultilinearForm.from_tensor(p, np.array(M))
    m = rank_mod_p(M, p)
    assert multilinear_bias(T) == Fraction(1, p**m) == bilinear_bias(M, p)
    assert multilinear_rank(T).value == m
    assert abs(analytic_rank(T) - m) < 1e-12


def test_multilinear_rank_certificate():
    T = MultilinearForm.from_tensor(3, np.array([[1, 2], [0, 1]]))
    res = multilinear_rank(T)
    assert res.value == 2 and res.certificate.verify(T.as_poly())


def test_bias_rank_constant_positive():
    c = bias_rank_constant(1, 3, 1, 2)
    assert c > 0
    assert bias_rank_constant(2, 2, 2, 3) == Fraction(1, 9)
