import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from approxcoh.errors import BudgetExceeded, PreconditionError
from approxcoh.ffpoly import (
    CharacterSum,
    MultilinearForm,
    Poly,
    bias,
    delta,
    diagonal_restore,
    embed,
    eval_grid,
    monomials,
    multilinearize,
    parse_body,
    parse_poly,
    polarize,
    project,
    support_width,
    top_degree,
    translate,
)
from approxcoh.field import grid
from oracles import evaluate, points, poly_bias

PRIMES = (2, 3, 5, 7)


@st.composite
def polys(draw, primes=PRIMES, max_vars=3, max_deg=3, homogeneous=None):
    p = draw(st.sampled_from(primes))
    n = draw(st.integers(1, max_vars))
    d = homogeneous if homogeneous is not None else draw(st.integers(0, max_deg))
    monos = monomials(n, d) if homogeneous is not None else [
        m for k in range(d + 1) for m in monomials(n, k)]
    coeffs = draw(st.lists(st.integers(0, p - 1), min_size=len(monos), max_size=len(monos)))
    return Poly(p, n, dict(zip(monos, coeffs)))


def test_text_format_example():
    P = parse_poly("p=5 n=3 d=2\n3*x0^2 + 1*x0*x1 + 4*x2\n")
    assert P.coeff((2, 0, 0)) == 3 and P.coeff((1, 1, 0)) == 1 and P.coeff((0, 0, 1)) == 4
    assert P.to_text() == "p=5 n=3 d=2\n3*x0^2 + 1*x0*x1 + 4*x2\n"


@pytest.mark.parametrize("text", [
    "p=4 n=1 d=1\nx0",
    "p=5 n=1 d=1\nx0^2",
    "p=5 n=1 d=2\nx3",
    "p=5 n=1\nx0",
    "p=5 n=1 d=2\nx0**2",
    "",
])
def test_parse_rejects(text):
    with pytest.raises(PreconditionError):
        parse_poly(text)


def test_parse_accepts_minus_and_repeats():
    P = parse_body("x0*x0 - 2*x1 + x1", 5, 2)
    assert P == Poly(5, 2, {(2, 0): 1, (0, 1): 4})


@given(polys())
def test_text_roundtrip(P):
    assert parse_poly(P.to_text()) == P


@given(polys(max_vars=2), polys(max_vars=2))
def test_ring_axioms_pointwise(P, Q):
    if (P.p, P.nvars) != (Q.p, Q.nvars):
        return
    for x in points(P.p, P.nvars):
        assert (P * Q)(x) == P(x) * Q(x) % P.p
        assert (P - Q)(x) == (P(x) - Q(x)) % P.p


@given(polys())
def test_eval_grid_matches_oracle(P):
    pts = grid(P.p, P.nvars)
    vals = eval_grid(P, pts)
    terms = dict(P.items())
    assert vals.tolist() == [evaluate(terms, tuple(x), P.p) for x in pts.tolist()]


@given(polys(), st.data())
def test_translate_and_delta(P, data):
    h = tuple(data.draw(st.integers(0, P.p - 1)) for _ in range(P.nvars))
    T, D = translate(P, h), delta(P, h)
    for x in points(P.p, P.nvars):
        y = tuple((a + b) % P.p for a, b in zip(x, h))
        assert T(x) == P(y)
        assert D(x) == (P(y) - P(x)) % P.p


@given(polys(primes=(5, 7)))
def test_delta_lowers_degree(P):
    h = (1,) * P.nvars
    assert delta(P, h).degree <= max(P.degree - 1, -1)


def test_top_degree_and_projection():
    P = parse_body("x0^2 + 3*x0*x2 + x1 + 2", 5, 3)
    assert top_degree(P, 2) == parse_body("x0^2 + 3*x0*x2", 5, 3)
    assert project(P, 2) == parse_body("x0^2 + x1 + 2", 5, 2)
    assert support_width(P) == 3
    assert embed(project(P, 2), 3) == parse_body("x0^2 + x1 + 2", 5, 3)
    with pytest.raises(PreconditionError):
        top_degree(P, 1)


def test_polarization_of_square_in_char_2():
    # Delta_y Delta_x x0^2 = 2 x0 y0 vanishes mod 2; x0*x1 polarizes to the symmetric pair
    assert polarize(parse_body("x0^2", 2, 1), 2).is_zero()
    T = polarize(parse_body("x0*x1", 2, 2), 2)
    assert T.coeffs == {(0, 1): 1, (1, 0): 1}


@given(polys(primes=(5, 7), max_vars=2, homogeneous=2), st.data())
def test_polarization_is_iterated_difference(P, data):
    """T(x, y) equals Delta_y Delta_x P, a constant for degree 2."""
    T = polarize(P, 2)
    coord = st.integers(0, P.p - 1)
    x = tuple(data.draw(coord) for _ in range(P.nvars))
    y = tuple(data.draw(coord) for _ in range(P.nvars))
    dd = delta(delta(P, x), y)
    assert dd.degree <= 0
    assert T.evaluate(x, y) == dd((0,) * P.nvars)


@given(polys(primes=(5, 7), max_vars=3, homogeneous=3))
def test_multilinearize_roundtrip_cubic(P):
    T = multilinearize(P, 3)
    assert T.symmetric
    assert diagonal_restore(T) == P
    for perm in itertools.permutations(range(3)):
        assert T.permute_blocks(perm) == T


def test_multilinearize_needs_small_degree():
    with pytest.raises(PreconditionError):
        multilinearize(parse_body("x0^3", 3, 1))
    with pytest.raises(PreconditionError):
        diagonal_restore(MultilinearForm(5, 2, 2, {(0, 1): 1}))


def test_character_sum_fraction_and_value():
    s = CharacterSum(5, (3, 1, 1, 1, 1), 7)
    assert s.fraction() == Fraction(2, 7)
    assert math.isclose(s.value().real, 2 / 7, abs_tol=1e-12)
    assert CharacterSum(5, (1, 1, 0, 0, 0), 2).fraction() is None
    # Z/4: order-4 residues contribute 0, the order-2 residue contributes -1
    s4 = CharacterSum(4, (5, 2, 1, 2), 10)
    assert s4.fraction() == Fraction(5 - 1, 10)


@given(polys(max_vars=3, max_deg=3))
def test_bias_matches_direct_sum(P):
    s = bias(P)
    assert abs(s.value() - poly_bias(P)) < 1e-9


def test_bias_is_deterministic_across_workers():
    P = parse_body("x0^2*x1 + 3*x2^3 + x0*x3", 7, 4)
    assert bias(P, workers=1) == bias(P, workers=3)


def test_bias_budget():
    with pytest.raises(BudgetExceeded):
        bias(parse_body("x0", 7, 8), budget=1000)


def test_gauss_sum_frozen():
    # |E psi(x^2)| over F_p is p^{-1/2}; for p = 5, x^2 + y^2 has bias exactly 1/5
    # (sum of two Gauss sums with product (-1/5) p = p) [derived by hand]
    P = parse_body("x0^2 + x1^2", 5, 2)
    assert bias(P).fraction() == Fraction(1, 5)
