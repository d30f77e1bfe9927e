import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxcoh.cohomology import Cochain, GroupSpec, LinearMap
from approxcoh.corrector import minimax_correct
from approxcoh.errors import EmptyLevelError, PreconditionError
from approxcoh.ffpoly import Poly, parse_body
from approxcoh.limits import (
    InverseSystem,
    hom_compat_harness,
    koenig_select,
    lift_correction,
    random_system,
    stable_images,
)

from oracles import rank_mod_p


def brute_first_thread(system):
    """Lexicographically least full-length thread, by enumeration."""
    best = None
    for idx in itertools.product(*[range(len(X)) for X in system.sets]):
        if all(system.maps[n][idx[n + 1]] == idx[n] for n in range(system.depth)):
            if best is None or idx < best:
                best = idx
    return list(best)


@st.composite
def systems(draw, depth=4, max_size=3):
    sizes = [draw(st.integers(1, max_size)) for _ in range(depth + 1)]
    maps = [[draw(st.integers(0, sizes[n] - 1)) for _ in range(sizes[n + 1])] for n in range(depth)]
    return InverseSystem([list(range(k)) for k in sizes], maps)


@given(systems())
def test_koenig_matches_brute_force(system):
    thread = koenig_select(system)
    assert thread.verify(system)
    assert thread.indices == brute_first_thread(system)


@given(systems())
def test_stable_images_are_thread_projections(system):
    Y = stable_images(system)
    threads = [idx for idx in itertools.product(*[range(len(X)) for X in system.sets])
               if all(system.maps[n][idx[n + 1]] == idx[n] for n in range(system.depth))]
    for n in range(system.depth + 1):
        assert Y[n] == {t[n] for t in threads}
        for m in range(n, system.depth):
            assert system.image(m + 1, n) <= system.image(m, n)


def test_koenig_singletons_and_constant_maps():
    single = InverseSystem([["a"], ["b"], ["c"]], [[0], [0]])
    assert koenig_select(single).elements == ["a", "b", "c"]
    const = InverseSystem([[0, 1, 2], [0, 1], [0, 1, 2]], [[2, 2], [1, 1, 1]])
    t = koenig_select(const)
    assert t.indices == [2, 1, 0] and t.verify(const)


def test_random_systems_and_json():
    rng = np.random.default_rng(0)
    for _ in range(200):
        S = random_system(rng, depth=12, max_size=8)
        assert koenig_select(S).verify(S)
        assert InverseSystem.from_json(S.to_json()) == S


def test_system_validation():
    with pytest.raises(EmptyLevelError):
        InverseSystem([[0], []], [[]])
    with pytest.raises(PreconditionError):
        InverseSystem([[0], [0, 1]], [[0]])
    with pytest.raises(PreconditionError):
        InverseSystem([[0], [0]], [[3]])
    with pytest.raises(PreconditionError):
        InverseSystem.from_json({"sets": [[0]]})


# --- lifting ------------------------------------------------------------------------


def test_lift_homomorphism_is_exact():
    G = GroupSpec(2, 2)
    x = [Poly.var(2, 3, i) for i in range(3)]
    chi = LinearMap(G, [x[0] * x[1], x[2] * x[2]])
    res = lift_correction(chi.as_cochain(), 0)
    assert res.distance == 0
    assert res.chi.values() == chi.values()


def test_lift_depth_zero():
    G = GroupSpec(2, 1)
    P = Cochain(G, 1, [Poly(2, 2), parse_body("x0*x1", 2, 2)])
    res = lift_correction(P, 1, depth=0)
    assert res.horizon == 0 and res.level_sizes == [1]


def test_lift_constant_noise_matches_minimax():
    G = GroupSpec(2, 2)
    x = [Poly.var(2, 3, i) for i in range(3)]
    Q = x[0] * x[1] + x[2] * x[2]
    base = LinearMap(G, [x[0] * x[0], x[1] * x[2]]).values()
    P = Cochain(G, 1, [b + Q for b in base])
    best = minimax_correct(P, 2).distance
    with pytest.raises(EmptyLevelError):
        lift_correction(P, best - 1)
    res = lift_correction(P, best)
    assert res.distance <= best


def test_lift_restriction_property():
    G = GroupSpec(2, 2)
    x = [Poly.var(2, 3, i) for i in range(3)]
    vals = [Poly(2, 3), x[0] * x[1], x[1] * x[2] + x[0] * x[0], x[2] * x[2]]
    P = Cochain(G, 1, vals)
    res = lift_correction(P, 2)
    top = res.levels[-1]
    for n, imgs in enumerate(res.levels):
        assert len(imgs) == n
        for P_low, P_top in zip(imgs, top):
            # lower level images are the top images cut down to the level's width
            assert P_low.nvars == res.widths[n]
            assert all(c == P_top.coeff(m + (0,) * (P_top.nvars - len(m))) for m, c in P_low.items())


def test_lift_rejects_wrong_input():
    G = GroupSpec(2, 1)
    with pytest.raises(PreconditionError):
        lift_correction(Cochain(G, 1, [Poly(2, 1)] * 2, "translation"), 1)
    with pytest.raises(PreconditionError):
        lift_correction(Cochain(G, 1, [Poly(2, 1)] * 2), 1, depth=3)


# --- compatible homomorphisms ---------------------------------------------------------


def test_harness_exact_homomorphism():
    p, N = 2, 2
    B = [np.array([[1, 0], [1, 1]]), np.array([[0, 1], [0, 0]])]

    def a(g):
        return sum(gi * Bi for gi, Bi in zip(g, B)) % p

    fam = hom_compat_harness(a, p, 0, N)
    assert fam.level_sizes[-1] >= 1
    for i in range(N):
        assert (fam.levels[N][i] % p == B[i]).all()


def test_harness_compatibility_and_closeness():
    p, N, C = 2, 2, 1

    def a(g):
        return np.array([[g[0] * g[1], g[0]], [g[1], 1]])

    fam = hom_compat_harness(a, p, C, N)
    for n in range(1, N + 1):
        imgs = fam.levels[n]
        # compatible: the level-n family truncates the level-(n+1) one
        if n < N:
            for i in range(n):
                assert (fam.levels[n + 1][i][:n, :n] == imgs[i]).all()
        for g in itertools.product(range(p), repeat=n):
            M = np.asarray(a(tuple(g) + (0,) * (N - n)))[:n, :n]
            chi = sum(gi * imgs[i] for i, gi in enumerate(g)) % p if n else 0
            assert rank_mod_p(((M - chi) % p).tolist(), p) <= C


def test_harness_empty_level():
    def a(g):
        return np.array([[1, 0], [0, 1]])

    with pytest.raises(EmptyLevelError) as info:
        hom_compat_harness(a, 2, 0, 2)
    assert info.value.level == 1
