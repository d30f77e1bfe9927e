"""Inverse systems of finite sets and compatible threads through them.

A finite horizon ``N`` stands in for the infinite tower: the stable image
``Y_n`` is approximated by ``X_{N,n}``, the image of the top level in
``X_n``.  Threads are exact at the horizon.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .cohomology import Cochain, GroupSpec, LinearMap
from .corrector import HomogeneousSpace
from .errors import BudgetExceeded, EmptyLevelError, PreconditionError
from .ffpoly import embed, project, support_width
from .field import batched_rank, check_prime, digits, undigits

LEVEL_CAP = 1 << 20


@dataclass
class InverseSystem:
    """Sets ``X_0..X_N`` and maps ``f_n : X_{n+1} -> X_n`` given as index lists."""

    sets: list
    maps: list

    def __post_init__(self):
        self.sets = [list(X) for X in self.sets]
        self.maps = [[int(i) for i in f] for f in self.maps]
        if not self.sets:
            raise PreconditionError("an inverse system needs at least one level")
        if len(self.maps) != len(self.sets) - 1:
            raise PreconditionError("need exactly one map between consecutive levels")
        for n, X in enumerate(self.sets):
            if not X:
                raise EmptyLevelError(n)
        for n, f in enumerate(self.maps):
            if len(f) != len(self.sets[n + 1]):
                raise PreconditionError(f"map f_{n} is not total on X_{n + 1}")
            if any(not 0 <= i < len(self.sets[n]) for i in f):
                raise PreconditionError(f"map f_{n} leaves X_{n}")

    @property
    def depth(self) -> int:
        return len(self.sets) - 1

    def image(self, m: int, n: int) -> set:
        """Indices of ``X_{m,n}``, the image of ``X_m`` in ``X_n`` (``m >= n``)."""
        cur = set(range(len(self.sets[m])))
        for k in range(m - 1, n - 1, -1):
            f = self.maps[k]
            cur = {f[i] for i in cur}
        return cur

    def to_json(self) -> dict:
        return {"sets": self.sets, "maps": self.maps}

    @classmethod
    def from_json(cls, data) -> "InverseSystem":
        try:
            return cls(data["sets"], data["maps"])
        except (KeyError, TypeError) as exc:
            raise PreconditionError(f"malformed inverse system: {exc}") from exc


@dataclass
class CompatibleSequence:
    indices: list
    elements: list
    horizon: int

    def verify(self, system: InverseSystem) -> bool:
        return all(system.maps[n][self.indices[n + 1]] == self.indices[n]
                   for n in range(len(self.indices) - 1))

    def to_dict(self) -> dict:
        return {"indices": self.indices, "elements": self.elements, "horizon": self.horizon}


def stable_images(system: InverseSystem, check_monotone: bool = True) -> list:
    """``Y_n = X_{N,n}`` for every level, checking ``X_{m+1,n} <= X_{m,n}``."""
    N = system.depth
    if check_monotone:
        for n in range(N + 1):
            prev = None
            for m in range(n, N + 1):
                cur = system.image(m, n)
                if prev is not None and not cur <= prev:  # pragma: no cover - maps are total
                    raise AssertionError(f"image chain at level {n} is not monotone at m = {m}")
                prev = cur
    Y = [None] * (N + 1)
    Y[N] = set(range(len(system.sets[N])))
    for n in range(N - 1, -1, -1):
        f = system.maps[n]
        Y[n] = {f[i] for i in Y[n + 1]}
    return Y


def koenig_select(system: InverseSystem, check_monotone: bool = True) -> CompatibleSequence:
    """The canonically first thread through the stable images."""
    Y = stable_images(system, check_monotone)
    for n, y in enumerate(Y):
        if not y:  # pragma: no cover - impossible with total maps and non-empty sets
            raise AssertionError(f"stable image Y_{n} is empty")
    idx = [min(Y[0])]
    for n in range(system.depth):
        f = system.maps[n]
        idx.append(min(i for i in Y[n + 1] if f[i] == idx[n]))
    return CompatibleSequence(idx, [system.sets[n][i] for n, i in enumerate(idx)], system.depth)


def random_system(rng, depth: int = 12, max_size: int = 8) -> InverseSystem:
    sizes = [int(rng.integers(1, max_size + 1)) for _ in range(depth + 1)]
    sets = [list(range(k)) for k in sizes]
    maps = [[int(rng.integers(sizes[n])) for _ in range(sizes[n + 1])] for n in range(depth)]
    return InverseSystem(sets, maps)


# --- lifting corrections from finite levels --------------------------------------


@dataclass
class LiftResult:
    chi: LinearMap
    levels: list
    widths: list
    level_sizes: list
    distance: int
    horizon: int

    def to_dict(self) -> dict:
        return {
            "chi": self.chi.to_json(),
            "distance": self.distance,
            "horizon": self.horizon,
            "widths": self.widths,
            "level_sizes": self.level_sizes,
            "levels": [[P.body() for P in imgs] for imgs in self.levels],
        }


def _level_maps(P: Cochain, n: int, width: int, d: int, C: int, cap: int):
    """All linear ``psi : V_n -> M^d(width vars)`` with ``rank(P(v) - psi(v)) <= C``."""
    p, N = P.p, P.group.s
    space = HomogeneousSpace(p, width, d)
    count = space.size**n
    if count > cap:
        raise BudgetExceeded(f"level {n} candidate maps", count, cap)
    lo, hi = space.rank_table()
    if (lo != hi).any():
        raise PreconditionError("lifting needs exact rank brackets at every level")
    Vn = [tuple(int(c) for c in g) for g in itertools.product(range(p), repeat=n)]
    pad = (0,) * (N - n)
    target = np.stack([space.vector(project(P(g + pad), width)) for g in Vn])
    coords = np.array(Vn, dtype=np.int64).reshape(len(Vn), n)
    codes = digits(np.arange(count, dtype=np.int64), space.size, n)
    images = digits(codes, p, space.dim)
    chi = np.einsum("gs,ksd->kgd", coords, images) % p
    dist = hi[undigits((target[None] - chi) % p, p)].max(axis=1)
    keep = np.nonzero(dist <= C)[0]
    return space, [tuple(int(c) for c in codes[k]) for k in keep]


def lift_correction(P: Cochain, C: int, depth: int | None = None, d: int | None = None,
                    cap: int = LEVEL_CAP) -> LiftResult:
    """Thread level-wise corrections of ``P : V_N -> M^d`` into one linear map.

    ``X_n`` collects the linear ``psi : V_n -> M^d`` in the first ``l(n)``
    variables with ``rank(P(v) - psi(v)) <= C`` on ``V_n``, where ``l(n)``
    is the least width with ``P(V_n)`` inside it; ``f_n`` restricts to
    ``V_n`` and projects to ``l(n)`` variables.
    """
    if P.degree != 1 or P.action != "trivial":
        raise PreconditionError("lift_correction takes a trivial-action 1-cochain")
    N = P.group.s if depth is None else depth
    if not 0 <= N <= P.group.s:
        raise PreconditionError(f"depth must lie in [0, {P.group.s}]")
    if d is None:
        d = P.max_degree()
        if d < 0:
            raise PreconditionError("all values are zero; pass d explicitly")
    p, s = P.p, P.group.s
    widths = []
    for n in range(N + 1):
        pts = itertools.product(range(p), repeat=n)
        widths.append(max(support_width(P(tuple(g) + (0,) * (s - n))) for g in pts))
    spaces, sets = [], []
    for n in range(N + 1):
        space, maps = _level_maps(P, n, widths[n], d, C, cap)
        if not maps:
            raise EmptyLevelError(n, f"no linear map on V_{n} within rank {C} (falsifying instance)")
        spaces.append(space)
        sets.append(maps)
    links = []
    for n in range(N):
        lower = {m: i for i, m in enumerate(sets[n])}
        up, down = spaces[n + 1], spaces[n]
        f = []
        for m in sets[n + 1]:
            restricted = tuple(down.encode(project(up.decode(c), widths[n])) for c in m[:n])
            if restricted not in lower:
                raise PreconditionError(f"restriction of a level-{n + 1} map is not in X_{n}")
            f.append(lower[restricted])
        links.append(f)
    thread = koenig_select(InverseSystem(sets, links))
    nv = P.nvars
    top_space = spaces[N]
    images = [embed(top_space.decode(c), nv) for c in thread.elements[N]]
    images += [embed(top_space.decode(0), nv)] * (s - N)
    chi = LinearMap(P.group, images)
    levels = [[spaces[n].decode(c) for c in thread.elements[n]] for n in range(N + 1)]
    # the top-level map must satisfy the level condition on every V_n
    dist = 0
    for n in range(N + 1):
        space = spaces[n]
        for g in itertools.product(range(p), repeat=n):
            v = tuple(g) + (0,) * (s - n)
            res = project(P(v) - chi(v), widths[n])
            dist = max(dist, space.bracket(space.encode(res))[1])
    if dist > C:  # pragma: no cover
        raise AssertionError(f"lifted map violates the level condition ({dist} > {C})")
    return LiftResult(chi, levels, widths, [len(X) for X in sets], dist, N)


# --- compatible homomorphism families ---------------------------------------------


@dataclass
class HomFamily:
    """``chi_n(e_i)`` as ``n x n`` matrices, one list per level ``n = 1..N``."""

    p: int
    levels: list
    level_sizes: list

    def restrict(self, n: int) -> list:
        return [M[:n, :n] % self.p for M in self.levels[n][:n]]

    def to_dict(self) -> dict:
        return {"p": self.p, "level_sizes": self.level_sizes,
                "levels": [[M.tolist() for M in imgs] for imgs in self.levels]}


def _gamma_points(p, n):
    return np.array(list(itertools.product(range(p), repeat=n)), dtype=np.int64).reshape(-1, n)


def hom_compat_harness(a, p: int, C: int, depth: int, cap: int = LEVEL_CAP) -> HomFamily:
    """Compatible homomorphisms ``chi_n : F_p^n -> Mat_n`` close to ``a`` in rank.

    ``a`` maps a point of ``Gamma_N = F_p^N`` (a tuple) to an ``N x N``
    matrix.  Level ``n`` keeps the homomorphisms with
    ``rank(beta_n a(g) i_n - chi_n(g)) <= C`` for ``g`` in ``Gamma_n``,
    i.e. on the top-left ``n x n`` blocks.  Levels are built by extending
    every element of the level below; ``q_n`` restricts to ``Gamma_n`` and
    truncates to the ``n x n`` block.  Level 0 is the single empty map.
    """
    p = check_prime(p)
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    table = {}
    for g in itertools.product(range(p), repeat=depth):
        M = np.asarray(a(g), dtype=np.int64) % p
        if M.shape != (depth, depth):
            raise PreconditionError(f"a(g) must be a {depth}x{depth} matrix")
        table[g] = M
    levels = [np.zeros((1, 0, 0, 0), dtype=np.int64)]  # (count, n images, n, n)
    for n in range(1, depth + 1):
        parents = levels[-1]
        k = parents.shape[0]
        fresh = n * n + (n - 1) * (2 * n - 1)  # new image plus new border of the old ones
        count = k * p**fresh
        if count > cap:
            raise BudgetExceeded(f"level {n} extensions", count, cap)
        ext = digits(np.arange(p**fresh, dtype=np.int64), p, fresh)
        cand = np.zeros((k, p**fresh, n, n, n), dtype=np.int64)
        cand[:, :, : n - 1, : n - 1, : n - 1] = parents[:, None]
        pos = 0
        for i in range(n - 1):
            border = [(r, n - 1) for r in range(n)] + [(n - 1, c) for c in range(n - 1)]
            for (r, c) in border:
                cand[:, :, i, r, c] = ext[None, :, pos]
                pos += 1
        cand[:, :, n - 1] = ext[:, pos:].reshape(1, -1, n, n)
        cand = cand.reshape(-1, n, n, n)
        pts = _gamma_points(p, n)
        chi = np.einsum("gi,kirc->kgrc", pts, cand) % p
        target = np.stack([table[tuple(g) + (0,) * (depth - n)][:n, :n] for g in pts.tolist()])
        ranks = batched_rank((target[None] - chi) % p, p)
        keep = cand[ranks.max(axis=1) <= C]
        if keep.shape[0] == 0:
            raise EmptyLevelError(n, f"no homomorphism on Gamma_{n} within rank {C}")
        levels.append(keep)
    sets = [[tuple(x.ravel().tolist()) for x in L] for L in levels]
    links = []
    for n in range(depth):
        lower = {x: i for i, x in enumerate(sets[n])}
        f = []
        for x in levels[n + 1]:
            key = tuple(x[:n, :n, :n].ravel().tolist())
            f.append(lower[key])
        links.append(f)
    thread = koenig_select(InverseSystem(sets, links))
    fam = [[levels[n][thread.indices[n]][i] for i in range(n)] for n in range(depth + 1)]
    return HomFamily(p, fam, [len(S) for S in sets])
