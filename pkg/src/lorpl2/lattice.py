"""Balanced anti-diagonal ordering of two-variable Laurent monomials.

The exponent sequence alternates 0, 1, -1, 2, -2, ... in each variable;
monomials x^{c_m} y^{c_n} are swept by anti-diagonals m+n = const, so level n
contributes the n+1 new monomials (c_{n-t}, c_t), t = 0..n.  Everything here
is exact integer combinatorics: index maps, the level basis vectors, the 0/1
structural matrices of multiplication by x+1/x and y+1/y, and the
product-factorization of low-level monomials into a pair with level bounds
(p-1, p).
"""

from typing import NamedTuple

import numpy as np


class MonomialIndex(NamedTuple):
    """Laurent monomial x^i y^j addressed by its integer exponents."""

    i: int
    j: int

    def __mul__(self, other):
        return MonomialIndex(self.i + other.i, self.j + other.j)


class LevelBasis(NamedTuple):
    """The n+1 new monomials at level n, in anti-diagonal order."""

    n: int
    entries: tuple


class StructMatrix(NamedTuple):
    """0/1 block mapping level-n components to level-s components under t+1/t."""

    n: int
    s: int
    axis: int
    data: np.ndarray


def c_seq(n):
    """Alternating exponent sequence 0, 1, -1, 2, -2, ... at index n >= 0."""
    if n < 0:
        raise ValueError("c_seq requires n >= 0")
    return (-1) ** (n + 1) * ((n + 1) // 2)


def inv_c(e):
    """Unique n with c_seq(n) == e: n = 2e-1 for e > 0, n = -2e otherwise."""
    return 2 * e - 1 if e > 0 else -2 * e


def level(m):
    """Anti-diagonal level of a monomial: inv_c(i) + inv_c(j)."""
    return inv_c(m[0]) + inv_c(m[1])


def position(m):
    """Row index of the monomial within its anti-diagonal (= inv_c(j))."""
    return inv_c(m[1])


def lattice_dim(n):
    """Number of monomials of level <= n."""
    return (n + 1) * (n + 2) // 2


def level_basis(n):
    """Basis vector of level n: entries[t] = (c_{n-t}, c_t)."""
    if n < 0:
        raise ValueError("level must be >= 0")
    return LevelBasis(n, tuple(MonomialIndex(c_seq(n - t), c_seq(t)) for t in range(n + 1)))


def global_index(m):
    """0-based position of a monomial in the anti-diagonal sweep."""
    n = level(m)
    return n * (n + 1) // 2 + position(m)


def monomial_at(r):
    """Inverse of global_index."""
    n = 0
    while lattice_dim(n) <= r:
        n += 1
    t = r - n * (n + 1) // 2
    return MonomialIndex(c_seq(n - t), c_seq(t))


def lattice_monomials(N):
    """All monomials of level <= N in global order."""
    out = []
    for n in range(N + 1):
        out.extend(level_basis(n).entries)
    return out


def axis_shift_targets(m, axis):
    """The two monomials produced by (x+1/x) (axis 1) or (y+1/y) (axis 2)."""
    i, j = m
    if axis == 1:
        return MonomialIndex(i + 1, j), MonomialIndex(i - 1, j)
    if axis == 2:
        return MonomialIndex(i, j + 1), MonomialIndex(i, j - 1)
    raise ValueError("axis must be 1 or 2")


def struct_matrices(n, axis):
    """Blocks B_{s,axis}^{(n)} for s in {n-2, n-1, n+1, n+2} (s >= 0 only).

    Built by symbolic multiplication of the level basis: each component of
    (t+1/t) phi_n is exactly two monomials, each landing in one of the four
    neighbouring levels.  Returns a dict keyed by s.
    """
    basis = level_basis(n)
    valid = [s for s in (n - 2, n - 1, n + 1, n + 2) if s >= 0]
    mats = {s: np.zeros((n + 1, s + 1), dtype=np.int64) for s in valid}
    for t, m in enumerate(basis.entries):
        for target in axis_shift_targets(m, axis):
            s = level(target)
            if s not in mats:
                raise AssertionError(f"target level {s} outside n+-2 band")
            mats[s][t, position(target)] += 1
    return {s: StructMatrix(n, s, axis, mats[s]) for s in valid}


def c_additivity_check(s, t):
    """Verify the additivity identities of the c sequence at (s, t).

    Checks c_{2s}+c_{2t} = c_{2(s+t)}; for s,t >= 1 also
    c_{2s-1}+c_{2t-1} = c_{2(s+t)-1}; for t >= 1 also the mixed identity
    c_{2s}+c_{2t-1} = c_{2(t-s)-1} (t > s) or c_{2(s-t)} (t <= s).
    """
    if s < 0 or t < 0:
        raise ValueError("s, t must be nonnegative")
    ok = c_seq(2 * s) + c_seq(2 * t) == c_seq(2 * (s + t))
    if s >= 1 and t >= 1:
        ok = ok and c_seq(2 * s - 1) + c_seq(2 * t - 1) == c_seq(2 * (s + t) - 1)
    if t >= 1:
        lhs = c_seq(2 * s) + c_seq(2 * t - 1)
        if t - s > 0:
            ok = ok and lhs == c_seq(2 * (t - s) - 1)
        else:
            ok = ok and lhs == c_seq(2 * (s - t))
    return ok


def _swap(m):
    return MonomialIndex(m[1], m[0])


def _factor_top(m, p):
    """Constructive split for level(m) in {2p-2, 2p-1} (first-half positions)."""
    s = level(m)
    t = position(m)
    if 2 * t > s:
        a, b = _factor_top(_swap(m), p)
        return _swap(a), _swap(b)
    nu = t // 2
    if s == 2 * p - 1:
        if p % 2 == 0:
            k = p // 2
            if t % 2 == 0:
                l1 = MonomialIndex(c_seq(2 * k - 1), 0)
                l2 = MonomialIndex(c_seq(2 * (k - nu) - 1), c_seq(2 * nu))
            else:
                l1 = MonomialIndex(c_seq(2 * (k - 1 - nu)), c_seq(2 * nu + 1))
                l2 = MonomialIndex(c_seq(2 * k), 0)
        else:
            k = (p - 1) // 2
            if t % 2 == 0:
                l1 = MonomialIndex(c_seq(2 * (k - nu) - 1), c_seq(2 * nu))
                l2 = MonomialIndex(c_seq(2 * k + 1), 0)
            else:
                l1 = MonomialIndex(c_seq(2 * k), 0)
                l2 = MonomialIndex(c_seq(2 * (k - nu)), c_seq(2 * nu + 1))
    elif s == 2 * p - 2:
        if p % 2 == 0:
            k = p // 2
            if t % 2 == 0:
                l1 = MonomialIndex(c_seq(2 * (k - 1)), 0)
                l2 = MonomialIndex(c_seq(2 * (k - nu)), c_seq(2 * nu))
            else:
                l1 = MonomialIndex(c_seq(2 * (k - 1) - 1), 0)
                l2 = MonomialIndex(c_seq(2 * (k - nu) - 1), c_seq(2 * nu + 1))
        else:
            k = (p - 1) // 2
            if t % 2 == 0:
                l1 = MonomialIndex(c_seq(2 * k), 0)
                l2 = MonomialIndex(c_seq(2 * (k - nu)), c_seq(2 * nu))
            else:
                l1 = MonomialIndex(c_seq(2 * k - 1), 0)
                l2 = MonomialIndex(c_seq(2 * (k - nu) - 1), c_seq(2 * nu + 1))
    else:
        raise AssertionError("not a top-two level")
    return l1, l2


def factorize(m, p):
    """Split a monomial of level <= 2p-1 into m1*m2 with levels <= (p-1, p).

    The top two levels use the constructive case split (with x<->y swapped
    for positions past the half-diagonal); lower levels recurse on p-1.
    """
    if p < 2:
        raise ValueError("factorize requires p >= 2")
    m = MonomialIndex(*m)
    s = level(m)
    if s > 2 * p - 1:
        raise ValueError(f"level {s} exceeds 2p-1 = {2 * p - 1}")
    if s <= p - 1:
        return m, MonomialIndex(0, 0)
    if s <= p:
        return MonomialIndex(0, 0), m
    if s >= 2 * p - 2:
        l1, l2 = _factor_top(m, p)
    else:
        l1, l2 = factorize(m, p - 1)
    if level(l1) > p - 1:
        l1, l2 = l2, l1
    assert l1 * l2 == m and level(l1) <= p - 1 and level(l2) <= p
    return l1, l2
