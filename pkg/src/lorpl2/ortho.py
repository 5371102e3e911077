"""Orthonormal Laurent systems from moment data.

The moment matrix over the globally ordered monomial basis is assembled in
extended precision and Cholesky-factorized; the orthonormal vectors are the
rows of the inverse factor, which makes the leading blocks A_n^{(n)} lower
triangular with positive diagonal.  That canonical representative is one
choice among the orthogonal-factor family; fixtures depend on it, kernels do
not.
"""

import json

import mpmath as mp
import numpy as np

from . import _precision as prec
from . import lattice
from .errors import AxisEvaluationError, NotPositiveDefiniteError, WindowExceededError

ORTHO_FORMAT = "lorpl2-ortho-v1"


def required_window(n):
    """Largest |exponent| in Gram entries of level n: 2*ceil(n/2)."""
    return 2 * ((n + 1) // 2)


def _level_of_global(r):
    return lattice.level(lattice.monomial_at(r))


class MomentMatrix:
    """Gram matrix of the monomial basis of L_n, blockwise addressable."""

    def __init__(self, n, mat, provider):
        self.n = n
        self.mat = mat
        self.provider = provider

    @property
    def dim(self):
        return lattice.lattice_dim(self.n)

    def block_mp(self, k, l):
        r0, r1 = lattice.lattice_dim(k - 1) if k else 0, lattice.lattice_dim(k)
        c0, c1 = lattice.lattice_dim(l - 1) if l else 0, lattice.lattice_dim(l)
        return prec.submatrix(self.mat, range(r0, r1), range(c0, c1))

    def block(self, k, l):
        return prec.to_numpy(self.block_mp(k, l))

    @property
    def delta(self):
        """det M_n (mpf); computed from a Cholesky factorization."""
        try:
            _, piv = prec.cholesky_lower(self.mat)
        except ValueError:
            return mp.det(self.mat)
        d = mp.mpf(1)
        for p in piv:
            d *= p * p
        return d


def gram_matrix(provider, rows, cols):
    """Gram of two monomial lists: entry (r,s) = mu_{r+s componentwise}."""
    M = mp.zeros(len(rows), len(cols))
    for a, m1 in enumerate(rows):
        for b, m2 in enumerate(cols):
            M[a, b] = provider.moment(m1.i + m2.i, m1.j + m2.j)
    return M


def build_moment_matrix(provider, n):
    """Moment matrix M_n over the global monomial ordering of L_n."""
    need = required_window(n)
    if provider.window < need:
        raise WindowExceededError(need, need, provider.window)
    mons = lattice.lattice_monomials(n)
    return MomentMatrix(n, gram_matrix(provider, mons, mons), provider)


def is_positive_definite(M, tol=1e-13):
    """True iff the symmetric factorization runs with all pivots > tol*max diag.

    Accepts a MomentMatrix, an mp matrix or a numpy array.
    """
    mat = M.mat if isinstance(M, MomentMatrix) else M
    if isinstance(mat, np.ndarray):
        mat = prec.from_numpy(mat)
    try:
        prec.cholesky_lower(mat, pivot_floor=tol)
    except ValueError:
        return False
    return True


def evaluate_monomial_vector(n, x, y):
    """phi_n(x, y) componentwise as float64."""
    return prec.to_numpy(evaluate_monomial_vector_mp(n, x, y)).ravel()


def evaluate_monomial_vector_mp(n, x, y):
    if x == 0 or y == 0:
        raise AxisEvaluationError("monomial evaluation requires x != 0 and y != 0")
    xm, ym = prec.to_mp(x), prec.to_mp(y)
    out = mp.zeros(n + 1, 1)
    for t, m in enumerate(lattice.level_basis(n).entries):
        out[t, 0] = xm**m.i * ym**m.j
    return out


def derivative_monomial_vector_mp(n, x, y, axis):
    """Exact analytic d/dx or d/dy of the monomial vector phi_n."""
    if x == 0 or y == 0:
        raise AxisEvaluationError("monomial evaluation requires x != 0 and y != 0")
    xm, ym = prec.to_mp(x), prec.to_mp(y)
    out = mp.zeros(n + 1, 1)
    for t, m in enumerate(lattice.level_basis(n).entries):
        if axis == 1:
            out[t, 0] = m.i * xm ** (m.i - 1) * ym**m.j if m.i else mp.mpf(0)
        else:
            out[t, 0] = m.j * xm**m.i * ym ** (m.j - 1) if m.j else mp.mpf(0)
    return out


class OrthoSystem:
    """Coefficient blocks of an orthonormal Laurent family up to level N.

    `coeff` is the (dim x dim) block-lower-triangular matrix whose level-n
    rows expand phi-vector n over the global monomial basis; A_i^{(n)} is the
    (n+1) x (i+1) column block.  The canonical builder keeps the Cholesky
    factor `chol` (its inverse) for recurrence extraction.
    """

    def __init__(self, N, coeff, provider, chol=None, pivot_ratio=None):
        self.N = N
        self.coeff = coeff
        self.provider = provider
        self._chol = chol
        self.pivot_ratio = pivot_ratio

    # -- block access -------------------------------------------------------

    def _rows(self, n):
        r0 = lattice.lattice_dim(n - 1) if n else 0
        return range(r0, lattice.lattice_dim(n))

    def coeff_rows_mp(self, n):
        """Level-n coefficient rows over the global basis of L_n."""
        return prec.submatrix(self.coeff, self._rows(n), range(lattice.lattice_dim(n)))

    def coeff_rows(self, n):
        return prec.to_numpy(self.coeff_rows_mp(n))

    def a_block_mp(self, n, i):
        c0 = lattice.lattice_dim(i - 1) if i else 0
        return prec.submatrix(self.coeff, self._rows(n), range(c0, lattice.lattice_dim(i)))

    def a_block(self, n, i):
        return prec.to_numpy(self.a_block_mp(n, i))

    @property
    def chol(self):
        """Inverse of `coeff` (equals the Cholesky factor for canonical builds)."""
        if self._chol is None:
            self._chol = prec.mat_inverse(self.coeff)
        return self._chol

    def leading_condition(self, n):
        """cond_2 of the leading block A_n^{(n)} (float64 estimate)."""
        a = self.a_block(n, n)
        return float(np.linalg.cond(a))

    # -- evaluation ---------------------------------------------------------

    def evaluate_phi_mp(self, n, x, y):
        mons = mp.zeros(lattice.lattice_dim(n), 1)
        r = 0
        for lev in range(n + 1):
            v = evaluate_monomial_vector_mp(lev, x, y)
            for t in range(lev + 1):
                mons[r, 0] = v[t, 0]
                r += 1
        return self.coeff_rows_mp(n) * mons

    def evaluate_phi(self, n, x, y):
        return prec.to_numpy(self.evaluate_phi_mp(n, x, y)).ravel()

    def derivative_phi_mp(self, n, x, y, axis):
        mons = mp.zeros(lattice.lattice_dim(n), 1)
        r = 0
        for lev in range(n + 1):
            v = derivative_monomial_vector_mp(lev, x, y, axis)
            for t in range(lev + 1):
                mons[r, 0] = v[t, 0]
                r += 1
        return self.coeff_rows_mp(n) * mons

    def derivative_phi(self, n, x, y, axis):
        return prec.to_numpy(self.derivative_phi_mp(n, x, y, axis)).ravel()

    # -- serialization ------------------------------------------------------

    def to_json(self, path=None):
        doc = {
            "format": ORTHO_FORMAT,
            "max_level": self.N,
            "provider_fingerprint": self.provider.fingerprint() if self.provider else None,
            "blocks": {
                str(n): {
                    str(i): [
                        [prec.float_str(v) for v in row]
                        for row in self.a_block(n, i).tolist()
                    ]
                    for i in range(n + 1)
                }
                for n in range(self.N + 1)
            },
        }
        if path is not None:
            with open(path, "w") as f:
                json.dump(doc, f, indent=1, sort_keys=True)
                f.write("\n")
        return doc

    @classmethod
    def from_json(cls, doc, provider=None):
        if doc.get("format") != ORTHO_FORMAT:
            raise ValueError(f"expected format {ORTHO_FORMAT}")
        N = int(doc["max_level"])
        dim = lattice.lattice_dim(N)
        coeff = mp.zeros(dim, dim)
        for n in range(N + 1):
            r0 = lattice.lattice_dim(n - 1) if n else 0
            for i in range(n + 1):
                c0 = lattice.lattice_dim(i - 1) if i else 0
                rows = doc["blocks"][str(n)][str(i)]
                for a, row in enumerate(rows):
                    for b, v in enumerate(row):
                        coeff[r0 + a, c0 + b] = mp.mpf(v)
        return cls(N, coeff, provider)


def orthonormalize(provider, N, pivot_floor=1e-13):
    """Build the canonical orthonormal system to level N.

    Cholesky-factorizes M_N in extended precision; refuses when the pivot
    ratio min(R_ii)/max(R_ii) falls below pivot_floor, reporting the level
    at which resolution is lost.
    """
    M = build_moment_matrix(provider, N)
    try:
        R, piv = prec.cholesky_lower(M.mat)
    except prec.PivotError as exc:
        raise NotPositiveDefiniteError(_level_of_global(exc.row), str(exc)) from exc
    ratio = min(piv) / max(piv)
    if ratio < pivot_floor:
        lev = _level_of_global(piv.index(min(piv)))
        raise NotPositiveDefiniteError(
            lev, f"pivot ratio {float(ratio):.3e} below floor {pivot_floor:g}"
        )
    coeff = prec.lower_inverse(R)
    return OrthoSystem(N, coeff, provider, chol=R, pivot_ratio=float(ratio))


def gram_block(system, n, m, provider=None):
    """<phi_n, phi_m^T> recomputed from the provider in extended precision."""
    provider = provider or system.provider
    rows = lattice.lattice_monomials(n)
    cols = lattice.lattice_monomials(m)
    M = gram_matrix(provider, rows, cols)
    G = system.coeff_rows_mp(n) * M * system.coeff_rows_mp(m).T
    return prec.to_numpy(G)


def gram_residual(system, provider=None, N=None):
    """max |<phi_n, phi_m^T> - delta_{n,m} I| over all n, m <= N.

    Assembled as one extended-precision product coeff * M * coeff^T, so the
    reported residual is construction error, not double-rounding noise.
    """
    provider = provider or system.provider
    N = system.N if N is None else N
    dim = lattice.lattice_dim(N)
    mons = lattice.lattice_monomials(N)
    M = gram_matrix(provider, mons, mons)
    C = prec.submatrix(system.coeff, range(dim), range(dim))
    G = C * M * C.T
    worst = mp.mpf(0)
    for i in range(dim):
        for j in range(dim):
            target = 1 if i == j else 0
            worst = max(worst, abs(G[i, j] - target))
    return float(worst)
