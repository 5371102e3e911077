"""Extended-precision linear algebra helpers on top of mpmath.

Moment matrices of balanced Laurent bases are severely ill-conditioned
(cond(M_8) ~ 3e19 on [1,2]^2), so every construction that feeds the
verification suites runs in mpmath arbitrary precision and only the final
results are rounded to float64.  gmpy2 is picked up automatically by mpmath
when present.
"""

import mpmath as mp
import numpy as np

DEFAULT_DPS = 60


def set_working_dps(dps=DEFAULT_DPS):
    mp.mp.dps = dps


def to_mp(x):
    """Lift a scalar to mpf. Floats convert exactly; strings parse decimally."""
    if isinstance(x, mp.mpf):
        return x
    if isinstance(x, str):
        return mp.mpf(x)
    if isinstance(x, (int, np.integer)):
        return mp.mpf(int(x))
    return mp.mpf(float(x))


def zeros(r, c):
    return mp.zeros(r, c)


def to_numpy(m):
    """mpmath matrix -> float64 ndarray."""
    out = np.empty((m.rows, m.cols))
    for i in range(m.rows):
        for j in range(m.cols):
            out[i, j] = float(m[i, j])
    return out


def from_numpy(a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    m = mp.zeros(a.shape[0], a.shape[1])
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            m[i, j] = mp.mpf(a[i, j])
    return m


class PivotError(ValueError):
    """Cholesky pivot at `row` fell below the floor (or is nonpositive)."""

    def __init__(self, row, value, floor):
        self.row, self.value, self.floor = row, float(value), float(floor)
        super().__init__(f"pivot {self.value:.3e} at row {row} below floor {self.floor:.3e}")


def cholesky_lower(M, pivot_floor=0.0):
    """Cholesky factor R (lower) of a symmetric mp matrix, with pivot report.

    Returns (R, pivots) where pivots[k] = R[k,k].  Raises PivotError when a
    pivot^2 falls below pivot_floor * max(diag(M)) or is nonpositive.
    """
    n = M.rows
    R = mp.zeros(n, n)
    maxdiag = max(M[i, i] for i in range(n))
    floor = to_mp(pivot_floor) * maxdiag
    pivots = []
    for j in range(n):
        s = M[j, j]
        for k in range(j):
            s -= R[j, k] ** 2
        if s <= floor or s <= 0:
            raise PivotError(j, s, floor)
        R[j, j] = mp.sqrt(s)
        pivots.append(R[j, j])
        for i in range(j + 1, n):
            t = M[i, j]
            for k in range(j):
                t -= R[i, k] * R[j, k]
            R[i, j] = t / R[j, j]
    return R, pivots


def lower_inverse(R):
    """Inverse of a lower-triangular mp matrix by forward substitution."""
    n = R.rows
    X = mp.zeros(n, n)
    for j in range(n):
        X[j, j] = 1 / R[j, j]
        for i in range(j + 1, n):
            s = mp.mpf(0)
            for k in range(j, i):
                s += R[i, k] * X[k, j]
            X[i, j] = -s / R[i, i]
    return X


def solve_lower(R, B):
    """Solve R X = B with R lower triangular."""
    n = R.rows
    X = mp.zeros(n, B.cols)
    for c in range(B.cols):
        for i in range(n):
            s = B[i, c]
            for k in range(i):
                s -= R[i, k] * X[k, c]
            X[i, c] = s / R[i, i]
    return X


def mat_inverse(M):
    """General mp inverse (small systems only)."""
    return M**-1


def pinv_tall(D):
    """Moore-Penrose pseudoinverse of a full-column-rank mp matrix.

    Computed from the normal equations; raises ValueError when D^T D is not
    numerically positive definite at working precision.
    """
    G = D.T * D
    try:
        R, _ = cholesky_lower(G)
    except ValueError as exc:
        raise ValueError(f"rank-deficient matrix in pseudoinverse: {exc}") from exc
    # (D^T D)^{-1} D^T via two triangular solves: R Y = D^T, then R^T Z = Y
    Y = solve_lower(R, D.T)
    n = R.rows
    Z = mp.zeros(n, Y.cols)
    for c in range(Y.cols):
        for i in range(n - 1, -1, -1):
            s = Y[i, c]
            for k in range(i + 1, n):
                s -= R[k, i] * Z[k, c]
            Z[i, c] = s / R[i, i]
    return Z


def frob_norm(M):
    s = mp.mpf(0)
    for i in range(M.rows):
        for j in range(M.cols):
            s += M[i, j] ** 2
    return mp.sqrt(s)


def max_abs(M):
    return max(abs(M[i, j]) for i in range(M.rows) for j in range(M.cols))


def hstack(mats):
    rows = mats[0].rows
    cols = sum(m.cols for m in mats)
    out = mp.zeros(rows, cols)
    c0 = 0
    for m in mats:
        for i in range(rows):
            for j in range(m.cols):
                out[i, c0 + j] = m[i, j]
        c0 += m.cols
    return out


def vstack(mats):
    cols = mats[0].cols
    rows = sum(m.rows for m in mats)
    out = mp.zeros(rows, cols)
    r0 = 0
    for m in mats:
        for i in range(m.rows):
            for j in range(cols):
                out[r0 + i, j] = m[i, j]
        r0 += m.rows
    return out


def submatrix(M, rows, cols):
    out = mp.zeros(len(rows), len(cols))
    for a, i in enumerate(rows):
        for b, j in enumerate(cols):
            out[a, b] = M[i, j]
    return out


def float_str(x, digits=17):
    """Shortest round-trip decimal string of float(x) (<= `digits` digits)."""
    return repr(float(x))
