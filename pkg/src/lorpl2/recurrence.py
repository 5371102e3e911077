"""Five-term recurrence blocks, banded operators, and Favard reconstruction.

The blocks D_{s,i}^{(n)} expand (x+1/x) phi_n and (y+1/y) phi_n over the
orthonormal family.  They are extracted by exact coefficient algebra: the
product's monomial coefficients come from the structural B matrices, and the
expansion over the family is a triangular change of basis (the Cholesky
factor), so the provider's moments are the only numerical input.

The reconstruction direction rebuilds the family and its moment functional
from the blocks alone via the left-inverse recursion; levels 1 and 2 are
seeded from a joint least-squares solve of the low-level five-term
identities, since the stacked level-0 block has rank 2 and admits no left
inverse.
"""

import json

import mpmath as mp
import numpy as np

from . import _precision as prec
from . import lattice
from .errors import Lorpl2Error, RankHypothesisError, WindowExceededError
from .moments import TableMomentProvider
from .ortho import OrthoSystem, gram_matrix

RECURRENCE_FORMAT = "lorpl2-recurrence-v1"


def apply_axis_shift(G, n, axis):
    """Coefficient matrix of (t+1/t) f for f given over the basis of L_n.

    G has one row per component and lattice_dim(n) columns; the result has
    lattice_dim(n+2) columns.  Implemented blockwise with the structural
    B matrices of each source level.
    """
    rows = G.rows
    out = mp.zeros(rows, lattice.lattice_dim(n + 2))
    for i in range(n + 1):
        c0 = lattice.lattice_dim(i - 1) if i else 0
        Gi = prec.submatrix(G, range(rows), range(c0, lattice.lattice_dim(i)))
        for s, B in lattice.struct_matrices(i, axis).items():
            d0 = lattice.lattice_dim(s - 1) if s else 0
            Bm = prec.from_numpy(B.data)
            contrib = Gi * Bm
            for r in range(rows):
                for c in range(s + 1):
                    out[r, d0 + c] += contrib[r, c]
    return out


class RecurrenceData:
    """Blocks D_{s,axis}^{(n)} for n <= N, s in {n-2..n+2} intersect [0, N]."""

    def __init__(self, N, blocks, omitted=()):
        self.N = N
        self._blocks = dict(blocks)
        self.omitted = tuple(sorted(omitted))

    def pairs(self):
        return sorted(self._blocks.keys())

    def has_block(self, n, s, axis):
        return (n, s, axis) in self._blocks

    def block_mp(self, n, s, axis):
        return self._blocks[(n, s, axis)]

    def block(self, n, s, axis):
        return prec.to_numpy(self._blocks[(n, s, axis)])

    def stacked_mp(self, n, s):
        """[D_{s,1}^{(n)}; D_{s,2}^{(n)}] stacked by axis."""
        return prec.vstack([self._blocks[(n, s, 1)], self._blocks[(n, s, 2)]])

    def stacked(self, n, s):
        return prec.to_numpy(self.stacked_mp(n, s))

    def to_json(self, path=None):
        doc = {
            "format": RECURRENCE_FORMAT,
            "max_level": self.N,
            "omitted": [list(k) for k in self.omitted],
            "blocks": {
                f"{n},{s},{axis}": [
                    [prec.float_str(v) for v in row]
                    for row in self.block(n, s, axis).tolist()
                ]
                for (n, s, axis) in self.pairs()
            },
        }
        if path is not None:
            with open(path, "w") as f:
                json.dump(doc, f, indent=1, sort_keys=True)
                f.write("\n")
        return doc

    @classmethod
    def from_json(cls, doc):
        if doc.get("format") != RECURRENCE_FORMAT:
            raise ValueError(f"expected format {RECURRENCE_FORMAT}")
        blocks = {}
        for key, rows in doc["blocks"].items():
            n, s, axis = (int(v) for v in key.split(","))
            m = mp.zeros(len(rows), len(rows[0]))
            for a, row in enumerate(rows):
                for b, v in enumerate(row):
                    m[a, b] = mp.mpf(v)
            blocks[(n, s, axis)] = m
        omitted = tuple(tuple(k) for k in doc.get("omitted", []))
        return cls(int(doc["max_level"]), blocks, omitted)


def compute_recurrence(system, provider=None):
    """Extract all D blocks of the system up to its level N.

    For n <= N-2 the product (t+1/t) phi_n lies in span{phi_0..phi_{n+2}}
    and its expansion is (product coefficients) * R with R the system's
    change-of-basis factor -- no moments beyond M_N enter.  The boundary
    levels n = N-1, N use Gram sums against the provider directly and the
    blocks with s > N are omitted and flagged.
    """
    provider = provider or system.provider
    N = system.N
    blocks = {}
    omitted = []
    R = system.chol
    for axis in (1, 2):
        for n in range(N + 1):
            G = system.coeff_rows_mp(n)
            P = apply_axis_shift(G, n, axis)
            s_lo = max(0, n - 2)
            if n <= N - 2:
                dim = lattice.lattice_dim(n + 2)
                Rsub = prec.submatrix(R, range(dim), range(dim))
                D = P * Rsub
                for s in range(s_lo, n + 3):
                    c0 = lattice.lattice_dim(s - 1) if s else 0
                    blocks[(n, s, axis)] = prec.submatrix(
                        D, range(n + 1), range(c0, lattice.lattice_dim(s))
                    )
            else:
                prod_mons = lattice.lattice_monomials(n + 2)
                for s in range(s_lo, n + 3):
                    if s > N:
                        omitted.append((n, s, axis))
                        continue
                    cols = lattice.lattice_monomials(s)
                    Mrect = gram_matrix(provider, prod_mons, cols)
                    blocks[(n, s, axis)] = P * Mrect * system.coeff_rows_mp(s).T
    return RecurrenceData(N, blocks, omitted)


class FiveTermReport:
    """Per-(level, axis) max pointwise residuals of the five-term relations."""

    def __init__(self, residuals, n_points):
        self.residuals = residuals
        self.n_points = n_points

    @property
    def max_residual(self):
        return max(self.residuals.values()) if self.residuals else 0.0

    def rows(self):
        return [(n, axis, r) for (n, axis), r in sorted(self.residuals.items())]

    def as_csv(self):
        lines = ["level,axis,max_residual"]
        for n, axis, r in self.rows():
            lines.append(f"{n},{axis},{prec.float_str(r)}")
        return "\n".join(lines) + "\n"


def verify_five_term(system, data, points, n_max=None, float_mode=False):
    """Residuals ||(t+1/t) phi_n - sum_s D_{s}^{(n)} phi_s||_inf at sample points.

    Levels run to n_max (default N-2, the largest with a complete block set);
    phi_{-1} = phi_{-2} = 0 so low levels use only their existing blocks.
    float_mode evaluates everything in float64 instead of extended precision.
    """
    N = system.N
    top = N - 2 if n_max is None else min(n_max, N - 2)
    residuals = {}
    for x, y in points:
        phis_mp = [system.evaluate_phi_mp(n, x, y) for n in range(N + 1)]
        if float_mode:
            phis = [prec.to_numpy(v).ravel() for v in phis_mp]
        for axis in (1, 2):
            tm = prec.to_mp(x) if axis == 1 else prec.to_mp(y)
            factor = tm + 1 / tm
            for n in range(top + 1):
                if float_mode:
                    lhs = float(factor) * phis[n]
                    rhs = np.zeros(n + 1)
                    for s in range(max(0, n - 2), n + 3):
                        rhs += data.block(n, s, axis) @ phis[s]
                    r = float(np.abs(lhs - rhs).max())
                else:
                    lhs = phis_mp[n] * factor
                    rhs = mp.zeros(n + 1, 1)
                    for s in range(max(0, n - 2), n + 3):
                        rhs += data.block_mp(n, s, axis) * phis_mp[s]
                    r = float(max(abs(lhs[k, 0] - rhs[k, 0]) for k in range(n + 1)))
                key = (n, axis)
                residuals[key] = max(residuals.get(key, 0.0), r)
    return FiveTermReport(residuals, len(points))


class BandedOperator:
    """Dense truncation of the block-pentadiagonal operator F_axis."""

    def __init__(self, axis, matrix, N):
        self.axis = axis
        self.matrix = matrix
        self.N = N

    def block(self, n, s):
        r0 = lattice.lattice_dim(n - 1) if n else 0
        c0 = lattice.lattice_dim(s - 1) if s else 0
        return self.matrix[r0 : lattice.lattice_dim(n), c0 : lattice.lattice_dim(s)]


def assemble_operator(data, axis):
    """Stack the D blocks into the truncated banded operator matrix."""
    N = data.N
    dim = lattice.lattice_dim(N)
    F = np.zeros((dim, dim))
    for n in range(N + 1):
        r0 = lattice.lattice_dim(n - 1) if n else 0
        for s in range(max(0, n - 2), min(n + 2, N) + 1):
            if not data.has_block(n, s, axis):
                continue
            c0 = lattice.lattice_dim(s - 1) if s else 0
            F[r0 : r0 + n + 1, c0 : c0 + s + 1] = data.block(n, s, axis)
    return BandedOperator(axis, F, N)


def left_inverse(D, rank_tol=1e-10):
    """Minimal-norm left inverse (pseudoinverse) of a full-column-rank matrix.

    Input is (2(n+1)) x (n+3), mp or ndarray; returns Dbar with
    Dbar^T D = I.  Raises RankHypothesisError on rank deficiency.
    """
    Dm = D if isinstance(D, mp.matrix) else prec.from_numpy(D)
    Dnp = prec.to_numpy(Dm)
    sv = np.linalg.svd(Dnp, compute_uv=False)
    if Dnp.shape[0] < Dnp.shape[1] or sv[-1] <= rank_tol * sv[0]:
        raise RankHypothesisError(
            "left inverse requires full column rank",
            f"sigma_min/sigma_max = {sv[-1] / sv[0]:.3e}" if sv[0] else "zero matrix",
        )
    Z = prec.pinv_tall(Dm)  # (n+3) x 2(n+1), rows of Dbar^T
    resid = prec.max_abs(Z * Dm - mp.eye(Dm.cols))
    if float(resid) > 1e-11:
        raise Lorpl2Error(f"left inverse residual {float(resid):.3e} exceeds 1e-11")
    return Z.T


# ---------------------------------------------------------------------------
# Favard reconstruction
# ---------------------------------------------------------------------------


class FavardResult:
    def __init__(self, system, provider, diagnostics):
        self.system = system
        self.provider = provider
        self.diagnostics = diagnostics


def _check_rank(name, mat_np, expected, rank_tol, margins):
    sv = np.linalg.svd(mat_np, compute_uv=False)
    if len(sv) < expected or sv[0] == 0:
        raise RankHypothesisError(name, "matrix too small or zero")
    margin = sv[expected - 1] / sv[0]
    margins[name] = float(margin)
    if margin <= rank_tol:
        raise RankHypothesisError(name, f"sigma_{expected}/sigma_1 = {margin:.3e}")


def _validate_hypotheses(data, rank_tol, sym_tol, margins):
    """Symmetry and rank hypotheses of the reconstruction theorem."""
    N = data.N
    for axis in (1, 2):
        for n in range(N + 1):
            for s in range(max(0, n - 2), min(n, N) + 1):
                if not (data.has_block(n, s, axis) and data.has_block(s, n, axis)):
                    continue
                diff = prec.to_numpy(data.block_mp(n, s, axis)) - prec.to_numpy(
                    data.block_mp(s, n, axis)
                ).T
                if np.abs(diff).max() > sym_tol:
                    raise RankHypothesisError(
                        f"symmetry D_{{{s},{axis}}}^{{({n})}}",
                        f"max deviation {np.abs(diff).max():.3e}",
                    )
    _check_rank("rank D_1^{(0)}", data.stacked(0, 1), 2, rank_tol, margins)
    for n in range(0, N - 1):
        for axis in (1, 2):
            _check_rank(
                f"rank D_{{{n + 2},{axis}}}^{{({n})}}",
                data.block(n, n + 2, axis),
                n + 1,
                rank_tol,
                margins,
            )
            if data.has_block(n + 2, n, axis):
                _check_rank(
                    f"rank D_{{{n},{axis}}}^{{({n + 2})}}",
                    data.block(n + 2, n, axis),
                    n + 1,
                    rank_tol,
                    margins,
                )
        if n >= 1:
            _check_rank(
                f"rank D_{{{n + 2}}}^{{({n})}}", data.stacked(n, n + 2), n + 3, rank_tol, margins
            )


def _mult_matrix(n, axis):
    """0/1 matrix of monomial multiplication by t+1/t: L_n coords -> L_{n+2}."""
    S = np.zeros((lattice.lattice_dim(n), lattice.lattice_dim(n + 2)), dtype=np.int64)
    for r, m in enumerate(lattice.lattice_monomials(n)):
        for tgt in lattice.axis_shift_targets(m, axis):
            S[r, lattice.global_index(tgt)] += 1
    return S


def _seed_levels(data, n_rel, refine_iters=3):
    """Jointly solve the five-term identities of relations n = 0..n_rel for
    the coefficient matrices of levels 1..n_rel+2.

    Returns (G_list, diagnostics): G_list[l] is the mp coefficient matrix of
    level l (index 0 holds the known phi_0 = 1 row).  The system is solved
    in float64 and refined with extended-precision residuals.
    """
    L = n_rel + 2
    dims = [lattice.lattice_dim(l) for l in range(L + 3)]
    sizes = [(l + 1) * dims[l] for l in range(L + 1)]
    offs = np.concatenate([[0], np.cumsum(sizes[1:])]).astype(int)  # offs[l-1] for level l

    def uoff(l):
        return int(offs[l - 1])

    n_unknowns = int(offs[L])
    Dnp = {k: data.block(*k) for k in data.pairs()}
    S = {(n, ax): _mult_matrix(n, ax) for n in range(n_rel + 1) for ax in (1, 2)}

    rows = []
    rhs = []
    for n in range(n_rel + 1):
        for ax in (1, 2):
            n_eq_rows, n_eq_cols = n + 1, dims[n + 2]
            A_rel = np.zeros((n_eq_rows * n_eq_cols, n_unknowns))
            b_rel = np.zeros(n_eq_rows * n_eq_cols)

            def eq_index(r, c):
                return r * n_eq_cols + c

            # sum_s D_{s,ax}^{(n)} G_s  (unknown levels only)
            for s in range(max(0, n - 2), n + 3):
                Dblk = Dnp[(n, s, ax)]
                if s == 0:
                    # known G_0 = e_0
                    for r in range(n_eq_rows):
                        b_rel[eq_index(r, 0)] -= Dblk[r, 0]
                    continue
                for r in range(n_eq_rows):
                    for q in range(s + 1):
                        base = uoff(s) + q * dims[s]
                        for c in range(dims[s]):
                            A_rel[eq_index(r, c), base + c] += Dblk[r, q]
            # -(G_n S) term
            Sm = S[(n, ax)]
            if n == 0:
                shift = Sm[0]  # row of known G_0 = e_0: shift of the constant 1
                for c in range(n_eq_cols):
                    b_rel[eq_index(0, c)] += shift[c]
            else:
                nz = [(q, c) for q in range(dims[n]) for c in np.nonzero(Sm[q])[0]]
                for r in range(n_eq_rows):
                    base = uoff(n) + r * dims[n]
                    for q, c in nz:
                        A_rel[eq_index(r, c), base + q] -= Sm[q, c]
            rows.append(A_rel)
            rhs.append(b_rel)

    A = np.vstack(rows)
    b = np.concatenate(rhs)
    x, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
    sigma_ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    if rank < n_unknowns:
        raise Lorpl2Error(
            f"reconstruction seed system is rank deficient ({rank} < {n_unknowns}); "
            "the data does not determine the family"
        )

    def unpack(vec):
        Gs = [None] * (L + 1)
        G0 = mp.zeros(1, 1)
        G0[0, 0] = mp.mpf(1)
        Gs[0] = G0
        for l in range(1, L + 1):
            Gl = mp.zeros(l + 1, dims[l])
            for r in range(l + 1):
                for c in range(dims[l]):
                    Gl[r, c] = prec.to_mp(vec[uoff(l) + r * dims[l] + c])
            Gs[l] = Gl
        return Gs

    def mp_residual(Gs):
        res = []
        for n in range(n_rel + 1):
            for ax in (1, 2):
                lhs = apply_axis_shift(Gs[n], n, ax)
                acc = mp.zeros(n + 1, dims[n + 2])
                for s in range(max(0, n - 2), n + 3):
                    Dm = data.block_mp(n, s, ax)
                    Gpad = mp.zeros(s + 1, dims[n + 2])
                    for r in range(s + 1):
                        for c in range(dims[s]):
                            Gpad[r, c] = Gs[s][r, c]
                    acc += Dm * Gpad
                diff = lhs - acc
                res.extend(float(diff[r, c]) for r in range(n + 1) for c in range(dims[n + 2]))
        return np.array(res)

    # iterative refinement: float64 solve + extended-precision residuals.
    # mp_residual returns shift(G_n) - sum D G = b - A x in the assembled
    # sign convention, so the correction solves A delta = residual.
    x_mp = [prec.to_mp(v) for v in x]
    for _ in range(refine_iters):
        Gs = unpack(x_mp)
        r = mp_residual(Gs)
        delta, *_ = np.linalg.lstsq(A, r, rcond=None)
        x_mp = [xv + prec.to_mp(dv) for xv, dv in zip(x_mp, delta)]
    Gs = unpack(x_mp)
    final = float(np.abs(mp_residual(Gs)).max())
    return Gs, {"seed_residual": final, "seed_sigma_ratio": sigma_ratio}


def favard_reconstruct(data, rank_tol=1e-10, sym_tol=1e-10, seed_relations=3):
    """Rebuild an orthonormal family and its moment functional from D blocks.

    Validates the symmetry and rank hypotheses (naming the failing one),
    seeds levels 1-2 (and companions) from the joint low-level solve, then
    recurses upward with pseudoinverse left inverses:

        phi_{n+2} = [(x+1/x) Dbar_1^T + (y+1/y) Dbar_2^T] phi_n
                    + sum_i E_n^i phi_{n+2-i}.

    The functional L(1) = 1, L(phi_n) = 0 yields every moment of level <= N
    as the leading column of the inverse coefficient matrix; they are
    returned as a table provider (square window floor(N/4), full triangular
    set exposed as .entries).
    """
    N = data.N
    if N < 4:
        raise Lorpl2Error("reconstruction requires blocks to level N >= 4")
    margins = {}
    _validate_hypotheses(data, rank_tol, sym_tol, margins)

    n_rel = min(seed_relations, N - 2)
    Gs, diag = _seed_levels(data, n_rel)
    diag["rank_margins"] = margins
    # the joint solve determines everything up to level n_rel+2; only levels
    # 1-2 are kept (the stacked level-0 block has no left inverse), the rest
    # is rebuilt by the recursion proper
    Gs = Gs[:3] + [None] * (N - 2)

    dims = [lattice.lattice_dim(l) for l in range(N + 1)]
    # left-inverse recursion for the remaining levels
    for n in range(1, N - 1):
        Dstack = data.stacked_mp(n, n + 2)
        Dbar = left_inverse(Dstack, rank_tol)  # 2(n+1) x (n+3)
        DbarT = Dbar.T
        Db1 = prec.submatrix(DbarT, range(n + 3), range(n + 1))
        Db2 = prec.submatrix(DbarT, range(n + 3), range(n + 1, 2 * (n + 1)))
        acc = apply_axis_shift(Db1 * Gs[n], n, 1) + apply_axis_shift(Db2 * Gs[n], n, 2)
        for i in range(1, 5):
            lvl = n + 2 - i
            if lvl < 0:
                continue
            E = -(Db1 * data.block_mp(n, lvl, 1) + Db2 * data.block_mp(n, lvl, 2))
            T = E * Gs[lvl]
            for r in range(n + 3):
                for c in range(dims[lvl]):
                    acc[r, c] += T[r, c]
        Gs[n + 2] = acc

    # stack into the full coefficient matrix over L_N
    dim = dims[N]
    coeff = mp.zeros(dim, dim)
    r0 = 0
    for l in range(N + 1):
        for r in range(l + 1):
            for c in range(dims[l]):
                coeff[r0 + r, c] = Gs[l][r, c]
        r0 += l + 1

    lead = prec.to_numpy(coeff)
    sv = np.linalg.svd(lead, compute_uv=False)
    if sv[-1] <= rank_tol * sv[0]:
        raise Lorpl2Error("reconstructed coefficient matrix is numerically singular")

    inv = prec.mat_inverse(coeff)
    entries = {}
    for r, m in enumerate(lattice.lattice_monomials(N)):
        entries[(m.i, m.j)] = inv[r, 0]
    window = N // 4
    provider = TableMomentProvider(entries, window)
    provider.kind = "favard-reconstructed"
    system = OrthoSystem(N, coeff, provider)
    return FavardResult(system, provider, diag)
