"""Prototype: nonlinear seed selection for favard reconstruction."""
import numpy as np
import mpmath as mp
from lorpl2 import moments as Mo, ortho as O, recurrence as Rc, lattice as L
from lorpl2 import _precision as prec
import lorpl2.recurrence as R

p = Mo.lebesgue_provider((1, 2, 1, 2), 12)
sys = O.orthonormalize(p, 6)
data = Rc.compute_recurrence(sys)
N = 6
n_rel = 3
dims = [L.lattice_dim(l) for l in range(N + 1)]
mons = L.lattice_monomials(N)
mon_index = {m: r for r, m in enumerate(mons)}

# ---- linear system (same assembly as module, returning pieces) ----
L_top = n_rel + 2
sizes = [(l + 1) * dims[l] for l in range(L_top + 1)]
offs = np.concatenate([[0], np.cumsum(sizes[1:])]).astype(int)
def uoff(l): return int(offs[l - 1])
n_unknowns = int(offs[L_top])
Dnp = {k: data.block(*k) for k in data.pairs()}
S = {(n, ax): R._mult_matrix(n, ax) for n in range(N - 1) for ax in (1, 2)}
rows, rhs = [], []
for n in range(n_rel + 1):
    for ax in (1, 2):
        ner, nec = n + 1, dims[n + 2]
        A_rel = np.zeros((ner * nec, n_unknowns)); b_rel = np.zeros(ner * nec)
        def eq(r, c): return r * nec + c
        for s in range(max(0, n - 2), n + 3):
            Dblk = Dnp[(n, s, ax)]
            if s == 0:
                for r in range(ner): b_rel[eq(r, 0)] -= Dblk[r, 0]
                continue
            for r in range(ner):
                for q in range(s + 1):
                    base = uoff(s) + q * dims[s]
                    for c in range(dims[s]):
                        A_rel[eq(r, c), base + c] += Dblk[r, q]
        Sm = S[(n, ax)]
        if n == 0:
            for c in range(nec): b_rel[eq(0, c)] += Sm[0, c]
        else:
            nzq, nzc = np.nonzero(Sm)
            for r in range(ner):
                base = uoff(n) + r * dims[n]
                for q, c in zip(nzq, nzc):
                    A_rel[eq(r, c), base + q] -= Sm[q, c]
        rows.append(A_rel); rhs.append(b_rel)
A = np.vstack(rows); b = np.concatenate(rhs)
U, sv, Vt = np.linalg.svd(A, full_matrices=True)
rank = int((sv > sv[0] * 1e-10).sum())
x0 = np.linalg.lstsq(A, b, rcond=None)[0]
Vnull = Vt[rank:]
print("rank", rank, "null", Vnull.shape)

# ---- float64 completion ----
DbarT_cache = {}
for n in range(1, N - 1):
    Dst = data.stacked(n, n + 2)
    DbarT_cache[n] = np.linalg.pinv(Dst)

shiftmaps = {(n, ax): R._mult_matrix(n, ax) for n in range(N - 1) for ax in (1, 2)}

def complete(x):
    Gs = [np.array([[1.0]])]
    for l in (1, 2):
        Gs.append(x[uoff(l): uoff(l) + sizes[l]].reshape(l + 1, dims[l]))
    for n in range(1, N - 1):
        DbT = DbarT_cache[n]
        Db1, Db2 = DbT[:, : n + 1], DbT[:, n + 1:]
        acc = (Db1 @ Gs[n]) @ shiftmaps[(n, 1)] + (Db2 @ Gs[n]) @ shiftmaps[(n, 2)]
        for i in range(1, 5):
            lvl = n + 2 - i
            if lvl < 0: continue
            E = -(Db1 @ Dnp[(n, lvl, 1)] + Db2 @ Dnp[(n, lvl, 2)])
            acc[:, : dims[lvl]] += E @ Gs[lvl]
        Gs.append(acc)
    Gfull = np.zeros((dims[N], dims[N])); r0 = 0
    for l in range(N + 1):
        Gfull[r0: r0 + l + 1, : dims[l]] = Gs[l]; r0 += l + 1
    mu = np.linalg.inv(Gfull)[:, 0]
    return Gs, mu

def orth_residual(x):
    Gs, mu = complete(x)
    F = []
    # pairs (k,l) with k+l <= 4: gram blocks computable from induced moments
    for (k, l) in [(1, 1), (2, 1), (2, 2), (3, 1)]:
        Mkl = np.empty((dims[k], dims[l]))
        for rr, m1 in enumerate(mons[: dims[k]]):
            for cc, m2 in enumerate(mons[: dims[l]]):
                Mkl[rr, cc] = mu[mon_index[L.MonomialIndex(m1.i + m2.i, m1.j + m2.j)]]
        Gkl = Gs[k] @ Mkl @ Gs[l].T
        target = np.eye(k + 1) if k == l else np.zeros((k + 1, l + 1))
        F.extend((Gkl - target).ravel())
    return np.array(F)

def newton(x0, Vnull, iters=40):
    xi = np.zeros(Vnull.shape[0])
    lam = 1e-6
    F = orth_residual(x0)
    print("initial |F|", np.abs(F).max())
    for it in range(iters):
        x = x0 + Vnull.T @ xi
        F = orth_residual(x)
        nrm = np.abs(F).max()
        if nrm < 1e-13:
            break
        J = np.empty((len(F), len(xi)))
        h = 1e-6
        for cdx in range(len(xi)):
            xi2 = xi.copy(); xi2[cdx] += h
            J[:, cdx] = (orth_residual(x0 + Vnull.T @ xi2) - F) / h
        dxi, *_ = np.linalg.lstsq(J, -F, rcond=None)
        # damped step
        t = 1.0
        for _ in range(8):
            Fn = orth_residual(x0 + Vnull.T @ (xi + t * dxi))
            if np.abs(Fn).max() < nrm: break
            t /= 2
        xi = xi + t * dxi
        print(f"it {it}: |F| {nrm:.3e} step {t}")
    return x0 + Vnull.T @ xi, np.abs(F).max()

xstar, resid = newton(x0, Vnull)
print("final orth residual:", resid)
Gs, mu = complete(xstar)
mtrue = np.array([p.moment_float(m.i, m.j) for m in mons])
print("moment err vs true:", np.abs(mu - mtrue).max())
