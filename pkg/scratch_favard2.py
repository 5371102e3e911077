"""Prototype 2: seed via small n=0 system + triangularity + LM on 8 dims."""
import numpy as np
from lorpl2 import moments as Mo, ortho as O, recurrence as Rc, lattice as L
import lorpl2.recurrence as R

p = Mo.lebesgue_provider((1, 2, 1, 2), 12)
sysb = O.orthonormalize(p, 6)
data = Rc.compute_recurrence(sysb)
N = 6
dims = [L.lattice_dim(l) for l in range(N + 1)]
mons = L.lattice_monomials(N)
mon_index = {m: r for r, m in enumerate(mons)}
Dnp = {k: data.block(*k) for k in data.pairs()}
shiftmaps = {(n, ax): R._mult_matrix(n, ax) for n in range(N - 1) for ax in (1, 2)}

# ---- small linear system over (G1, G2): n=0 relations ----
# unknowns: vec(G1) (2x3=6) then vec(G2) (3x6=18): 24
def small_system():
    # n=0 relations: D_1 G_1 + D_2 G_2 = shift(G_0) - D_0 G_0, coordinatewise in L_2
    A = np.zeros((12, 24)); b = np.zeros(12)
    S0 = {ax: shiftmaps[(0, ax)] for ax in (1, 2)}
    row = 0
    for ax in (1, 2):
        D0, D1, D2 = Dnp[(0, 0, ax)], Dnp[(0, 1, ax)], Dnp[(0, 2, ax)]
        for c in range(6):
            if c < 3:
                for q in range(2):
                    A[row, q * 3 + c] = D1[0, q]
            for q in range(3):
                A[row, 6 + q * 6 + c] = D2[0, q]
            b[row] = S0[ax][0, c] - (D0[0, 0] if c == 0 else 0.0)
            row += 1
    return A, b

A_small, b_small = small_system()
# triangularity of canonical blocks: G1[0, col2]=0 ; G2 level-2 block upper entries
T = np.zeros((4, 24)); tb = np.zeros(4)
T[0, 0 * 3 + 2] = 1.0                 # G1[0, y-col]
T[1, 6 + 0 * 6 + 4] = 1.0             # G2[0, xy-col]
T[2, 6 + 0 * 6 + 5] = 1.0             # G2[0, 1/y-col]
T[3, 6 + 1 * 6 + 5] = 1.0             # G2[1, 1/y-col]
A_aug = np.vstack([A_small, T]); b_aug = np.concatenate([b_small, tb])
x0, _, rank, sv = np.linalg.lstsq(A_aug, b_aug, rcond=None)
U, svals, Vt = np.linalg.svd(A_aug)
rank = int((svals > svals[0] * 1e-10).sum())
Vnull = Vt[rank:]
print("small system rank", rank, "nullspace dim", Vnull.shape[0])
print("residual of lstsq point:", np.abs(A_aug @ x0 - b_aug).max())

# check truth satisfies augmented system
x_true = np.concatenate([sysb.coeff_rows(1).ravel(), sysb.coeff_rows(2).ravel()])
print("truth residual:", np.abs(A_aug @ x_true - b_aug).max())
print("xi_true:", np.round(Vnull @ (x_true - x0), 4), "|xi|", np.linalg.norm(Vnull @ (x_true - x0)))

DbarT_cache = {n: np.linalg.pinv(data.stacked(n, n + 2)) for n in range(1, N - 1)}

def complete(x):
    Gs = [np.array([[1.0]]), x[:6].reshape(2, 3), x[6:24].reshape(3, 6)]
    for n in range(1, N - 1):
        DbT = DbarT_cache[n]
        Db1, Db2 = DbT[:, : n + 1], DbT[:, n + 1 :]
        acc = (Db1 @ Gs[n]) @ shiftmaps[(n, 1)][: dims[n]] + (Db2 @ Gs[n]) @ shiftmaps[(n, 2)][: dims[n]]
        for i in range(1, 5):
            lvl = n + 2 - i
            if lvl < 0:
                continue
            E = -(Db1 @ Dnp[(n, lvl, 1)] + Db2 @ Dnp[(n, lvl, 2)])
            acc[:, : dims[lvl]] += E @ Gs[lvl]
        Gs.append(acc)
    Gfull = np.zeros((dims[N], dims[N])); r0 = 0
    for l in range(N + 1):
        Gfull[r0 : r0 + l + 1, : dims[l]] = Gs[l]
        r0 += l + 1
    mu = np.linalg.solve(Gfull, np.eye(dims[N])[:, 0])
    return Gs, mu

# invariant moments from operator powers (exact linear data facts)
F1 = Rc.assemble_operator(data, 1).matrix
F2 = Rc.assemble_operator(data, 2).matrix
e0 = np.zeros(dims[N]); e0[0] = 1.0
def op_moment(a, bb):
    vec = e0.copy()
    for _ in range(a):
        vec = F1.T @ vec
    for _ in range(bb):
        vec = F2.T @ vec
    return vec[0]
mt = {(a, bb): op_moment(a, bb) for a in range(3) for bb in range(3) if 1 <= a + bb <= 2}

def mu_comb(mu, a, bb):
    # expansion of (x+1/x)^a (y+1/y)^b over monomials, dotted with mu
    from itertools import product
    total = 0.0
    import math
    for ka in range(a + 1):
        for kb in range(bb + 1):
            i = a - 2 * ka
            j = bb - 2 * kb
            total += math.comb(a, ka) * math.comb(bb, kb) * mu[mon_index[L.MonomialIndex(i, j)]]
    return total

def orth_residual(x):
    Gs, mu = complete(x)
    F = []
    for (k, l) in [(1, 1), (2, 1), (2, 2), (3, 1)]:
        Mkl = np.empty((dims[k], dims[l]))
        for rr, m1 in enumerate(mons[: dims[k]]):
            for cc, m2 in enumerate(mons[: dims[l]]):
                Mkl[rr, cc] = mu[mon_index[L.MonomialIndex(m1.i + m2.i, m1.j + m2.j)]]
        Gkl = Gs[k] @ Mkl @ Gs[l].T
        target = np.eye(k + 1) if k == l else np.zeros((k + 1, l + 1))
        F.extend((Gkl - target).ravel())
    for (a, bb), val in mt.items():
        F.append(mu_comb(mu, a, bb) - val)
    return np.array(F)

print("F(xi_true):", np.abs(orth_residual(x_true)).max())
print("F(x0):", np.abs(orth_residual(x0)).max())

def lm(x0, Vnull, xi0=None, iters=200):
    xi = np.zeros(Vnull.shape[0]) if xi0 is None else xi0.copy()
    lam = 1e-3
    best = None
    for it in range(iters):
        x = x0 + Vnull.T @ xi
        try:
            F = orth_residual(x)
        except np.linalg.LinAlgError:
            F = None
        if F is None:
            lam *= 10; xi *= 0.9; continue
        nrm = float(np.linalg.norm(F))
        if best is None or nrm < best[0]:
            best = (nrm, xi.copy())
        if nrm < 1e-12:
            break
        J = np.empty((len(F), len(xi)))
        h = 1e-7 * max(1.0, np.linalg.norm(xi))
        for cdx in range(len(xi)):
            xi2 = xi.copy(); xi2[cdx] += h
            J[:, cdx] = (orth_residual(x0 + Vnull.T @ xi2) - F) / h
        while True:
            dxi = np.linalg.solve(J.T @ J + lam * np.eye(len(xi)), -J.T @ F)
            try:
                Fn = orth_residual(x0 + Vnull.T @ (xi + dxi))
                ok = np.linalg.norm(Fn) < nrm
            except np.linalg.LinAlgError:
                ok = False
            if ok:
                xi = xi + dxi
                lam = max(lam / 3, 1e-12)
                break
            lam *= 10
            if lam > 1e12:
                return x0 + Vnull.T @ xi, nrm, it
        if it % 10 == 0:
            print(f"  it {it}: |F|2 {nrm:.3e} lam {lam:.1e}")
    x = x0 + Vnull.T @ xi
    return x, float(np.linalg.norm(orth_residual(x))), it

xstar, resid, its = lm(x0, Vnull)
print("LM final:", resid, "after", its, "iters")
Gs, mu = complete(xstar)
mtrue = np.array([p.moment_float(m.i, m.j) for m in mons])
print("moment err vs true:", np.abs(mu - mtrue).max())
