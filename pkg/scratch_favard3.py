"""Prototype 3: seed unknowns = low-level moments; Cholesky hard-wires
orthonormality; residual = n=0 relations + induced-functional consistency.
Start from the symmetrized invariant moments (exact linear data facts)."""
import math
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
DbarT_cache = {n: np.linalg.pinv(data.stacked(n, n + 2)) for n in range(1, N - 1)}

lev2 = mons[: dims[2]]
S = sorted({(m1.i + m2.i, m1.j + m2.j) for m1 in lev2 for m2 in lev2})
S_unknown = [s for s in S if s != (0, 0)]
print("S:", S, len(S_unknown), "unknowns")

# ---- exact invariant moments from truncated operator powers ----
F1 = Rc.assemble_operator(data, 1).matrix
F2 = Rc.assemble_operator(data, 2).matrix
e0 = np.zeros(dims[N]); e0[0] = 1.0
def op_moment(a, b):
    vec = e0.copy()
    for _ in range(a):
        vec = F1.T @ vec
    for _ in range(b):
        vec = F2.T @ vec
    return float(vec[0])

def symmetric_prior():
    """nu_{|i|,|j|} solved triangularly from m~_{a,b}, symmetric ansatz."""
    nu = {(0, 0): 1.0}
    for tot in range(1, 5):
        for a in range(tot + 1):
            b = tot - a
            mt = op_moment(a, b)
            acc = 0.0
            for ka in range(a + 1):
                for kb in range(b + 1):
                    i, j = abs(a - 2 * ka), abs(b - 2 * kb)
                    if (i, j) == (a, b):
                        continue
                    acc += math.comb(a, ka) * math.comb(b, kb) * nu.get((i, j), 0.0)
            scale = (2.0 if a > 0 else 1.0) * (2.0 if b > 0 else 1.0)
            nu[(a, b)] = (mt - acc) / scale
    return nu

nu = symmetric_prior()
mu0 = np.array([nu[(abs(i), abs(j))] for (i, j) in S_unknown])
mutrue_S = np.array([p.moment_float(i, j) for (i, j) in S_unknown])
print("prior rel err:", np.abs((mu0 - mutrue_S) / mutrue_S).max())

def chol_seed(muS):
    """(G1, G2) canonical from candidate moments on S."""
    mu = {(0, 0): 1.0, **{s: v for s, v in zip(S_unknown, muS)}}
    M2 = np.empty((6, 6))
    for r, m1 in enumerate(lev2):
        for c, m2 in enumerate(lev2):
            M2[r, c] = mu[(m1.i + m2.i, m1.j + m2.j)]
    Rch = np.linalg.cholesky(M2)
    C = np.linalg.inv(Rch)
    return C[1:3, :3], C[3:6, :6]

def complete(G1, G2):
    Gs = [np.array([[1.0]]), G1, G2]
    for n in range(1, N - 1):
        DbT = DbarT_cache[n]
        Db1, Db2 = DbT[:, : n + 1], DbT[:, n + 1 :]
        acc = (Db1 @ Gs[n]) @ shiftmaps[(n, 1)] + (Db2 @ Gs[n]) @ shiftmaps[(n, 2)]
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
    mu_ind = np.linalg.solve(Gfull, np.eye(dims[N])[:, 0])
    return Gs, mu_ind

def residual(muS):
    G1, G2 = chol_seed(muS)
    Gs, mu_ind = complete(G1, G2)
    Fr = []
    # n=0 relations
    for ax in (1, 2):
        D0, D1, D2 = Dnp[(0, 0, ax)], Dnp[(0, 1, ax)], Dnp[(0, 2, ax)]
        S0 = shiftmaps[(0, ax)]
        for c in range(6):
            val = float(D2[0] @ G2[:, c]) - S0[0, c] + (D0[0, 0] if c == 0 else 0.0)
            if c < 3:
                val += float(D1[0] @ G1[:, c])
            Fr.append(val)
    # induced-functional consistency on S
    for k, (i, j) in enumerate(S_unknown):
        Fr.append(mu_ind[mon_index[L.MonomialIndex(i, j)]] - muS[k])
    return np.array(Fr)

print("residual at prior:", np.linalg.norm(residual(mu0)))
print("residual at truth:", np.linalg.norm(residual(mutrue_S)))

def lm(x0, iters=100, verbose=True):
    x = x0.copy(); lam = 1e-3
    F = residual(x); nrm = np.linalg.norm(F)
    for it in range(iters):
        if nrm < 1e-13:
            break
        J = np.empty((len(F), len(x)))
        for c in range(len(x)):
            h = 1e-7 * max(abs(x[c]), 1.0)
            x2 = x.copy(); x2[c] += h
            J[:, c] = (residual(x2) - F) / h
        improved = False
        for _ in range(40):
            dx = np.linalg.solve(J.T @ J + lam * np.diag(np.diag(J.T @ J) + 1e-12), -J.T @ F)
            try:
                Fn = residual(x + dx)
            except np.linalg.LinAlgError:
                lam *= 10; continue
            if np.linalg.norm(Fn) < nrm:
                x = x + dx; F = Fn; nrm = np.linalg.norm(F)
                lam = max(lam / 3, 1e-14); improved = True
                break
            lam *= 10
        if verbose and (it % 5 == 0 or nrm < 1e-13):
            print(f"  it {it}: |F| {nrm:.3e} lam {lam:.1e}")
        if not improved:
            break
    return x, nrm

xstar, resid = lm(mu0)
print("final residual:", resid)
print("moment err on S vs true:", np.abs(xstar - mutrue_S).max())
G1, G2 = chol_seed(xstar)
Gs, mu_ind = complete(G1, G2)
mtrue = np.array([p.moment_float(m.i, m.j) for m in mons])
print("full induced moment err:", np.abs(mu_ind - mtrue).max())
