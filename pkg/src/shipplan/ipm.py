"""Homogeneous self-dual interior-point method for second-order cone programs.

Solves

    minimize c'x  subject to  A x = b,  G x + s = h,  s in K

with K a product of a nonnegative orthant of size ``l`` and second-order
cones of dimensions ``q``. Iterates use Nesterov-Todd scaling and a
Mehrotra predictor-corrector; each Newton system is a sparse KKT system
factored with SuperLU, stabilized by static regularization and iterative
refinement. Infeasibility and unboundedness are detected from the
homogeneous embedding and returned with certificates.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical-limit"


@dataclass
class IPMResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    iterations: int
    pcost: float
    dcost: float
    info: dict = field(default_factory=dict)


class _Cone:
    """Vectorized cone arithmetic; SOC blocks of equal dimension are batched."""

    def __init__(self, l: int, q):
        self.l = l
        by_dim = defaultdict(list)
        off = l
        for d in q:
            by_dim[int(d)].append(off)
            off += int(d)
        self.m = off
        self.groups = [(d, np.asarray(st)[:, None] + np.arange(d)) for d, st in sorted(by_dim.items())]
        self.degree = l + len(q)
        self.e = np.zeros(off)
        self.e[:l] = 1.0
        for _, idx in self.groups:
            self.e[idx[:, 0]] = 1.0

    # Jordan algebra ---------------------------------------------------
    def prod(self, u, v):
        out = np.empty_like(u)
        out[: self.l] = u[: self.l] * v[: self.l]
        for _, idx in self.groups:
            U, V = u[idx], v[idx]
            out[idx[:, 0]] = np.einsum("ij,ij->i", U, V)
            out[idx[:, 1:]] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        return out

    def div(self, u, v):
        """x with u o x = v."""
        out = np.empty_like(u)
        out[: self.l] = v[: self.l] / u[: self.l]
        for _, idx in self.groups:
            U, V = u[idx], v[idx]
            u0, u1 = U[:, 0], U[:, 1:]
            det = u0**2 - np.einsum("ij,ij->i", u1, u1)
            x0 = (u0 * V[:, 0] - np.einsum("ij,ij->i", u1, V[:, 1:])) / det
            out[idx[:, 0]] = x0
            out[idx[:, 1:]] = (V[:, 1:] - x0[:, None] * u1) / u0[:, None]
        return out

    def min_eig(self, u):
        vals = [u[: self.l]]
        for _, idx in self.groups:
            U = u[idx]
            vals.append(U[:, 0] - np.linalg.norm(U[:, 1:], axis=1))
        vals = np.concatenate(vals)
        return float(vals.min()) if vals.size else 1.0

    def max_step(self, x, dx):
        """Largest alpha with x + alpha dx in the cone (inf if unbounded)."""
        alpha = np.inf
        l = self.l
        neg = dx[:l] < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-x[:l][neg] / dx[:l][neg])))
        for _, idx in self.groups:
            X, D = x[idx], dx[idx]
            a = D[:, 0] ** 2 - np.einsum("ij,ij->i", D[:, 1:], D[:, 1:])
            bq = 2 * (X[:, 0] * D[:, 0] - np.einsum("ij,ij->i", X[:, 1:], D[:, 1:]))
            c = X[:, 0] ** 2 - np.einsum("ij,ij->i", X[:, 1:], X[:, 1:])
            c = np.maximum(c, 0.0)
            disc = bq**2 - 4 * a * c
            lin = a == 0
            with np.errstate(divide="ignore", invalid="ignore"):
                r_lin = np.where((bq < 0), -c / bq, np.inf)
                sq = np.sqrt(np.maximum(disc, 0.0))
                qq = -0.5 * (bq + np.where(bq >= 0, sq, -sq))
                r1 = qq / a
                r2 = c / qq
            r1 = np.where(np.isfinite(r1) & (r1 > 0), r1, np.inf)
            r2 = np.where(np.isfinite(r2) & (r2 > 0), r2, np.inf)
            quad = np.where(disc >= 0, np.minimum(r1, r2), np.inf)
            roots = np.where(lin, r_lin, quad)
            # also respect the t >= 0 half of the boundary
            with np.errstate(divide="ignore", invalid="ignore"):
                r_t = np.where(D[:, 0] < 0, -X[:, 0] / D[:, 0], np.inf)
            roots = np.minimum(roots, r_t)
            if roots.size:
                alpha = min(alpha, float(roots.min()))
        return alpha

    # Nesterov-Todd scaling ---------------------------------------------
    def scaling(self, s, z):
        return _NTScaling(self, s, z)


class _NTScaling:
    def __init__(self, cone: _Cone, s, z):
        self.cone = cone
        l = cone.l
        self.d = np.sqrt(s[:l] / z[:l])
        self.blocks = []
        lam = np.empty_like(s)
        lam[:l] = np.sqrt(s[:l] * z[:l])
        for d, idx in cone.groups:
            S, Z = s[idx], z[idx]
            sJs = S[:, 0] ** 2 - np.einsum("ij,ij->i", S[:, 1:], S[:, 1:])
            zJz = Z[:, 0] ** 2 - np.einsum("ij,ij->i", Z[:, 1:], Z[:, 1:])
            sJs = np.maximum(sJs, 1e-300)
            zJz = np.maximum(zJz, 1e-300)
            sb = S / np.sqrt(sJs)[:, None]
            zb = Z / np.sqrt(zJz)[:, None]
            gamma = np.sqrt(np.maximum((1 + np.einsum("ij,ij->i", sb, zb)) / 2, 1e-300))
            Jzb = zb.copy()
            Jzb[:, 1:] *= -1
            wb = (sb + Jzb) / (2 * gamma)[:, None]
            eta = (sJs / zJz) ** 0.25
            v = wb.copy()
            v[:, 0] += 1.0
            v /= np.sqrt(2 * (wb[:, 0] + 1))[:, None]
            J = np.diag(np.r_[1.0, -np.ones(d - 1)])
            vv = np.einsum("ki,kj->kij", v, v)
            W = eta[:, None, None] * (2 * vv - J)
            Jv = v.copy()
            Jv[:, 1:] *= -1
            Winv = (1 / eta)[:, None, None] * (2 * np.einsum("ki,kj->kij", Jv, Jv) - J)
            lam[idx] = np.einsum("kij,kj->ki", W, Z)
            self.blocks.append((idx, W, Winv))
        self.lam = lam

    def apply(self, x, inverse=False):
        out = np.empty_like(x)
        l = self.cone.l
        out[:l] = x[:l] / self.d if inverse else x[:l] * self.d
        for idx, W, Winv in self.blocks:
            M = Winv if inverse else W
            out[idx] = np.einsum("kij,kj->ki", M, x[idx])
        return out

    def wtw_triplets(self):
        l = self.cone.l
        rows = [np.arange(l)]
        cols = [np.arange(l)]
        vals = [self.d**2]
        for idx, W, _ in self.blocks:
            W2 = np.einsum("kij,kjl->kil", W, W)
            d = idx.shape[1]
            rows.append(np.repeat(idx, d, axis=1).ravel())
            cols.append(np.tile(idx, (1, d)).ravel())
            vals.append(W2.ravel())
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def solve_socp(
    c, A, b, G, h, l: int, q, *,
    feastol: float = 1e-8, abstol: float = 1e-8, reltol: float = 1e-8,
    max_iter: int = 100, regularization: float = 1e-9, refine: int = 3,
    inaccurate_tol: float | None = None, verbose: bool = False,
) -> IPMResult:
    """Solve the cone program.

    If the iteration stalls (collapsed step or iteration limit), the best
    iterate is still reported as optimal when its residuals and gap are all
    below ``inaccurate_tol`` (default sqrt of the strictest tolerance); the
    result then carries ``info["reduced_accuracy"] = True``.
    """
    if inaccurate_tol is None:
        inaccurate_tol = float(np.sqrt(min(feastol, abstol, reltol)))
    c = np.asarray(c, float)
    b = np.asarray(b, float)
    h = np.asarray(h, float)
    n = c.size
    A = sp.csc_matrix(A) if A is not None else sp.csc_matrix((0, n))
    G = sp.csc_matrix(G)
    p, m = A.shape[0], G.shape[0]
    cone = _Cone(l, q)
    if cone.m != m:
        raise ValueError(f"cone dimensions sum to {cone.m}, G has {m} rows")

    delta = regularization
    At, Gt = A.T.tocsc(), G.T.tocsc()
    static = sp.bmat([[None, At, Gt], [A, None, None], [G, None, None]], format="coo")
    static_r, static_c, static_v = static.row, static.col, static.data
    N = n + p + m
    reg_diag = np.concatenate([np.full(n, delta), np.full(p, -delta), np.full(m, -delta)])
    offz = n + p

    def assemble(scal):
        wr, wc, wv = scal.wtw_triplets()
        rows = np.concatenate([static_r, np.arange(N), wr + offz])
        cols = np.concatenate([static_c, np.arange(N), wc + offz])
        reg_vals = np.concatenate([static_v, reg_diag, -wv])
        K = sp.csc_matrix((reg_vals, (rows, cols)), shape=(N, N))
        exact = K - sp.diags(reg_diag, format="csc")
        return K, exact

    def factor(K):
        return splu(K, permc_spec="COLAMD", diag_pivot_thresh=0.0, options={"SymmetricMode": True})

    def kkt_solve(lu, exact, rhs):
        sol = lu.solve(rhs)
        nr = np.linalg.norm(rhs)
        for _ in range(refine):
            res = rhs - exact @ sol
            if np.linalg.norm(res) <= 1e-14 * (1 + nr):
                break
            sol += lu.solve(res)
        return sol

    # initialization with W = I
    class _Identity:
        def wtw_triplets(self):
            return np.arange(m), np.arange(m), np.ones(m)

    K0, E0 = assemble(_Identity())
    try:
        lu = factor(K0)
    except RuntimeError:
        lu = splu(K0)
    primal = kkt_solve(lu, E0, np.concatenate([np.zeros(n), b, h]))
    dual = kkt_solve(lu, E0, np.concatenate([-c, np.zeros(p), np.zeros(m)]))
    x = primal[:n]
    s = -primal[offz:]
    y = dual[n:offz]
    z = dual[offz:]
    a_p = -cone.min_eig(s)
    if a_p >= -1e-8:
        s = s + (1 + max(a_p, 0.0)) * cone.e
    a_d = -cone.min_eig(z)
    if a_d >= -1e-8:
        z = z + (1 + max(a_d, 0.0)) * cone.e
    tau, kappa = 1.0, 1.0

    nb = max(1.0, np.linalg.norm(b))
    nh = max(1.0, np.linalg.norm(h))
    nc = max(1.0, np.linalg.norm(c))
    status = NUMERICAL
    info: dict = {}
    best = None
    it = 0
    for it in range(max_iter + 1):
        rx = At @ y + Gt @ z + c * tau
        ry = A @ x - b * tau
        rz = s + G @ x - h * tau
        cx, by, hz = c @ x, b @ y, h @ z
        rt = kappa + cx + by + hz
        mu = (s @ z + tau * kappa) / (cone.degree + 1)

        pres = max(np.linalg.norm(ry) / nb, np.linalg.norm(rz) / nh) / tau
        dres = np.linalg.norm(rx) / nc / tau
        pcost, dcost = cx / tau, -(by + hz) / tau
        gap = s @ z / tau**2
        relgap = None
        if pcost < 0:
            relgap = gap / -pcost
        elif dcost > 0:
            relgap = gap / dcost
        if verbose:
            print(f"{it:3d} pcost={pcost: .6e} dcost={dcost: .6e} gap={gap:.1e} pres={pres:.1e} dres={dres:.1e} "
                  f"k/t={kappa / tau:.1e} mu={mu:.1e}")

        if pres < feastol and dres < feastol and (gap < abstol or (relgap is not None and relgap < reltol)):
            status = OPTIMAL
            break
        if hz + by < 0:
            pinf_rel = np.linalg.norm(At @ y + Gt @ z) / -(hz + by)
            if pinf_rel < feastol:
                status = INFEASIBLE
                info["certificate_residual"] = float(pinf_rel)
                break
        if cx < 0:
            dinf = max(np.linalg.norm(A @ x), np.linalg.norm(G @ x + s)) / -cx
            if dinf < feastol:
                status = UNBOUNDED
                info["certificate_residual"] = float(dinf)
                break
        quality = max(pres, dres, min(gap, relgap if relgap is not None else gap))
        if best is None or quality < best[0]:
            best = (quality, x / tau, y / tau, z / tau, s / tau, pcost, dcost)
        if it == max_iter:
            break

        scal = cone.scaling(s, z)
        lam = scal.lam
        try:
            K, exact = assemble(scal)
            lu = factor(K)
        except RuntimeError:
            info["reason"] = "KKT factorization failed"
            break

        sol1 = kkt_solve(lu, exact, np.concatenate([-c, b, h]))
        x1, y1, z1 = sol1[:n], sol1[n:offz], sol1[offz:]
        den = c @ x1 + b @ y1 + h @ z1 - kappa / tau

        def direction(eta, ds, dk):
            rhs = np.concatenate([-eta * rx, -eta * ry, -eta * rz + scal.apply(cone.div(lam, ds))])
            sol2 = kkt_solve(lu, exact, rhs)
            x2, y2, z2 = sol2[:n], sol2[n:offz], sol2[offz:]
            dtau = (-eta * rt + dk / tau - (c @ x2 + b @ y2 + h @ z2)) / den
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            dz = z2 + dtau * z1
            ds_ = -scal.apply(cone.div(lam, ds) + scal.apply(dz))
            dkap = -(dk + kappa * dtau) / tau
            return dx, dy, dz, ds_, dtau, dkap

        def step_to_boundary(dz, ds_, dtau, dkap):
            a = min(cone.max_step(s, ds_), cone.max_step(z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkap < 0:
                a = min(a, -kappa / dkap)
            return a

        # predictor
        ds_a = cone.prod(lam, lam)
        dk_a = kappa * tau
        dxa, dya, dza, dsa, dta, dka = direction(1.0, ds_a, dk_a)
        alpha_a = min(1.0, step_to_boundary(dza, dsa, dta, dka))
        sigma = float(np.clip((1 - alpha_a) ** 3, 0.0, 1.0))

        # corrector
        ds_c = ds_a + cone.prod(scal.apply(dsa, inverse=True), scal.apply(dza)) - sigma * mu * cone.e
        dk_c = dk_a + dka * dta - sigma * mu
        dx, dy, dz, ds_, dtau, dkap = direction(1.0 - sigma, ds_c, dk_c)
        alpha = min(1.0, 0.99 * step_to_boundary(dz, ds_, dtau, dkap))
        if not np.isfinite(alpha) or alpha < 1e-12:
            info["reason"] = "step length collapsed"
            break

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds_
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkap
        if not (np.all(np.isfinite(x)) and np.isfinite(tau)):
            info["reason"] = "non-finite iterate"
            break

    info.update(pres=float(pres), dres=float(dres), gap=float(gap))
    if status == OPTIMAL:
        return IPMResult(status, x / tau, y / tau, z / tau, s / tau, it, pcost, dcost, info)
    if status in (INFEASIBLE, UNBOUNDED):
        # certificates are normalized by the certificate's own scale
        if status == INFEASIBLE:
            k = -(hz + by)
            return IPMResult(status, np.full(n, np.nan), y / k, z / k, np.full(m, np.nan), it, np.inf, np.inf, info)
        k = -cx
        return IPMResult(status, x / k, np.full(p, np.nan), np.full(m, np.nan), s / k, it, -np.inf, -np.inf, info)
    if best is not None:
        _, xb, yb, zb, sb, pc, dc = best
        info["best_quality"] = float(best[0])
        if best[0] <= inaccurate_tol:
            info["reduced_accuracy"] = True
            return IPMResult(OPTIMAL, xb, yb, zb, sb, it, pc, dc, info)
        return IPMResult(NUMERICAL, xb, yb, zb, sb, it, pc, dc, info)
    return IPMResult(NUMERICAL, x, y, z, s, it, np.nan, np.nan, info)
