"""Primal-dual interior-point solver on the homogeneous self-dual embedding.

HKM-style symmetrized directions with a Mehrotra predictor-corrector, dense
Schur complements, free variables carried as a bordered block of the Schur
system.  The embedding supplies certificates when the solved problem
(min <D,S> + d'u  s.t. rows = g, S PSD) is infeasible or unbounded; the
tau/kappa indicator gates which branch is reported.

Embedding variables (X, u, w, Z, tau, kappa) satisfy at a solution:
    rows(X, u) - g tau              = 0
    adj(w) + Z - D tau              = 0   (cone part; free part: F'w - d tau = 0)
    g'w - <D,X> - d'u - kappa       = 0
    X, Z PSD, tau, kappa >= 0, complementary.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ._linalg import max_step_psd, sym
from .conic import ConicProgram

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal_infeasible"
DUAL_INFEASIBLE = "dual_infeasible"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class IpmOptions:
    tolerance: float = 1e-8
    max_iterations: int = 200
    step_fraction: float = 0.98
    infeasibility_tol: float = 1e-9
    tau_kappa_ratio: float = 1e-2
    regularization: float = 1e-10
    trace: bool = False


@dataclass
class ConicResult:
    status: str
    x_blocks: List[np.ndarray]
    u: np.ndarray
    w: np.ndarray
    z_blocks: List[np.ndarray]
    primal_objective: float
    dual_objective: float
    residuals: dict
    iterations: int
    certificate: Optional[dict] = None
    trace: list = field(default_factory=list)


def _chol_ok(mat) -> bool:
    try:
        np.linalg.cholesky(mat)
        return True
    except np.linalg.LinAlgError:
        return False


def _free_matrix(ops) -> np.ndarray:
    cached = getattr(ops, "_free_matrix_cache", None)
    if cached is not None:
        return cached
    F = np.zeros((ops.num_rows, ops.num_free))
    zero_blocks = [np.zeros((d, d)) for d in ops.block_dims]
    for t in range(ops.num_free):
        e = np.zeros(ops.num_free)
        e[t] = 1.0
        F[:, t] = ops.apply(zero_blocks, e)
    ops._free_matrix_cache = F
    return F


def _max_alpha(X, Z, dX, dZ, tau, kappa, dtau, dkappa, fraction) -> float:
    alpha = np.inf
    for x, dx in zip(X, dX):
        alpha = min(alpha, max_step_psd(x, dx))
    for z, dz in zip(Z, dZ):
        alpha = min(alpha, max_step_psd(z, dz))
    if dtau < 0:
        alpha = min(alpha, tau / (-dtau))
    if dkappa < 0:
        alpha = min(alpha, kappa / (-dkappa))
    return min(1.0, fraction * alpha)


def solve_conic(prog: ConicProgram, opts: IpmOptions | None = None) -> ConicResult:
    opts = opts or IpmOptions()
    ops = prog.ops
    dims = list(ops.block_dims)
    m = ops.num_rows
    nf = ops.num_free

    # Joint data scaling keeps the identity start sensible.
    s_g = max(1.0, float(np.linalg.norm(prog.rhs)))
    c_norm = np.sqrt(
        sum(float(np.sum(d * d)) for d in prog.block_costs)
        + float(prog.free_cost @ prog.free_cost)
    )
    s_c = max(1.0, c_norm)
    g = prog.rhs / s_g
    D = [d / s_c for d in prog.block_costs]
    d_free = prog.free_cost / s_c
    g_norm = float(np.linalg.norm(g))
    c_scaled = np.sqrt(sum(float(np.sum(d * d)) for d in D) + float(d_free @ d_free))

    X = [np.eye(d) for d in dims]
    Z = [np.eye(d) for d in dims]
    u = np.zeros(nf)
    w = np.zeros(m)
    tau, kappa = 1.0, 1.0
    nu = sum(dims) + 1.0
    F = _free_matrix(ops) if nf else None

    def cost_of(xb, uf) -> float:
        val = sum(float(np.tensordot(db, x)) for db, x in zip(D, xb))
        if nf:
            val += float(d_free @ uf)
        return val

    def scaled_residuals():
        # Residuals in raw data units so termination matches external replay.
        xh = [x / tau for x in X]
        uh = u / tau
        wh = w / tau
        zh = [z / tau for z in Z]
        pres = s_g * np.linalg.norm(ops.apply(xh, uh) - g) / (1.0 + s_g * g_norm)
        adjb = ops.adjoint_blocks(wh)
        dn2 = sum(float(np.sum((ab + zb - db) ** 2)) for ab, zb, db in zip(adjb, zh, D))
        if nf:
            dn2 += float(np.sum((ops.adjoint_free(wh) - d_free) ** 2))
        dres = s_c * np.sqrt(dn2) / (1.0 + s_c * c_scaled)
        pobj = cost_of(xh, uh) * s_c * s_g
        dobj = float(g @ wh) * s_c * s_g
        sign = -1.0 if prog.gap_flip else 1.0
        pu = prog.gap_offset + sign * pobj
        du = prog.gap_offset + sign * dobj
        gap = abs(pu - du) / (1.0 + abs(pu) + abs(du))
        return pres, dres, gap, pobj, dobj

    trace_rows: list = []
    status = MAX_ITERATIONS
    certificate = None
    it = 0
    stalled = 0
    best_score = np.inf
    best_state = None
    last_alpha = 0.0

    for it in range(1, opts.max_iterations + 1):
        pres, dres, gap, pobj, dobj = scaled_residuals()
        mu = (sum(float(np.tensordot(x, z)) for x, z in zip(X, Z)) + tau * kappa) / nu
        if opts.trace:
            trace_rows.append(dict(iteration=it, mu=mu, primal=pres, dual=dres,
                                   gap=gap, step=last_alpha, tau=tau, kappa=kappa))
        score = max(pres, dres, gap)
        if score < best_score:
            best_score = score
            best_state = ([x.copy() for x in X], u.copy(), w.copy(),
                          [z.copy() for z in Z], tau, kappa)
        if pres <= opts.tolerance and dres <= opts.tolerance and gap <= opts.tolerance:
            status = OPTIMAL
            break

        # Infeasibility certificates; tau/kappa gates the declaration.
        tk_gate = tau <= opts.tau_kappa_ratio * max(kappa, 1e-30)
        by = float(g @ w)
        if by > 0.0 and tk_gate:
            wn = w / by
            zn = [z / by for z in Z]
            adjb = ops.adjoint_blocks(wn)
            cert_res = np.sqrt(
                sum(float(np.sum((ab + zb) ** 2)) for ab, zb in zip(adjb, zn))
                + (float(np.sum(ops.adjoint_free(wn) ** 2)) if nf else 0.0)
            )
            if cert_res <= opts.infeasibility_tol * (1.0 + np.linalg.norm(wn)):
                status = PRIMAL_INFEASIBLE
                certificate = {"w": wn, "z_blocks": zn}
                break
        cx = cost_of(X, u)
        if cx < 0.0 and tk_gate:
            xn = [x / (-cx) for x in X]
            un = u / (-cx)
            cert_res = float(np.linalg.norm(ops.apply(xn, un)))
            xn_norm = np.sqrt(sum(float(np.sum(x * x)) for x in xn))
            if cert_res <= opts.infeasibility_tol * (1.0 + xn_norm):
                status = DUAL_INFEASIBLE
                certificate = {"x_blocks": xn, "u": un}
                break

        if not all(_chol_ok(z) for z in Z) or not all(_chol_ok(x) for x in X):
            status = NUMERICAL_FAILURE
            break
        zinvs = [sym(np.linalg.solve(z, np.eye(z.shape[0]))) for z in Z]

        M = ops.schur(X, zinvs)

        r1 = ops.apply(X, u) - g * tau
        adjw = ops.adjoint_blocks(w)
        r2b = [ab + z - db * tau for ab, z, db in zip(adjw, Z, D)]
        r2f = (ops.adjoint_free(w) - d_free * tau) if nf else np.zeros(0)
        r3 = float(g @ w) - cost_of(X, u) - kappa

        xdz = [x @ db @ zi for x, db, zi in zip(X, D, zinvs)]
        p_vec = ops.row_inner(xdz)
        p_d = sum(float(np.tensordot(db, sym(t))) for db, t in zip(D, xdz))

        dim = m + nf + 1
        border = np.zeros((dim, dim))
        border[:m, :m] = M
        if nf:
            border[:m, m:m + nf] = F
            border[m:m + nf, :m] = F.T
            border[m:m + nf, dim - 1] = -d_free
            border[dim - 1, m:m + nf] = -d_free
        border[:m, dim - 1] = -(g + p_vec)
        border[dim - 1, :m] = g - p_vec
        border[dim - 1, dim - 1] = p_d + kappa / tau

        lu = None
        reg = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for _ in range(10):
                try:
                    cand = lu_factor(border + reg * np.eye(dim), check_finite=False)
                    diag = np.abs(np.diag(cand[0]))
                    if diag.size == 0 or (
                        np.all(np.isfinite(diag)) and diag.min() > 1e-14 * max(diag.max(), 1e-300)
                    ):
                        lu = cand
                        break
                except Exception:
                    pass
                reg = opts.regularization if reg == 0.0 else reg * 10.0
                if reg > 1e-2:
                    break
        if lu is None:
            status = NUMERICAL_FAILURE
            break

        def newton_pass(rho_blocks, rho_tk):
            corr = [
                rb @ zi - x + x @ r2 @ zi
                for rb, zi, x, r2 in zip(rho_blocks, zinvs, X, r2b)
            ]
            q_vec = ops.row_inner(corr)
            q_d = sum(float(np.tensordot(db, sym(c))) for db, c in zip(D, corr))
            rhs = np.zeros(dim)
            rhs[:m] = -r1 - q_vec
            if nf:
                rhs[m:m + nf] = -r2f
            rhs[dim - 1] = -r3 + q_d + (rho_tk - tau * kappa) / tau
            sol = lu_solve(lu, rhs, check_finite=False)
            # Refine against the unregularized system; recovers accuracy lost
            # to the diagonal regularization and late-stage ill-conditioning.
            for _ in range(3):
                resid = rhs - border @ sol
                if np.linalg.norm(resid) <= 1e-14 * (np.linalg.norm(rhs) + 1.0):
                    break
                sol = sol + lu_solve(lu, resid, check_finite=False)
            dw = sol[:m]
            du = sol[m:m + nf]
            dtau = float(sol[dim - 1])
            adj_dw = ops.adjoint_blocks(dw)
            dZ = [-r2 + db * dtau - ab for r2, db, ab in zip(r2b, D, adj_dw)]
            dX = [
                sym(c - dtau * t + x @ ab @ zi)
                for c, t, x, ab, zi in zip(corr, xdz, X, adj_dw, zinvs)
            ]
            dkappa = (rho_tk - tau * kappa - kappa * dtau) / tau
            return dX, du, dw, dZ, dtau, dkappa

        zero_rho = [np.zeros((d, d)) for d in dims]
        dXa, dua, dwa, dZa, dtaua, dkappaa = newton_pass(zero_rho, 0.0)
        alpha_a = _max_alpha(X, Z, dXa, dZa, tau, kappa, dtaua, dkappaa, 1.0)
        mu_aff = (
            sum(
                float(np.tensordot(x + alpha_a * dx, z + alpha_a * dz))
                for x, dx, z, dz in zip(X, dXa, Z, dZa)
            )
            + (tau + alpha_a * dtaua) * (kappa + alpha_a * dkappaa)
        ) / nu
        sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-8, 1.0 - 1e-8))

        rho_blocks = [sigma * mu * np.eye(d) - dxa @ dza
                      for d, dxa, dza in zip(dims, dXa, dZa)]
        rho_tk = sigma * mu - dtaua * dkappaa
        dX, du, dw, dZ, dtau, dkappa = newton_pass(rho_blocks, rho_tk)

        alpha = _max_alpha(X, Z, dX, dZ, tau, kappa, dtau, dkappa, opts.step_fraction)
        for _ in range(40):
            if alpha <= 0:
                break
            ok = (
                tau + alpha * dtau > 0
                and kappa + alpha * dkappa > 0
                and all(_chol_ok(sym(x + alpha * dx)) for x, dx in zip(X, dX))
                and all(_chol_ok(sym(z + alpha * dz)) for z, dz in zip(Z, dZ))
            )
            if ok:
                break
            alpha *= 0.8
        else:
            status = NUMERICAL_FAILURE
            break

        if alpha < 1e-8:
            stalled += 1
            if stalled >= 3:
                status = MAX_ITERATIONS
                break
        else:
            stalled = 0

        X = [sym(x + alpha * dx) for x, dx in zip(X, dX)]
        Z = [sym(z + alpha * dz) for z, dz in zip(Z, dZ)]
        u = u + alpha * du
        w = w + alpha * dw
        tau += alpha * dtau
        kappa += alpha * dkappa
        last_alpha = alpha

    if status not in (OPTIMAL, PRIMAL_INFEASIBLE, DUAL_INFEASIBLE) and best_state is not None:
        cur = max(scaled_residuals()[:3])
        if best_score < cur:
            X, u, w, Z, tau, kappa = best_state
        if status == NUMERICAL_FAILURE and best_score < 1e-4:
            # The factorization gave out only after the residuals stalled.
            status = MAX_ITERATIONS
    pres, dres, gap, pobj, dobj = scaled_residuals()
    return ConicResult(
        status=status,
        x_blocks=[x * (s_g / tau) for x in X],
        u=u * (s_g / tau),
        w=w * (s_c / tau),
        z_blocks=[z * (s_c / tau) for z in Z],
        primal_objective=pobj,
        dual_objective=dobj,
        residuals={"primal": pres, "dual": dres, "gap": gap},
        iterations=it,
        certificate=certificate,
        trace=trace_rows,
    )
