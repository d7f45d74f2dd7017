"""User-facing solve interface over the interior-point core.

solve() accepts an SdpProblem (the canonical pair) or a BlockSdp (restricted
dual / projected primal) and returns a Solution whose fields always mean:

  free_vars       the dual vector y of the pair,
  psd_blocks      the problem's own cone variables (Gram/restricted blocks
                  for max-sense problems, primal blocks for min-sense),
  eq_multipliers  multipliers of the problem's equality system; for max-sense
                  and restricted problems these are the entries of the
                  moment-side matrix (upper triangle, row-major, unscaled).

Statuses and +/-inf objectives follow the problem sense.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._linalg import smat, svec, svec_dim, sym, triu_indices, congruence_svec_matrix
from .conic import ConicProgram, DenseRows, ProjectedRows
from .ipm import (
    DUAL_INFEASIBLE,
    MAX_ITERATIONS,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    ConicResult,
    IpmOptions,
    solve_conic,
)
from .sketch import BlockSdp, lift_blocks
from .sos import SdpProblem


class Status(Enum):
    Optimal = "Optimal"
    Infeasible = "Infeasible"
    Unbounded = "Unbounded"
    MaxIterations = "MaxIterations"
    NumericalFailure = "NumericalFailure"


@dataclass
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 200
    step_fraction: float = 0.98
    infeasibility_tol: float = 1e-9
    mode: str = "interior_point"  # or "consensus"
    trace_path: Optional[str] = None
    keep_trace: bool = False
    # consensus-mode knobs
    rho: float = 1.0
    workers: int = 1
    admm_max_iterations: int = 20000
    admm_tolerance: float = 1e-7

    def ipm_options(self) -> IpmOptions:
        return IpmOptions(
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            step_fraction=self.step_fraction,
            infeasibility_tol=self.infeasibility_tol,
            trace=self.keep_trace or self.trace_path is not None,
        )


@dataclass
class KktResiduals:
    primal: float
    dual: float
    gap: float

    def __post_init__(self):
        self.primal = float(self.primal)
        self.dual = float(self.dual)
        self.gap = float(self.gap)

    def max(self) -> float:
        return max(self.primal, self.dual, self.gap)


@dataclass
class Solution:
    status: Status
    objective: float
    psd_blocks: List[np.ndarray] = field(default_factory=list)
    free_vars: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt: Optional[KktResiduals] = None
    iterations: int = 0
    solve_seconds: float = 0.0
    certificate: Optional[dict] = None
    moment_matrices: List[np.ndarray] = field(default_factory=list)
    dual_slacks: List[np.ndarray] = field(default_factory=list)
    trace: list = field(default_factory=list)

    def __post_init__(self):
        self.objective = float(self.objective)
        self.free_vars = np.asarray(self.free_vars, dtype=float)
        self.eq_multipliers = np.asarray(self.eq_multipliers, dtype=float)

    @property
    def seconds_per_iteration(self) -> float:
        return self.solve_seconds / max(self.iterations, 1)

    def to_json_dict(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "psd_blocks": [b.tolist() for b in self.psd_blocks],
            "free_vars": self.free_vars.tolist(),
            "eq_multipliers": self.eq_multipliers.tolist(),
            "kkt": None if self.kkt is None else
                {"primal": self.kkt.primal, "dual": self.kkt.dual, "gap": self.kkt.gap},
            "iterations": self.iterations,
            "solve_seconds": self.solve_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _plain_upper(mats: Sequence[np.ndarray]) -> np.ndarray:
    parts = []
    for m in mats:
        ia, ib = triu_indices(m.shape[0])
        parts.append(m[ia, ib])
    return np.concatenate(parts) if parts else np.zeros(0)


def _mats_from_plain_upper(vec: np.ndarray, dims: Sequence[int]) -> List[np.ndarray]:
    out = []
    start = 0
    for n in dims:
        k = svec_dim(n)
        seg = vec[start:start + k]
        ia, ib = triu_indices(n)
        m = np.zeros((n, n))
        m[ia, ib] = seg
        m[ib, ia] = seg
        out.append(m)
        start += k
    return out


# ---------------------------------------------------------------------------
# Layout builders.
# ---------------------------------------------------------------------------


def _conic_from_pair(problem: SdpProblem) -> ConicProgram:
    m = problem.num_constraints
    tensors = [problem.constraint_tensor(b) for b in range(problem.num_blocks)]
    ops = DenseRows(tensors, None, m)
    return ConicProgram(
        ops=ops,
        rhs=problem.rhs,
        block_costs=list(problem.cost_blocks),
        free_cost=None,
        gap_offset=problem.obj_offset,
    )


class _RestrictedReduction:
    """Free-variable elimination data for a restricted dual, cached per problem."""

    def __init__(self, bs: BlockSdp):
        base = bs.base
        sdims = [svec_dim(n) for n in base.block_dims]
        offsets = np.concatenate([[0], np.cumsum(sdims)]).astype(int)
        total = int(offsets[-1])
        m = base.num_constraints

        a_mat = np.zeros((total, m))
        for j, (mats, _) in enumerate(base.constraints):
            a_mat[:, j] = np.concatenate([svec(a) for a in mats])
        c_vec = np.concatenate([svec(c) for c in base.cost_blocks])

        if m:
            gram = a_mat.T @ a_mat
            try:
                cho = cho_factor(gram + 1e-14 * np.trace(gram) / max(m, 1) * np.eye(m))
                self._solve_gram = lambda rhs: cho_solve(cho, rhs)
            except np.linalg.LinAlgError:
                pinv = np.linalg.pinv(gram)
                self._solve_gram = lambda rhs: pinv @ rhs
            w_obj = a_mat @ self._solve_gram(base.rhs)
            # Orthonormal basis of the complement of span{svec(A_j)}.
            u, s, vh = np.linalg.svd(a_mat, full_matrices=True)
            tol = (s[0] if s.size else 1.0) * 1e-11
            rank = int(np.sum(s > tol))
            perp = u[:, rank:]
        else:
            self._solve_gram = lambda rhs: rhs
            w_obj = np.zeros(total)
            perp = np.eye(total)

        self.base = base
        self.offsets = offsets
        self.a_mat = a_mat
        self.w_obj = w_obj
        self.perp = perp
        self.c_vec = c_vec
        self.rhs = perp.T @ c_vec
        self.const = float(w_obj @ c_vec) + base.obj_offset
        self.row_segments = [
            np.ascontiguousarray(perp[offsets[b]:offsets[b + 1], :].T)
            for b in range(base.num_blocks)
        ]

    def segment(self, vec: np.ndarray, b: int) -> np.ndarray:
        return vec[self.offsets[b]:self.offsets[b + 1]]

    def recover_y(self, lift_vec: np.ndarray) -> np.ndarray:
        if self.base.num_constraints == 0:
            return np.zeros(0)
        return self._solve_gram(self.a_mat.T @ (self.c_vec - lift_vec))

    def moment_matrices(self, w: np.ndarray) -> List[np.ndarray]:
        xv = self.w_obj - self.perp @ w
        return [
            smat(self.segment(xv, b), n)
            for b, n in enumerate(self.base.block_dims)
        ]


def _conic_from_restricted(bs: BlockSdp, red: _RestrictedReduction) -> ConicProgram:
    ops = ProjectedRows(
        base_dims=bs.base.block_dims,
        u_stacks=[ens.stack() for ens in bs.ensembles],
        row_segments=red.row_segments,
    )
    costs = []
    for b, ens in enumerate(bs.ensembles):
        w_b = smat(red.segment(red.w_obj, b), bs.base.block_dims[b])
        u = ens.stack()
        d_stack = np.einsum("inr,nm,ims->irs", u, w_b, u, optimize=True)
        costs.extend(sym(d_stack[i]) for i in range(ens.N))
    return ConicProgram(
        ops=ops, rhs=red.rhs, block_costs=costs, free_cost=None,
        gap_offset=red.const, gap_flip=True,
    )


def _conic_from_projected(bs: BlockSdp) -> ConicProgram:
    base = bs.base
    sdims = [svec_dim(n) for n in base.block_dims]
    offsets = np.concatenate([[0], np.cumsum(sdims)]).astype(int)
    nf = int(offsets[-1])
    m = base.num_constraints

    couple_rows = sum(svec_dim(ens.r) * ens.N for ens in bs.ensembles)
    n_rows = m + couple_rows
    free_cols = np.zeros((n_rows, nf))
    for j, (mats, _) in enumerate(base.constraints):
        free_cols[j, :] = np.concatenate([svec(a) for a in mats])

    tensors = []
    rhs = np.concatenate([base.rhs, np.zeros(couple_rows)])
    row = m
    for b, ens in enumerate(bs.ensembles):
        for u in ens.matrices:
            k = svec_dim(ens.r)
            t = np.zeros((n_rows, ens.r, ens.r))
            for idx in range(k):
                e = np.zeros(k)
                e[idx] = 1.0
                t[row + idx] = smat(e, ens.r)
            # coupling rows: svec(W) - svec(U' X U) = 0
            phi = congruence_svec_matrix(u)  # svec_r -> svec_n of S -> U S U'
            free_cols[row:row + k, offsets[b]:offsets[b + 1]] = -phi.T
            tensors.append(t)
            row += k

    ops = DenseRows(tensors, free_cols, n_rows)
    free_cost = np.concatenate([svec(c) for c in base.cost_blocks])
    return ConicProgram(
        ops=ops, rhs=rhs, block_costs=None, free_cost=free_cost,
        gap_offset=base.obj_offset,
    )


# ---------------------------------------------------------------------------
# Status mapping and the public solve.
# ---------------------------------------------------------------------------

_MAPPING = {
    ("min", PRIMAL_INFEASIBLE): (Status.Infeasible, np.inf),
    ("min", DUAL_INFEASIBLE): (Status.Unbounded, -np.inf),
    ("max", PRIMAL_INFEASIBLE): (Status.Unbounded, np.inf),
    ("max", DUAL_INFEASIBLE): (Status.Infeasible, -np.inf),
}


def _finish(sol: Solution, config: SolverConfig, res: ConicResult, t0: float) -> Solution:
    sol.iterations = res.iterations
    sol.solve_seconds = time.perf_counter() - t0
    sol.trace = res.trace if config.keep_trace or config.trace_path else []
    if config.trace_path and res.trace:
        with open(config.trace_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(res.trace[0].keys()))
            writer.writeheader()
            writer.writerows(res.trace)
    return sol


def solve(problem: Union[SdpProblem, BlockSdp], config: SolverConfig | None = None) -> Solution:
    """Solve the pair (SdpProblem) or a projected/restricted problem (BlockSdp)."""
    config = config or SolverConfig()
    if config.mode == "consensus":
        from .consensus import solve_consensus

        return solve_consensus(problem, config)
    if isinstance(problem, SdpProblem):
        return _solve_pair(problem, config)
    if isinstance(problem, BlockSdp):
        if problem.kind == "restricted_dual":
            return _solve_restricted(problem, config)
        return _solve_projected(problem, config)
    raise TypeError(f"cannot solve object of type {type(problem)!r}")


def _solve_pair(problem: SdpProblem, config: SolverConfig) -> Solution:
    t0 = time.perf_counter()
    res = solve_conic(_conic_from_pair(problem), config.ipm_options())
    sense = problem.sense
    if res.status == OPTIMAL:
        y = res.w
        slacks = [sym(z) for z in res.z_blocks]
        if sense == "max":
            objective = res.dual_objective + problem.obj_offset
            psd = slacks
            eq_mult = _plain_upper(res.x_blocks)
        else:
            objective = res.primal_objective + problem.obj_offset
            psd = res.x_blocks
            eq_mult = y.copy()
        sol = Solution(
            status=Status.Optimal,
            objective=objective,
            psd_blocks=psd,
            free_vars=y,
            eq_multipliers=eq_mult,
            moment_matrices=list(res.x_blocks),
            dual_slacks=slacks,
        )
        sol.kkt = kkt_residuals(problem, sol)
        return _finish(sol, config, res, t0)
    if (sense, res.status) in _MAPPING:
        status, obj = _MAPPING[(sense, res.status)]
        sol = Solution(status=status, objective=obj, certificate=res.certificate)
        return _finish(sol, config, res, t0)
    status = Status.MaxIterations if res.status == MAX_ITERATIONS else Status.NumericalFailure
    best = res.dual_objective if sense == "max" else res.primal_objective
    slacks = [sym(z) for z in res.z_blocks]
    sol = Solution(
        status=status,
        objective=best + problem.obj_offset,
        psd_blocks=slacks if sense == "max" else res.x_blocks,
        free_vars=res.w,
        eq_multipliers=_plain_upper(res.x_blocks) if sense == "max" else res.w.copy(),
        moment_matrices=list(res.x_blocks),
        dual_slacks=slacks,
    )
    sol.kkt = kkt_residuals(problem, sol)
    return _finish(sol, config, res, t0)


def _solve_restricted(bs: BlockSdp, config: SolverConfig) -> Solution:
    t0 = time.perf_counter()
    red = getattr(bs, "_reduction", None)
    if red is None:
        red = _RestrictedReduction(bs)
        bs._reduction = red
    prog = _conic_from_restricted(bs, red)
    res = solve_conic(prog, config.ipm_options())
    if res.status == OPTIMAL:
        blocks = [sym(x) for x in res.x_blocks]
        lifts = lift_blocks(bs, blocks)
        lift_vec = np.concatenate([svec(L) for L in lifts])
        y = red.recover_y(lift_vec)
        moments = red.moment_matrices(res.w)
        sol = Solution(
            status=Status.Optimal,
            objective=red.const - res.primal_objective,
            psd_blocks=blocks,
            free_vars=y,
            eq_multipliers=_plain_upper(moments),
            moment_matrices=moments,
        )
        sol.kkt = kkt_residuals(bs, sol)
        return _finish(sol, config, res, t0)
    if res.status == PRIMAL_INFEASIBLE:
        sol = Solution(status=Status.Infeasible, objective=-np.inf, certificate=res.certificate)
        return _finish(sol, config, res, t0)
    if res.status == DUAL_INFEASIBLE:
        sol = Solution(status=Status.Unbounded, objective=np.inf, certificate=res.certificate)
        return _finish(sol, config, res, t0)
    status = Status.MaxIterations if res.status == MAX_ITERATIONS else Status.NumericalFailure
    blocks = [sym(x) for x in res.x_blocks]
    moments = red.moment_matrices(res.w)
    lifts = lift_blocks(bs, blocks)
    y = red.recover_y(np.concatenate([svec(L) for L in lifts]))
    sol = Solution(
        status=status,
        objective=red.const - res.primal_objective,
        psd_blocks=blocks,
        free_vars=y,
        eq_multipliers=_plain_upper(moments),
        moment_matrices=moments,
    )
    sol.kkt = kkt_residuals(bs, sol)
    return _finish(sol, config, res, t0)


def _solve_projected(bs: BlockSdp, config: SolverConfig) -> Solution:
    t0 = time.perf_counter()
    base = bs.base
    prog = _conic_from_projected(bs)
    res = solve_conic(prog, config.ipm_options())
    m = base.num_constraints
    if res.status == OPTIMAL:
        x_mats = _x_from_free(res.u, base)
        y = res.w[:m]
        sol = Solution(
            status=Status.Optimal,
            objective=res.primal_objective + base.obj_offset,
            psd_blocks=[sym(b) for b in res.x_blocks],
            free_vars=y,
            eq_multipliers=res.w.copy(),
            moment_matrices=x_mats,
        )
        sol.kkt = kkt_residuals(bs, sol)
        return _finish(sol, config, res, t0)
    if (bs.sense, res.status) in _MAPPING:
        status, obj = _MAPPING[(bs.sense, res.status)]
        sol = Solution(status=status, objective=obj, certificate=res.certificate)
        return _finish(sol, config, res, t0)
    status = Status.MaxIterations if res.status == MAX_ITERATIONS else Status.NumericalFailure
    sol = Solution(
        status=status,
        objective=res.primal_objective + base.obj_offset,
        psd_blocks=[sym(b) for b in res.x_blocks],
        free_vars=res.w[:m],
        eq_multipliers=res.w.copy(),
        moment_matrices=_x_from_free(res.u, base),
    )
    sol.kkt = kkt_residuals(bs, sol)
    return _finish(sol, config, res, t0)


def _x_from_free(u_vec: np.ndarray, base: SdpProblem) -> List[np.ndarray]:
    out = []
    start = 0
    for n in base.block_dims:
        k = svec_dim(n)
        out.append(smat(u_vec[start:start + k], n))
        start += k
    return out


def solve_consensus(problem: BlockSdp, config: SolverConfig | None = None) -> Solution:
    from .consensus import solve_consensus as _impl

    return _impl(problem, config or SolverConfig())


# ---------------------------------------------------------------------------
# Replay-verifiable residuals.
# ---------------------------------------------------------------------------


def _pair_residuals(base: SdpProblem, y: np.ndarray, slack_or_lift: List[np.ndarray],
                    x_mats: List[np.ndarray], proj_cone_viol: float) -> KktResiduals:
    c_norm = np.sqrt(sum(float(np.sum(c * c)) for c in base.cost_blocks))
    b = base.rhs
    # Equation sum_j y_j A_j + S = C, per block, aggregated in Frobenius norm.
    slacks = base.dual_slack(y)
    pnum = np.sqrt(
        sum(
            float(np.sum((lift - s) ** 2))
            for lift, s in zip(slack_or_lift, slacks)
        )
    )
    primal = pnum / (1.0 + c_norm)
    dual_eq = np.linalg.norm(base.constraint_values(x_mats) - b) / (1.0 + np.linalg.norm(b))
    dual = max(dual_eq, proj_cone_viol)
    by = float(b @ y)
    cx = base.primal_cost(x_mats)
    gap = abs(by - cx) / (1.0 + abs(by) + abs(cx))
    return KktResiduals(primal=primal, dual=dual, gap=gap)


def kkt_residuals(problem: Union[SdpProblem, BlockSdp], solution: Solution) -> KktResiduals:
    """Pure recomputation of (primal equation, dual/moment side, gap) residuals."""
    if isinstance(problem, SdpProblem):
        y = solution.free_vars
        if problem.sense == "max":
            s_mats = solution.psd_blocks
            x_mats = _mats_from_plain_upper(solution.eq_multipliers, problem.block_dims)
        else:
            x_mats = solution.psd_blocks
            s_mats = solution.dual_slacks or problem.dual_slack(y)
        viol = _cone_violation(x_mats)
        return _pair_residuals(problem, y, s_mats, x_mats, viol)

    bs = problem
    base = bs.base
    if bs.kind == "restricted_dual":
        y = solution.free_vars
        lifts = lift_blocks(bs, solution.psd_blocks)
        x_mats = (
            solution.moment_matrices
            or _mats_from_plain_upper(solution.eq_multipliers, base.block_dims)
        )
        viol = _projected_violation(bs, x_mats)
        return _pair_residuals(base, y, lifts, x_mats, viol)

    # projected primal: X in moment_matrices, W blocks PSD, duals y + S_i.
    x_mats = solution.moment_matrices
    y = solution.free_vars
    viol = _projected_violation(bs, x_mats)
    dual_eq = np.linalg.norm(base.constraint_values(x_mats) - base.rhs) / (
        1.0 + np.linalg.norm(base.rhs)
    )
    c_norm = np.sqrt(sum(float(np.sum(c * c)) for c in base.cost_blocks))
    by = float(base.rhs @ y)
    cx = base.primal_cost(x_mats)
    gap = abs(by - cx) / (1.0 + abs(by) + abs(cx))
    return KktResiduals(primal=max(dual_eq, viol), dual=dual_eq, gap=gap)


def _cone_violation(mats: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for m in mats:
        if m.size == 0:
            continue
        lam = float(np.linalg.eigvalsh(sym(m))[0])
        worst = max(worst, -lam / (1.0 + float(np.linalg.norm(m))))
    return worst


def _projected_violation(bs: BlockSdp, x_mats: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for ens, x in zip(bs.ensembles, x_mats):
        for u in ens.matrices:
            proj = u.T @ x @ u
            lam = float(np.linalg.eigvalsh(sym(proj))[0])
            worst = max(worst, -lam / (1.0 + float(np.linalg.norm(proj))))
    return worst
