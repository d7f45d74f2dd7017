"""Compile SOS membership and polynomial lower-bound programs to SDP data.

An SdpProblem is the canonical primal/dual pair

    primal:  min <C, X>   s.t.  <A_j, X> = b_j,  X PSD (per block)
    dual:    max b'y      s.t.  sum_j y_j A_j + S = C,  S PSD (per block)

Compiled programs are emitted so that the Gram matrix of the certificate
lives in the dual-slack position S: C holds one particular Gram
representative of the target polynomial and the A_j span the kernel of the
coefficient-matching map (plus one matrix per free scalar such as the lower
bound).  Restricting S to sums of projected blocks then restricts the SOS
cone, and the multipliers of the matrix equation form the moment matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._linalg import SQRT2, nullspace, smat, svec_dim, triu_indices
from .polynomial import (
    Basis,
    DegreeOverflowError,
    Monomial,
    Polynomial,
    grlex_key,
    monomial_basis,
    mul_monomials,
)

SYMMETRY_TOL = 1e-14


@dataclass(frozen=True)
class GramMap:
    """Coefficient-matching structure: monomial -> Gram positions producing it."""

    basis: Basis
    rows: Dict[Monomial, List[Tuple[int, int, int]]]

    def matched_monomials(self) -> List[Monomial]:
        return sorted(self.rows, key=grlex_key)


def gram_map(basis: Basis) -> GramMap:
    """For each monomial a reachable as m_i * m_j, list pairs (i, j, mult), i <= j.

    mult counts the symmetric occurrences: 2 off the diagonal, 1 on it.
    """
    rows: Dict[Monomial, List[Tuple[int, int, int]]] = {}
    n = len(basis)
    for i in range(n):
        for j in range(i, n):
            mono = mul_monomials(basis.elements[i], basis.elements[j])
            rows.setdefault(mono, []).append((i, j, 1 if i == j else 2))
    return GramMap(basis=basis, rows=rows)


@dataclass(frozen=True)
class MomentMeta:
    """Where the measure lives in a compiled problem: which PSD block carries
    the moment structure and how matrix positions map to monomials."""

    block: int
    basis: Basis
    rows: Dict[Monomial, List[Tuple[int, int, int]]]


@dataclass
class SdpProblem:
    """Canonical SDP pair data; see module docstring for both readings."""

    block_dims: Tuple[int, ...]
    cost_blocks: Tuple[np.ndarray, ...]
    constraints: List[Tuple[Tuple[np.ndarray, ...], float]]
    sense: str = "min"
    obj_offset: float = 0.0
    moment_meta: Optional[MomentMeta] = None

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        self.block_dims = tuple(int(d) for d in self.block_dims)
        self.cost_blocks = tuple(np.asarray(c, dtype=float) for c in self.cost_blocks)
        for d, c in zip(self.block_dims, self.cost_blocks):
            _check_symmetric(c, d, "cost")
        checked = []
        for mats, rhs in self.constraints:
            mats = tuple(np.asarray(a, dtype=float) for a in mats)
            for d, a in zip(self.block_dims, mats):
                _check_symmetric(a, d, "constraint")
            checked.append((mats, float(rhs)))
        self.constraints = checked

    # -- structure -----------------------------------------------------
    @property
    def num_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def num_free(self) -> int:
        """Length of the dual vector y (the free scalars of the dual reading)."""
        return self.num_constraints

    @property
    def n(self) -> int:
        """Largest cone dimension."""
        return max(self.block_dims)

    @property
    def rhs(self) -> np.ndarray:
        return np.array([b for _, b in self.constraints])

    def constraint_tensor(self, block: int) -> np.ndarray:
        """Stack of A_{j, block} as an (m, n_b, n_b) array."""
        d = self.block_dims[block]
        if not self.constraints:
            return np.zeros((0, d, d))
        return np.stack([mats[block] for mats, _ in self.constraints])

    # -- the two readings ----------------------------------------------
    def dual_slack(self, y: np.ndarray) -> List[np.ndarray]:
        """S_b = C_b - sum_j y_j A_{j,b}."""
        out = []
        for b in range(self.num_blocks):
            s = self.cost_blocks[b].copy()
            for yj, (mats, _) in zip(y, self.constraints):
                if yj != 0.0:
                    s -= yj * mats[b]
            out.append(s)
        return out

    def constraint_values(self, x_blocks: Sequence[np.ndarray]) -> np.ndarray:
        return np.array(
            [sum(float(np.tensordot(a, x)) for a, x in zip(mats, x_blocks))
             for mats, _ in self.constraints]
        )

    def primal_cost(self, x_blocks: Sequence[np.ndarray]) -> float:
        return sum(float(np.tensordot(c, x)) for c, x in zip(self.cost_blocks, x_blocks))

    # -- JSON (sparse upper-triangle coordinate form) --------------------
    def to_json_dict(self) -> dict:
        data = {
            "type": "sdp_problem",
            "sense": self.sense,
            "block_dims": list(self.block_dims),
            "obj_offset": self.obj_offset,
            "cost_blocks": [_mat_coords(c) for c in self.cost_blocks],
            "constraints": [
                {"rhs": b, "blocks": [_mat_coords(a) for a in mats]}
                for mats, b in self.constraints
            ],
        }
        if self.moment_meta is not None:
            data["moment_meta"] = {
                "block": self.moment_meta.block,
                "num_vars": self.moment_meta.basis.num_vars,
                "max_degree": self.moment_meta.basis.max_degree,
            }
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json_dict(data: dict) -> "SdpProblem":
        dims = [int(d) for d in data["block_dims"]]
        costs = tuple(
            _mat_from_coords(c, d) for c, d in zip(data["cost_blocks"], dims)
        )
        cons = [
            (
                tuple(_mat_from_coords(a, d) for a, d in zip(entry["blocks"], dims)),
                float(entry["rhs"]),
            )
            for entry in data["constraints"]
        ]
        meta = None
        if "moment_meta" in data:
            m = data["moment_meta"]
            basis = monomial_basis(int(m["num_vars"]), int(m["max_degree"]))
            meta = MomentMeta(block=int(m["block"]), basis=basis, rows=gram_map(basis).rows)
        return SdpProblem(
            block_dims=tuple(dims),
            cost_blocks=costs,
            constraints=cons,
            sense=data.get("sense", "min"),
            obj_offset=float(data.get("obj_offset", 0.0)),
            moment_meta=meta,
        )

    @staticmethod
    def from_json(text: str) -> "SdpProblem":
        return SdpProblem.from_json_dict(json.loads(text))


def _check_symmetric(mat: np.ndarray, dim: int, what: str):
    if mat.shape != (dim, dim):
        raise ValueError(f"{what} matrix has shape {mat.shape}, expected ({dim}, {dim})")
    skew = np.abs(mat - mat.T).max(initial=0.0)
    scale = max(1.0, np.abs(mat).max(initial=0.0))
    if skew > SYMMETRY_TOL * scale * 10:
        raise ValueError(f"{what} matrix is not symmetric (skew {skew:.3e})")


def _mat_coords(mat: np.ndarray) -> dict:
    n = mat.shape[0]
    ia, ib = triu_indices(n)
    vals = mat[ia, ib]
    keep = vals != 0.0
    return {
        "i": ia[keep].tolist(),
        "j": ib[keep].tolist(),
        "v": vals[keep].tolist(),
    }


def _mat_from_coords(data: dict, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    ii = np.asarray(data["i"], dtype=int)
    jj = np.asarray(data["j"], dtype=int)
    vv = np.asarray(data["v"], dtype=float)
    out[ii, jj] = vv
    out[jj, ii] = vv
    return out


# ---------------------------------------------------------------------------
# Generic coefficient-matching compiler.
# ---------------------------------------------------------------------------


@dataclass
class GramBlockSpec:
    """One PSD block of a certificate and how its entries enter the identity.

    entry_polys[k] is the polynomial contributed by a unit value at the k-th
    upper-triangle position (i <= j) of the block, diagonal multiplicity 1 and
    off-diagonal multiplicity 2 already included.
    """

    basis: Basis
    entry_polys: List[Polynomial]
    objective: Optional[np.ndarray] = None  # linear functional <L, Q> on this block


def plain_gram_block(basis: Basis, multiplier: Optional[Polynomial] = None,
                     transform=None, objective: Optional[np.ndarray] = None) -> GramBlockSpec:
    """Block contributing transform(multiplier * m_i * m_j) per Gram entry."""
    nv = basis.num_vars
    entries: List[Polynomial] = []
    for i in range(len(basis)):
        for j in range(i, len(basis)):
            base = Polynomial(nv, {mul_monomials(basis.elements[i], basis.elements[j]): 1.0})
            if multiplier is not None:
                base = base * multiplier
            if transform is not None:
                base = transform(base)
            entries.append(base.scale(1.0 if i == j else 2.0))
    return GramBlockSpec(basis=basis, entry_polys=entries, objective=objective)


def matching_program(
    blocks: List[GramBlockSpec],
    target: Polynomial,
    lower_bound_poly: Optional[Polynomial] = None,
    moment_block: int = 0,
) -> SdpProblem:
    """Pair-form SDP for: find PSD blocks with sum of contributions == target
    (minus lambda * lower_bound_poly when a lower bound variable is requested,
    in which case the objective maximizes lambda)."""
    support: Dict[Monomial, int] = {}

    def note(mono):
        if mono not in support:
            support[mono] = len(support)

    for spec in blocks:
        for poly in spec.entry_polys:
            for mono in poly.terms:
                note(mono)
    row_monos = sorted(support, key=grlex_key)
    support = {m: k for k, m in enumerate(row_monos)}

    for mono in target.terms:
        if mono not in support:
            raise DegreeOverflowError(
                f"target monomial {Polynomial(target.num_vars, {mono: 1.0})} is not "
                "representable by the certificate blocks"
            )
    if lower_bound_poly is not None:
        for mono in lower_bound_poly.terms:
            if mono not in support:
                raise DegreeOverflowError(
                    "lower-bound polynomial leaves the representable support"
                )

    n_rows = len(row_monos)
    dims = [len(spec.basis) for spec in blocks]
    sdims = [svec_dim(d) for d in dims]
    offsets = np.concatenate([[0], np.cumsum(sdims)])
    total = int(offsets[-1])

    # Matching map in isometric svec coordinates.
    R = np.zeros((n_rows, total))
    for b, spec in enumerate(blocks):
        d = len(spec.basis)
        ia, ib = triu_indices(d)
        for k, poly in enumerate(spec.entry_polys):
            col = offsets[b] + k
            scale = 1.0 if ia[k] == ib[k] else 1.0 / SQRT2
            for mono, coeff in poly.terms.items():
                R[support[mono], col] = R[support[mono], col] + coeff * scale

    tvec = np.zeros(n_rows)
    for mono, coeff in target.terms.items():
        tvec[support[mono]] = coeff

    def particular(rhs: np.ndarray, what: str) -> np.ndarray:
        sol, *_ = np.linalg.lstsq(R, rhs, rcond=None)
        resid = R @ sol - rhs
        bad = np.abs(resid) > 1e-9 * (1.0 + np.abs(rhs).max(initial=0.0))
        if bad.any():
            worst = row_monos[int(np.argmax(np.abs(resid)))]
            raise DegreeOverflowError(
                f"{what} cannot be matched: residual at monomial "
                f"{Polynomial(target.num_vars, {worst: 1.0})}"
            )
        return sol

    c_vec = particular(tvec, "target polynomial")
    kernel = nullspace(R)

    lam_vec = None
    if lower_bound_poly is not None:
        lvec = np.zeros(n_rows)
        for mono, coeff in lower_bound_poly.terms.items():
            lvec[support[mono]] = coeff
        lam_vec = particular(lvec, "lower-bound polynomial")

    def split(vec: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(
            smat(vec[offsets[b]: offsets[b + 1]], dims[b]) for b in range(len(blocks))
        )

    cost_blocks = split(c_vec)
    constraints: List[Tuple[Tuple[np.ndarray, ...], float]] = []
    if lam_vec is not None:
        constraints.append((split(lam_vec), 1.0))
    for k in range(kernel.shape[1]):
        constraints.append((split(kernel[:, k]), 0.0))

    obj_offset = 0.0
    if any(spec.objective is not None for spec in blocks):
        def functional(mats) -> float:
            val = 0.0
            for spec, mat in zip(blocks, mats):
                if spec.objective is not None:
                    val += float(np.tensordot(spec.objective, mat))
            return val

        obj_offset = functional(cost_blocks)
        constraints = [
            (mats, rhs - functional(mats)) if lam_vec is not None and i == 0
            else (mats, -functional(mats))
            for i, (mats, rhs) in enumerate(constraints)
        ]
        if lam_vec is not None:
            # Lower bound and block functionals are not combined in any caller.
            raise NotImplementedError("objective functionals with a lower bound variable")

    mb = blocks[moment_block].basis
    meta = MomentMeta(block=moment_block, basis=mb, rows=gram_map(mb).rows)
    return SdpProblem(
        block_dims=tuple(dims),
        cost_blocks=cost_blocks,
        constraints=constraints,
        sense="max",
        obj_offset=obj_offset,
        moment_meta=meta,
    )


def _ball_polynomial(num_vars: int, radius: float) -> Polynomial:
    terms = {tuple([0] * num_vars): radius * radius}
    for i in range(num_vars):
        mono = tuple(2 if j == i else 0 for j in range(num_vars))
        terms[mono] = -1.0
    return Polynomial(num_vars, terms)


def _validate_target(p: Polynomial, basis: Basis):
    if p.num_vars != basis.num_vars:
        raise ValueError(
            f"polynomial over {p.num_vars} variables, basis over {basis.num_vars}"
        )
    if p.degree() > 2 * basis.max_degree:
        offenders = [m for m in p.terms if sum(m) > 2 * basis.max_degree]
        worst = max(offenders, key=grlex_key)
        raise DegreeOverflowError(
            f"monomial {Polynomial(p.num_vars, {worst: 1.0})} exceeds degree "
            f"{2 * basis.max_degree} representable over the basis"
        )


def compile_sos(
    p: Polynomial,
    basis: Basis,
    ball_radius: Optional[float] = None,
    multiplier_basis: Optional[Basis] = None,
) -> SdpProblem:
    """Feasibility problem: does p admit a Gram certificate over basis?

    With ball_radius set, certifies p = s0 + s1 * (radius^2 - |x|^2) with two
    Gram blocks (one-level localization on the ball).
    """
    _validate_target(p, basis)
    blocks = [plain_gram_block(basis)]
    if ball_radius is not None:
        if multiplier_basis is None:
            multiplier_basis = monomial_basis(basis.num_vars, basis.max_degree - 1)
        if multiplier_basis.max_degree + 1 > basis.max_degree:
            raise DegreeOverflowError(
                "multiplier degree too large: deg(s1 * ball) exceeds 2 * basis degree"
            )
        g = _ball_polynomial(basis.num_vars, ball_radius)
        blocks.append(plain_gram_block(multiplier_basis, multiplier=g))
    return matching_program(blocks, p)


def compile_sos_on_ball(
    p: Polynomial, basis: Basis, radius: float, multiplier_basis: Basis
) -> SdpProblem:
    """SOS membership on the ball of the given radius (single localizer)."""
    return compile_sos(p, basis, ball_radius=radius, multiplier_basis=multiplier_basis)


def compile_pop(
    p: Polynomial,
    basis: Basis,
    ball_radius: Optional[float] = None,
    multiplier_basis: Optional[Basis] = None,
) -> SdpProblem:
    """Largest lambda with p - lambda certified nonnegative over the basis.

    Unconstrained by default; with ball_radius the certificate is localized
    to the ball and lambda bounds min over it.
    """
    _validate_target(p, basis)
    blocks = [plain_gram_block(basis)]
    if ball_radius is not None:
        if multiplier_basis is None:
            multiplier_basis = monomial_basis(basis.num_vars, basis.max_degree - 1)
        if multiplier_basis.max_degree + 1 > basis.max_degree:
            raise DegreeOverflowError(
                "multiplier degree too large: deg(s1 * ball) exceeds 2 * basis degree"
            )
        g = _ball_polynomial(basis.num_vars, ball_radius)
        blocks.append(plain_gram_block(multiplier_basis, multiplier=g))
    one = Polynomial.constant(p.num_vars, 1.0)
    return matching_program(blocks, p, lower_bound_poly=one)
