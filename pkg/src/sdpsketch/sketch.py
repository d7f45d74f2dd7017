"""Random subspace ensembles and the projected/restricted problem builders.

restrict_dual replaces the dual slack S of the pair by a sum of projected
blocks sum_i U_i S_i U_i' (an inner approximation: maximization value can
only drop), project_primal imposes PSD only on U_i' X U_i (a relaxation).
The two are conic duals of each other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._linalg import sym
from .sos import SdpProblem

_EXTEND_STREAM = 9650218  # namespace tag for nested-extension RNG streams


@dataclass(frozen=True)
class SubspaceEnsemble:
    """N sampled projection matrices U_i of shape (n, r), seed-reproducible."""

    n: int
    r: int
    N: int
    seed: int
    orthonormal: bool
    matrices: Tuple[np.ndarray, ...] = field(compare=False, repr=False)
    lineage: Tuple[int, ...] = ()
    nested_of: Optional["SubspaceEnsemble"] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for u in self.matrices:
            if u.shape != (self.n, self.r):
                raise ValueError(f"ensemble matrix has shape {u.shape}, expected {(self.n, self.r)}")
            smin = np.linalg.svd(u, compute_uv=False)[-1]
            if smin <= 1e-10:
                raise ValueError("sampled subspace matrix is numerically rank deficient")
            if self.orthonormal:
                err = np.abs(u.T @ u - np.eye(self.r)).max()
                if err > 1e-12:
                    raise ValueError(f"orthonormality violated by {err:.2e}")

    def stack(self) -> np.ndarray:
        return np.stack(self.matrices)

    # Serialization stores only the recipe; matrices are regenerated.
    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "N": self.N,
            "seed": self.seed,
            "orthonormal": self.orthonormal,
            "lineage": list(self.lineage) or [self.r],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "SubspaceEnsemble":
        lineage = [int(x) for x in data.get("lineage", [data["r"]])]
        ens = sample_ensemble(
            int(data["n"]), lineage[0], int(data["N"]), int(data["seed"]),
            orthonormal=bool(data["orthonormal"]),
        )
        for r_new in lineage[1:]:
            ens = extend_ensemble(ens, r_new)
        return ens


def _orth_columns(mat: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(mat)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def sample_ensemble(n: int, r: int, N: int, seed: int, orthonormal: bool = True) -> SubspaceEnsemble:
    """Draw N i.i.d. standard-normal n-by-r matrices from the seeded generator.

    With orthonormal=True each matrix is replaced by an orthonormal basis of
    its range (same span, better conditioning).  Identical (seed, n, r, N)
    give a bit-identical ensemble.
    """
    if not (1 <= r <= n):
        raise ValueError(f"rank r={r} must satisfy 1 <= r <= n={n}")
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(N):
        u = rng.standard_normal((n, r))
        if orthonormal:
            u = _orth_columns(u)
        mats.append(u)
    return SubspaceEnsemble(
        n=n, r=r, N=N, seed=int(seed), orthonormal=orthonormal,
        matrices=tuple(mats), lineage=(r,),
    )


def extend_ensemble(parent: SubspaceEnsemble, r_new: int) -> SubspaceEnsemble:
    """Append fresh columns so spans nest; first r columns are the parent's."""
    if r_new <= parent.r:
        raise ValueError("r_new must exceed the parent rank")
    if r_new > parent.n:
        raise ValueError(f"r_new={r_new} exceeds ambient dimension n={parent.n}")
    mats = []
    extra = r_new - parent.r
    for i, u_old in enumerate(parent.matrices):
        rng = np.random.default_rng((parent.seed, _EXTEND_STREAM, i, parent.r))
        fresh = rng.standard_normal((parent.n, extra))
        if parent.orthonormal:
            # two projection passes keep the joint frame orthonormal to
            # machine precision across long nesting chains
            for _ in range(2):
                fresh = fresh - u_old @ (u_old.T @ fresh)
                fresh = _orth_columns(fresh)
        mats.append(np.hstack([u_old, fresh]))
    return SubspaceEnsemble(
        n=parent.n, r=r_new, N=parent.N, seed=parent.seed,
        orthonormal=parent.orthonormal, matrices=tuple(mats),
        lineage=parent.lineage + (r_new,), nested_of=parent,
    )


def ensembles_for_problem(
    base: SdpProblem, r: int, N: int, seed: int, orthonormal: bool = True
) -> List[SubspaceEnsemble]:
    """Per-block ensembles at effective rank min(r, n_b); blocks of equal
    dimension share one ensemble."""
    shared = {}
    out = []
    for n_b in base.block_dims:
        r_eff = min(r, n_b)
        key = (n_b, r_eff)
        if key not in shared:
            shared[key] = sample_ensemble(n_b, r_eff, N, seed, orthonormal=orthonormal)
        out.append(shared[key])
    return out


def extend_ensembles(parents: Sequence[SubspaceEnsemble], r_new: int) -> List[SubspaceEnsemble]:
    cache = {}
    out = []
    for ens in parents:
        r_eff = min(r_new, ens.n)
        key = (id(ens), r_eff)
        if key not in cache:
            cache[key] = ens if r_eff <= ens.r else extend_ensemble(ens, r_eff)
        out.append(cache[key])
    return out


@dataclass
class BlockSdp:
    """A base pair plus ensembles: the restricted dual replaces the dual
    slack by a sum of per-sample blocks, the projected primal loosens the
    primal cone to the sampled projections."""

    base: SdpProblem
    ensembles: List[SubspaceEnsemble]
    kind: str = "restricted_dual"

    def __post_init__(self):
        if self.kind not in ("restricted_dual", "projected_primal"):
            raise ValueError(f"unknown BlockSdp kind {self.kind!r}")
        if len(self.ensembles) == 1 and self.base.num_blocks > 1:
            self.ensembles = list(self.ensembles) * self.base.num_blocks
        if len(self.ensembles) != self.base.num_blocks:
            raise ValueError("need one ensemble per base block")
        for ens, n_b in zip(self.ensembles, self.base.block_dims):
            if ens.n != n_b:
                raise ValueError(
                    f"ensemble ambient dimension {ens.n} does not match block size {n_b}"
                )

    @property
    def sense(self) -> str:
        return "max" if self.kind == "restricted_dual" else "min"

    @property
    def block_sizes(self) -> List[int]:
        out = []
        for ens in self.ensembles:
            out.extend([ens.r] * ens.N)
        return out

    def to_json_dict(self) -> dict:
        return {
            "type": "block_sdp",
            "kind": self.kind,
            "base": self.base.to_json_dict(),
            "ensembles": [e.to_json_dict() for e in self.ensembles],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json_dict(data: dict) -> "BlockSdp":
        return BlockSdp(
            base=SdpProblem.from_json_dict(data["base"]),
            ensembles=[SubspaceEnsemble.from_json_dict(e) for e in data["ensembles"]],
            kind=data.get("kind", "restricted_dual"),
        )

    @staticmethod
    def from_json(text: str) -> "BlockSdp":
        return BlockSdp.from_json_dict(json.loads(text))


def restrict_dual(base: SdpProblem, ensembles) -> BlockSdp:
    """Restrict the dual reading: S_b becomes sum_i U_{b,i} S_{b,i} U_{b,i}'."""
    if isinstance(ensembles, SubspaceEnsemble):
        ensembles = [ensembles]
    return BlockSdp(base=base, ensembles=list(ensembles), kind="restricted_dual")


def project_primal(base: SdpProblem, ensembles) -> BlockSdp:
    """Relax the primal reading: X_b free symmetric, PSD only on U' X U."""
    if isinstance(ensembles, SubspaceEnsemble):
        ensembles = [ensembles]
    return BlockSdp(base=base, ensembles=list(ensembles), kind="projected_primal")


def lift_dual_certificate(blocks: Sequence[np.ndarray], ens: SubspaceEnsemble) -> np.ndarray:
    """sum_i U_i S_i U_i'; PSD whenever every S_i is."""
    if len(blocks) != ens.N:
        raise ValueError(f"got {len(blocks)} blocks for an ensemble of N={ens.N}")
    out = np.zeros((ens.n, ens.n))
    for u, s in zip(ens.matrices, blocks):
        if s.shape != (ens.r, ens.r):
            raise ValueError(f"block of shape {s.shape}, expected {(ens.r, ens.r)}")
        out += u @ sym(s) @ u.T
    return sym(out)


def lift_blocks(bs: BlockSdp, blocks: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Per-base-block lifts for a solution's stacked block list."""
    out = []
    start = 0
    for ens in bs.ensembles:
        out.append(lift_dual_certificate(blocks[start:start + ens.N], ens))
        start += ens.N
    return out
