"""Dense symmetric-matrix kernels shared by the compilers and solvers.

Symmetric matrices travel through the solvers in isometric "svec" coordinates
(upper triangle, off-diagonal entries scaled by sqrt(2)) so that Euclidean
inner products of vectors equal Frobenius inner products of matrices.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

SQRT2 = float(np.sqrt(2.0))


@lru_cache(maxsize=None)
def triu_indices(n: int):
    iu = np.triu_indices(n)
    return iu[0].copy(), iu[1].copy()


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


@lru_cache(maxsize=None)
def _svec_weights(n: int) -> np.ndarray:
    ia, ib = triu_indices(n)
    w = np.full(ia.shape, SQRT2)
    w[ia == ib] = 1.0
    return w


def svec(mat: np.ndarray) -> np.ndarray:
    """Isometric vectorization: <svec(A), svec(B)> = <A, B>_F for symmetric A, B."""
    n = mat.shape[0]
    ia, ib = triu_indices(n)
    return mat[ia, ib] * _svec_weights(n)


def smat(vec: np.ndarray, n: int) -> np.ndarray:
    ia, ib = triu_indices(n)
    out = np.zeros((n, n))
    vals = vec / _svec_weights(n)
    out[ia, ib] = vals
    out[ib, ia] = vals
    return out


def sym(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def eigh_smallest(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(sym(mat))[0])


def psd_project(mat: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (eigenvalue clipping)."""
    w, v = np.linalg.eigh(sym(mat))
    wc = np.clip(w, 0.0, None)
    return (v * wc) @ v.T


def max_step_psd(mat: np.ndarray, direction: np.ndarray) -> float:
    """Largest t with mat + t*direction PSD, for mat positive definite.

    Returns inf when the direction never leaves the cone.
    """
    L = np.linalg.cholesky(mat)
    W = np.linalg.solve(L, np.linalg.solve(L, direction).T)
    lam = np.linalg.eigvalsh(sym(W))[0]
    if lam >= 0.0:
        return np.inf
    return -1.0 / lam


def nullspace(mat: np.ndarray, rcond: float = 1e-11) -> np.ndarray:
    """Orthonormal basis (columns) of the right null space of mat."""
    if mat.size == 0:
        rows, cols = mat.shape
        return np.eye(cols)
    u, s, vh = np.linalg.svd(mat, full_matrices=True)
    tol = rcond * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    return vh[rank:].T.copy()


def orth_rows(mat: np.ndarray, rcond: float = 1e-11) -> np.ndarray:
    """Orthonormal basis (rows) of the row space of mat."""
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    tol = rcond * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    return vh[:rank].copy()


def aggregate_congruence_operator(p_stack: np.ndarray, q_stack: np.ndarray) -> np.ndarray:
    """svec-coordinate matrix of Y -> sym(sum_i P_i Y Q_i) for symmetric P_i, Q_i.

    p_stack, q_stack have shape (N, n, n).  The result M satisfies
    svec(B)' M svec(B') = sum_i Tr(B P_i B' Q_i) for all symmetric B, B',
    which is exactly the HKM Schur-complement kernel aggregated over blocks.
    """
    n = p_stack.shape[-1]
    # T4[a,b,c,d] = sum_i P_i[b,c] Q_i[d,a]; contraction over i is one GEMM.
    t4 = np.einsum("ibc,ida->abcd", p_stack, q_stack, optimize=True)
    ia, ib = triu_indices(n)
    w = _svec_weights(n)
    ra = ia[:, None]
    rb = ib[:, None]
    ca = ia[None, :]
    cb = ib[None, :]
    gathered = (
        t4[ra, rb, ca, cb]
        + t4[rb, ra, ca, cb]
        + t4[ra, rb, cb, ca]
        + t4[rb, ra, cb, ca]
    )
    return 0.25 * (w[:, None] * gathered * w[None, :])


def congruence_svec_matrix(u: np.ndarray) -> np.ndarray:
    """svec-coordinate matrix of S -> U S U' mapping svec_r to svec_n (U is n x r)."""
    n, r = u.shape
    ia, ib = triu_indices(r)
    w = _svec_weights(r)
    # Column for position (a,b): svec(sym(u_a u_b')) with the isometric weight undone.
    cols = u[:, ia][:, None, :] * u[:, ib][None, :, :]
    cols = 0.5 * (cols + cols.transpose(1, 0, 2))
    oa, ob = triu_indices(n)
    wn = _svec_weights(n)
    mat = cols[oa, ob, :] * wn[:, None]
    # Per-column factor mult/w where mult is 2 off-diagonal, 1 on it: equals w.
    return mat * w[None, :]
