"""Default experiment instances and random problem generators.

The default polynomial-minimization instance is the degree-8 bivariate
product with four double zeros at (+-1, +-1); the default optimal-control
instance is the one-dimensional integrator with quadratic running cost,
whose attainable objective is exactly 1.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ._linalg import sym
from .control import ControlProblem
from .polynomial import Polynomial, monomial_basis
from .sos import SdpProblem, compile_pop

POP_SWEEP_RANKS = (1, 3, 6, 9, 11, 14, 17, 19, 22, 25)
POP_BASIS_DEGREE = 6
POP_BALL_RADIUS = 2.0
POP_MULTIPLIER_DEGREE = 5
DEFAULT_SAMPLES = 100


def four_double_zero_polynomial() -> Polynomial:
    """p(x, y) = prod over (a, b) in {-1, 1}^2 of ((x - a)^2 + (y - b)^2)."""
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    p = Polynomial.constant(2, 1.0)
    for a in (-1.0, 1.0):
        for b in (-1.0, 1.0):
            da = x - Polynomial.constant(2, a)
            db = y - Polynomial.constant(2, b)
            p = p * (da * da + db * db)
    return p


def default_pop_problem(
    basis_degree: int = POP_BASIS_DEGREE,
    ball_radius: Optional[float] = POP_BALL_RADIUS,
    multiplier_degree: int = POP_MULTIPLIER_DEGREE,
) -> SdpProblem:
    p = four_double_zero_polynomial()
    basis = monomial_basis(2, basis_degree)
    mult = monomial_basis(2, multiplier_degree) if ball_radius is not None else None
    return compile_pop(p, basis, ball_radius=ball_radius, multiplier_basis=mult)


def default_poc_problem() -> ControlProblem:
    """1-D system xdot = u with cost x^2 + u^2 from x0 = 1 to xT = 0."""
    return ControlProblem(
        num_states=1,
        num_controls=1,
        dynamics=[Polynomial(2, {(0, 1): 1.0})],
        cost=Polynomial(2, {(2, 0): 1.0, (0, 2): 1.0}),
        x0=np.array([1.0]),
        xT=np.array([0.0]),
        value_degree=1,
        certificate_degree=1,
    )


def grid_min(p: Polynomial, lo: float, hi: float, count: int) -> float:
    """Brute-force minimum of a bivariate polynomial over a half-open uniform
    grid lo + k*(hi-lo)/count, k = 0..count-1, per axis."""
    step = (hi - lo) / count
    axis = lo + step * np.arange(count)
    best = np.inf
    for xv in axis:
        row = np.full(count, np.inf)
        for k, yv in enumerate(axis):
            row[k] = p((xv, yv))
        best = min(best, float(row.min()))
    return best


def random_feasible_sdp(
    rng: np.random.Generator, n: int, m: int, sense: str = "min"
) -> SdpProblem:
    """Pair with a known strictly complementary optimal point (bounded, zero gap)."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    k = rng.integers(1, n) if n > 1 else 1
    xvals = np.concatenate([rng.uniform(0.5, 2.0, k), np.zeros(n - k)])
    svals = np.concatenate([np.zeros(k), rng.uniform(0.5, 2.0, n - k)])
    x_star = (q * xvals) @ q.T
    s_star = (q * svals) @ q.T
    y_star = rng.standard_normal(m)
    mats = [sym(rng.standard_normal((n, n))) for _ in range(m)]
    b = np.array([float(np.tensordot(a, x_star)) for a in mats])
    c = s_star + sum(yj * a for yj, a in zip(y_star, mats))
    return SdpProblem(
        block_dims=(n,),
        cost_blocks=(sym(c),),
        constraints=[((a,), float(bj)) for a, bj in zip(mats, b)],
        sense=sense,
    )


def infeasible_sdp(rng: np.random.Generator, n: int, m: int) -> SdpProblem:
    """Primal reading strongly infeasible: Tr(A_1 X) = 1 with A_1 negative definite."""
    base = rng.standard_normal((n, n))
    a1 = -(base @ base.T) - 0.5 * np.eye(n)
    mats = [a1] + [sym(rng.standard_normal((n, n))) for _ in range(m - 1)]
    b = np.concatenate([[1.0], rng.standard_normal(m - 1)])
    c = sym(rng.standard_normal((n, n)))
    return SdpProblem(
        block_dims=(n,),
        cost_blocks=(c,),
        constraints=[((a,), float(bj)) for a, bj in zip(mats, b)],
        sense="min",
    )


def unbounded_sdp(rng: np.random.Generator, n: int, m: int) -> SdpProblem:
    """Primal reading unbounded below: a PSD ray v v' in the constraint kernel
    with negative cost, while remaining feasible (b = A(X0) for X0 PD)."""
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    mats = []
    for _ in range(m):
        a = sym(rng.standard_normal((n, n)))
        # remove the component seen by the ray: <A, vv'> = 0
        a = a - (v @ a @ v) * np.outer(v, v)
        mats.append(sym(a))
    x0 = np.eye(n)
    b = np.array([float(np.tensordot(a, x0)) for a in mats])
    c = sym(rng.standard_normal((n, n)))
    c = c - (v @ c @ v + 1.0) * np.outer(v, v)  # <C, vv'> = -1
    return SdpProblem(
        block_dims=(n,),
        cost_blocks=(sym(c),),
        constraints=[((a,), float(bj)) for a, bj in zip(mats, b)],
        sense="min",
    )
