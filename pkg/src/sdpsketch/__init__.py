"""sdpsketch: shrink semidefinite programs by projecting the PSD cone onto
random subspaces, with polynomial-optimization and optimal-control front
ends, interior-point and consensus solvers, and moment-side recovery."""

from .control import ControlProblem, bellman_residual, compile_poc, extract_value_function
from .measures import (
    GridDensity,
    MomentRecoveryError,
    MomentVector,
    density_grid,
    extract_moments,
    local_maxima,
    moment_matrix,
)
from .polynomial import (
    Basis,
    DegreeOverflowError,
    DimensionMismatchError,
    Monomial,
    Polynomial,
    evaluate,
    gradient,
    monomial_basis,
    parse_polynomial,
)
from .sketch import (
    BlockSdp,
    SubspaceEnsemble,
    ensembles_for_problem,
    extend_ensemble,
    extend_ensembles,
    lift_dual_certificate,
    project_primal,
    restrict_dual,
    sample_ensemble,
)
from .solver import (
    KktResiduals,
    Solution,
    SolverConfig,
    Status,
    kkt_residuals,
    solve,
    solve_consensus,
)
from .sos import GramMap, MomentMeta, SdpProblem, compile_pop, compile_sos, compile_sos_on_ball, gram_map

__all__ = [
    "Basis",
    "BlockSdp",
    "ControlProblem",
    "DegreeOverflowError",
    "DimensionMismatchError",
    "GramMap",
    "GridDensity",
    "KktResiduals",
    "MomentMeta",
    "MomentRecoveryError",
    "MomentVector",
    "Monomial",
    "Polynomial",
    "SdpProblem",
    "Solution",
    "SolverConfig",
    "Status",
    "SubspaceEnsemble",
    "bellman_residual",
    "compile_poc",
    "compile_pop",
    "compile_sos",
    "compile_sos_on_ball",
    "density_grid",
    "ensembles_for_problem",
    "evaluate",
    "extend_ensemble",
    "extend_ensembles",
    "extract_moments",
    "extract_value_function",
    "gradient",
    "gram_map",
    "kkt_residuals",
    "lift_dual_certificate",
    "local_maxima",
    "moment_matrix",
    "monomial_basis",
    "parse_polynomial",
    "project_primal",
    "restrict_dual",
    "sample_ensemble",
    "solve",
    "solve_consensus",
]
