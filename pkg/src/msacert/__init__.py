"""Forward-backward sweep (MSA) solver with contraction-based convergence certificates."""

from .benchmarks import BUILTINS, BenchmarkProblem, builtin, lqr_problem
from .certificate import (
    Certificate,
    certify,
    coefficients,
    costate_bound_rhs,
    costate_bound_terms,
    costate_sup_rhs,
    critical_horizon,
    gronwall_rhs,
    kappa,
)
from .exceptions import IntegrationDivergedError, MinimizerFailedError, UnknownProblemError
from .msa import MsaReport, cost, empirical_contraction, minimize_hamiltonian, msa_step, solve
from .norms import (
    L1,
    L2,
    LINF,
    NormKind,
    dual_kind,
    induced_matrix_norm,
    log_norm,
    vector_norm,
    weighted_l1,
    weighted_l2,
    weighted_linf,
)
from .oracle import LqrSpec, direct_solve, riccati_solve
from .problem import (
    BoundedSets,
    LipschitzData,
    ProblemSpec,
    bounded_sets,
    estimate_constants,
    hamiltonian,
    verify_contraction,
)
from .signals import BoxSet, Grid, Signal, reverse, sup_distance
from .sweep import backward_sweep, forward_sweep, integrate_costate, pmp_residual

__version__ = "0.1.0"
