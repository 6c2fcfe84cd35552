"""Direct-collocation solves with a posteriori second-order certificates."""

from .certify import (
    AcceptanceResult,
    Certificate,
    CertifySettings,
    CurvatureResult,
    acceptance_test,
    finalize_certificate,
    reduced_curvature,
    run_certification,
    variation_gram,
)
from .constants import ConstantsBundle, TubeSpec, estimate_all
from .model import (
    HamiltonianEval,
    OcpProblem,
    builtin_names,
    builtin_problem,
    eval_dynamics,
    eval_endpoint_terms,
    eval_hamiltonian,
)
from .reconstruction import PiecewisePoly, Reconstruction, reconstruct
from .refine import RefinePolicy, RefineResult, certify_loop
from .residuals import (
    ResidualReport,
    compute_residuals,
    residual_relation_check,
    worst_intervals,
)
from .solver import SolveReport, SolverOptions, newton_step, solve
from .transcription import (
    HERMITE_SIMPSON,
    TRAPEZOIDAL,
    DiscreteKkt,
    Mesh,
    NlpLayout,
    Scheme,
    assemble,
    eval_constraint_jacobian,
    eval_defects,
    eval_lagrangian_hessian,
)

__version__ = "0.1.0"
