"""Exception types shared across the package."""


class SsocError(Exception):
    """Base class for all package errors."""


class DimensionError(SsocError):
    """A vector or matrix does not have the shape the contract requires."""


class EvaluationDomainError(SsocError):
    """A problem callback produced a non-finite value.

    Carries the evaluation time and the offending component index when known.
    """

    def __init__(self, message, t=None, component=None):
        super().__init__(message)
        self.t = t
        self.component = component


class RegistryError(SsocError):
    """Unknown builtin problem name."""


class MeshError(SsocError):
    """Invalid mesh (non-increasing nodes, wrong endpoints, ...)."""


class ConvergenceError(SsocError):
    """The solver did not reach the requested KKT tolerance."""


class SolverBreakdownError(SsocError):
    """The KKT system stayed singular after maximal regularization."""


class ConstraintQualificationError(SsocError):
    """Constraint Jacobian is rank deficient; certification must abort."""


class LegendreViolationError(SsocError):
    """min eig of H_uu is not positive on the sampled tube."""


class StrongRegularityError(SsocError):
    """The discrete KKT Jacobian is numerically singular."""


class ContractError(SsocError):
    """An internal numerical contract was violated (e.g. asymmetric input)."""


class PolyDomainError(SsocError):
    """Evaluation time outside the piecewise polynomial domain."""
