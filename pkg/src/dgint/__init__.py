"""Structure-preserving integration of linear-gradient systems with discrete gradients."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DGError,
    EvaluationDomainError,
    GradientTooSmallError,
    InvalidArgumentError,
    LinearGradientSystem,
    ScalarField,
    SolverDivergenceError,
    StepSizeUnderflowError,
    StructureClass,
    StructureMatrixField,
    Trajectory,
    VectorField,
    classify_matrix,
)
