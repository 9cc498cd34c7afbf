"""Shared domain types: fields, structure classes, systems and trajectories."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np


class DGError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(DGError, ValueError):
    pass


class GradientTooSmallError(DGError, ArithmeticError):
    """Raised where a construction needs grad V != 0 and it is not."""


class EvaluationDomainError(DGError, ArithmeticError):
    """ln of a non-positive number, division by zero, overflow, ..."""


class SolverDivergenceError(DGError, RuntimeError):
    """The implicit solve did not reach its tolerance.

    ``trajectory`` and ``step_index`` are filled in when the failure happens
    inside :func:`dgint.stepper.integrate`.
    """

    def __init__(self, message, *, residual=float("nan"), iterations=0,
                 trajectory=None, step_index=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.trajectory = trajectory
        self.step_index = step_index


class StepSizeUnderflowError(DGError, RuntimeError):
    pass


def as_state(x, n: int | None = None) -> np.ndarray:
    """Validate and copy ``x`` into a finite 1-d float array."""
    arr = np.array(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size < 1:
        raise InvalidArgumentError(f"state must be a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"state has non-finite components: {arr}")
    if n is not None and arr.size != n:
        raise InvalidArgumentError(f"expected dimension {n}, got {arr.size}")
    return arr


class StructureClass(enum.Enum):
    ANTISYMMETRIC = "antisymmetric"
    NEGATIVE_SEMIDEFINITE = "negative-semidefinite"
    NEGATIVE_DEFINITE = "negative-definite"
    UNCLASSIFIED = "unclassified"

    def implies(self, other: StructureClass) -> bool:
        """True if every matrix of class ``self`` also belongs to ``other``."""
        if other is StructureClass.UNCLASSIFIED or other is self:
            return True
        if other is StructureClass.NEGATIVE_SEMIDEFINITE:
            return self in (StructureClass.ANTISYMMETRIC, StructureClass.NEGATIVE_DEFINITE)
        return False


def classify_matrix(M, tol: float = 1e-12) -> StructureClass:
    """Classify a square matrix by the sign structure of its quadratic form.

    Antisymmetric wins over the definiteness classes (the zero matrix is
    antisymmetric). Only the symmetric part enters the definiteness test.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError("matrix has non-finite entries")
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    if np.max(np.abs(M + M.T), initial=0.0) <= tol:
        return StructureClass.ANTISYMMETRIC
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    if np.all(eig < -tol):
        return StructureClass.NEGATIVE_DEFINITE
    if np.all(eig <= tol):
        return StructureClass.NEGATIVE_SEMIDEFINITE
    return StructureClass.UNCLASSIFIED


def combine_classes(classes: Sequence[StructureClass]) -> StructureClass:
    """Strongest class that every member of ``classes`` implies."""
    classes = list(classes)
    if not classes:
        return StructureClass.UNCLASSIFIED
    for candidate in (StructureClass.ANTISYMMETRIC, StructureClass.NEGATIVE_DEFINITE,
                      StructureClass.NEGATIVE_SEMIDEFINITE):
        if all(c.implies(candidate) for c in classes):
            return candidate
    return StructureClass.UNCLASSIFIED


@dataclass(frozen=True)
class ScalarField:
    """A scalar function together with its exact gradient."""

    dimension: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    name: str = "V"

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float)))

    def grad(self, x) -> np.ndarray:
        return np.asarray(self.gradient(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class VectorField:
    dimension: int
    value: Callable[[np.ndarray], np.ndarray]
    name: str = "f"

    def __call__(self, x) -> np.ndarray:
        out = np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)
        if out.shape != (self.dimension,):
            raise InvalidArgumentError(
                f"vector field {self.name!r} returned shape {out.shape}, expected ({self.dimension},)")
        return out


@dataclass(frozen=True)
class StructureMatrixField:
    dimension: int
    value: Callable[[np.ndarray], np.ndarray]
    declared_class: StructureClass = StructureClass.UNCLASSIFIED

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class LinearGradientSystem:
    """The pairing x' = L(x) grad V(x), optionally with the raw right-hand side."""

    dimension: int
    L: StructureMatrixField
    V: ScalarField
    raw_f: VectorField | None = None
    parameters: Mapping[str, float] = field(default_factory=dict)
    name: str = "system"

    def __post_init__(self):
        if not (self.L.dimension == self.V.dimension == self.dimension):
            raise InvalidArgumentError("dimensions of L, V and the system disagree")
        if self.raw_f is not None and self.raw_f.dimension != self.dimension:
            raise InvalidArgumentError("raw_f dimension disagrees with the system")

    @property
    def structure_class(self) -> StructureClass:
        return self.L.declared_class

    def rhs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.L(x) @ self.V.grad(x)

    def vector_field(self) -> VectorField:
        """raw_f when present, otherwise L grad V."""
        if self.raw_f is not None:
            return self.raw_f
        return VectorField(self.dimension, self.rhs, name=f"{self.name}.rhs")


def check_gradient(V: ScalarField, points, rel_tol: float = 1e-6, step: float = 1e-6) -> float:
    """Max relative mismatch between ``V.grad`` and central differences of ``V``.

    Raises ``InvalidArgumentError`` if it exceeds ``rel_tol``.
    """
    worst = 0.0
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        g = V.grad(x)
        fd = np.empty_like(g)
        for i in range(x.size):
            h = step * (1.0 + abs(x[i]))
            e = np.zeros_like(x)
            e[i] = h
            fd[i] = (V(x + e) - V(x - e)) / (2 * h)
        err = np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(g))
        worst = max(worst, err)
    if worst > rel_tol:
        raise InvalidArgumentError(f"gradient inconsistent with finite differences: {worst:.3e}")
    return worst


@dataclass
class Trajectory:
    """Timestamped states with tracked function values and solver diagnostics.

    ``v_values`` has one row per tracked function. ``iterations`` and
    ``residuals`` hold the per-step solver statistics; entry 0 (the initial
    state) is always 0.
    """

    times: np.ndarray
    states: np.ndarray
    v_values: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    labels: tuple[str, ...] = ("V",)

    def __post_init__(self):
        N = len(self.times)
        if not (self.states.shape[0] == N == self.v_values.shape[1]
                == len(self.iterations) == len(self.residuals)):
            raise InvalidArgumentError("trajectory arrays have inconsistent lengths")
        if N > 1 and np.any(np.diff(self.times) <= 0):
            raise InvalidArgumentError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def drift(self, j: int = 0) -> np.ndarray:
        """V_j(x_k) - V_j(x_0) for every k."""
        return self.v_values[j] - self.v_values[j, 0]

    def max_drift(self, j: int = 0) -> float:
        return float(np.max(np.abs(self.drift(j)))) if len(self) else 0.0
