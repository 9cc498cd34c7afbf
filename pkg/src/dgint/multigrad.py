"""Multilinear-gradient systems x' = L(x) grad V_1 ... grad V_m and their bracket."""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import InvalidArgumentError, ScalarField, SolverDivergenceError, Trajectory, VectorField, as_state
from .discgrad import Midpoint
from .stepper import SolverConfig, StepDiagnostics, make_trajectory, solve_implicit, step_tolerance

MAX_DIM = 8
MAX_ORDER = 4


@dataclass(frozen=True)
class TensorField:
    """Dense order-p tensor field on R^n."""

    dimension: int
    order: int
    value: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.order < 2:
            raise InvalidArgumentError("tensor order must be >= 2")
        if self.dimension > MAX_DIM or self.order > MAX_ORDER:
            raise InvalidArgumentError(
                f"tensor budget exceeded (n <= {MAX_DIM}, p <= {MAX_ORDER})")

    def __call__(self, x) -> np.ndarray:
        T = np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)
        if T.shape != (self.dimension,) * self.order:
            raise InvalidArgumentError(f"tensor field returned shape {T.shape}")
        return T


def constant_tensor(T) -> TensorField:
    T = np.array(T, dtype=float)
    return TensorField(T.shape[0], T.ndim, lambda x: T)


def levi_civita(n: int = 3) -> np.ndarray:
    """Fully antisymmetric symbol with eps[0, 1, ..., n-1] = 1."""
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i, j in itertools.combinations(range(n), 2) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


def is_fully_antisymmetric(T, tol: float = 1e-12) -> bool:
    T = np.asarray(T)
    return all(np.max(np.abs(T + np.swapaxes(T, a, b))) <= tol
               for a, b in itertools.combinations(range(T.ndim), 2))


def contract(T: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Contract the trailing ``len(vectors)`` slots of T with the given vectors."""
    k = len(vectors)
    idx = string.ascii_lowercase[:T.ndim]
    subscripts = idx + "," + ",".join(idx[T.ndim - k + j] for j in range(k)) + "->" + idx[:T.ndim - k]
    return np.einsum(subscripts, T, *vectors)


@dataclass(frozen=True)
class MultiLinearGradientSystem:
    dimension: int
    L: TensorField
    V_list: tuple[ScalarField, ...]
    raw_f: VectorField | None = None
    parameters: dict = field(default_factory=dict)
    name: str = "multilinear"

    def __post_init__(self):
        object.__setattr__(self, "V_list", tuple(self.V_list))
        if self.L.order != len(self.V_list) + 1:
            raise InvalidArgumentError("tensor order must equal number of functions + 1")
        if self.L.dimension != self.dimension or any(V.dimension != self.dimension for V in self.V_list):
            raise InvalidArgumentError("dimensions disagree")

    @property
    def m(self) -> int:
        return len(self.V_list)

    def vector_field(self) -> VectorField:
        if self.raw_f is not None:
            return self.raw_f
        return VectorField(self.dimension, lambda x: multilinear_rhs(self, x), name=f"{self.name}.rhs")


def multilinear_rhs(sys: MultiLinearGradientSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return contract(sys.L(x), [V.grad(x) for V in sys.V_list])


def bracket(L: TensorField, f_list: Sequence[ScalarField], x) -> float:
    """{f_1, ..., f_p}_L: full contraction of L(x) with the p gradients."""
    if len(f_list) != L.order:
        raise InvalidArgumentError(f"bracket of order {L.order} needs {L.order} functions")
    x = np.asarray(x, dtype=float)
    return float(contract(L(x), [f.grad(x) for f in f_list]))


def coordinate_function(i: int, n: int) -> ScalarField:
    """x -> x_i (0-based index)."""
    e = np.zeros(n)
    e[i] = 1.0
    return ScalarField(n, lambda x: x[i], lambda x: e.copy(), name=f"x{i + 1}")


def composite(phi: ScalarField, g_list: Sequence[ScalarField]) -> ScalarField:
    """phi(g_1, ..., g_k) as a scalar field on R^n, with chain-rule gradient."""
    k = len(g_list)
    if phi.dimension != k:
        raise InvalidArgumentError("phi must take one argument per inner function")
    n = g_list[0].dimension

    def value(x):
        return phi(np.array([g(x) for g in g_list]))

    def gradient(x):
        dphi = phi.grad(np.array([g(x) for g in g_list]))
        return sum(dphi[i] * g_list[i].grad(x) for i in range(k))

    return ScalarField(n, value, gradient, name="phi(g)")


def leibniz_check(L: TensorField, f_list: Sequence[ScalarField], g_list: Sequence[ScalarField],
                  phi: ScalarField, slot: int, x) -> float:
    """|{.., phi(g), ..} - sum_i dphi/dg_i {.., g_i, ..}| with phi(g) in ``slot`` (0-based).

    ``f_list`` holds the p functions; its entry at ``slot`` is ignored.
    """
    if not 0 <= slot < L.order:
        raise InvalidArgumentError("slot out of range")
    x = np.asarray(x, dtype=float)
    fs = list(f_list)
    lhs_args = fs.copy()
    lhs_args[slot] = composite(phi, g_list)
    lhs = bracket(L, lhs_args, x)
    dphi = phi.grad(np.array([g(x) for g in g_list]))
    rhs = 0.0
    for i, g in enumerate(g_list):
        args = fs.copy()
        args[slot] = g
        rhs += dphi[i] * bracket(L, args, x)
    return abs(lhs - rhs)


def lyapunov_bracket_W(sys: MultiLinearGradientSystem, V: ScalarField, x) -> float:
    """W = {V, V_1, ..., V_m}_L, the rate of change of V along the flow."""
    return bracket(sys.L, [V, *sys.V_list], x)


def slot_swap(L: TensorField, j: int) -> TensorField:
    """Transpose slot 0 with slot j (1 <= j <= m), exchanging V and V_j roles."""
    m = L.order - 1
    if not 1 <= j <= m:
        raise InvalidArgumentError(f"slot {j} out of range 1..{m}")
    return TensorField(L.dimension, L.order, lambda x: np.swapaxes(L(x), 0, j))


def multi_step(sys: MultiLinearGradientSystem, x, tau: float, scheme=None,
               solver: SolverConfig | None = None, antisym_tol: float = 1e-12):
    """One conservative step (x' - x)/tau = L((x+x')/2) G_1 ... G_m.

    Each G_j is a discrete gradient of V_j; full antisymmetry of L makes
    every V_j an exact integral of the map. Returns ``(x', diagnostics)``.
    """
    if not tau > 0:
        raise InvalidArgumentError("time step must be positive")
    scheme = scheme or Midpoint()
    solver = solver or SolverConfig()
    x = as_state(x, sys.dimension)
    if not is_fully_antisymmetric(sys.L(x), antisym_tol):
        raise InvalidArgumentError("multi_step requires a fully antisymmetric tensor")
    tol = step_tolerance(solver, x, tau)

    def residual(y):
        G = [scheme(V, x, y) for V in sys.V_list]
        return (y - x) / tau - contract(sys.L(0.5 * (x + y)), G)

    r0 = residual(x)
    if np.linalg.norm(r0) <= tol:
        return x.copy(), StepDiagnostics(0, float(np.linalg.norm(r0)), solver.method)
    guess = x + tau * multilinear_rhs(sys, x)
    return solve_implicit(residual, guess, solver, scale=tau, tol=tol)


def multi_integrate(sys: MultiLinearGradientSystem, x0, tau: float, n_steps: int, scheme=None,
                    solver: SolverConfig | None = None) -> Trajectory:
    """Iterate :func:`multi_step`, tracking every V_j."""
    if n_steps < 1:
        raise InvalidArgumentError("n_steps must be >= 1")
    x = as_state(x0, sys.dimension)
    states, iters, resid = [x], [0], [0.0]
    for k in range(n_steps):
        try:
            x, d = multi_step(sys, x, tau, scheme, solver)
        except SolverDivergenceError as exc:
            exc.trajectory = make_trajectory(states, tau, sys.V_list, iters, resid)
            exc.step_index = k
            raise
        states.append(x)
        iters.append(d.iterations)
        resid.append(d.residual)
    return make_trajectory(states, tau, sys.V_list, iters, resid)
