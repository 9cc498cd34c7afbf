"""Discrete-gradient time stepping.

One step solves  (x' - x)/tau = Lt(x, x') G(x, x')  for x', where G is a
discrete gradient of V and Lt a consistent approximation of L. Because
G . (x' - x) = V(x') - V(x), the change in V per step is tau G^T Lt G, which
vanishes for antisymmetric Lt and is non-positive for negative
semidefinite Lt.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    InvalidArgumentError,
    LinearGradientSystem,
    ScalarField,
    SolverDivergenceError,
    StepSizeUnderflowError,
    Trajectory,
    VectorField,
    as_state,
)
from .discgrad import Midpoint

log = logging.getLogger(__name__)


class SolverMethod(enum.Enum):
    FIXED_POINT = "fixed-point"
    NEWTON_FD = "newton-fd"


class LTildePolicy(enum.Enum):
    FROZEN_AT_X = "frozen"
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the implicit solve.

    ``tol=None`` means 1e-12 * (1 + |x|) at each step. With ``fallback``,
    fixed-point iteration hands over to Newton after ``max_iter // 2``
    non-contracting iterations.
    """

    method: SolverMethod = SolverMethod.FIXED_POINT
    tol: float | None = None
    max_iter: int = 100
    fd_step: float = 1e-7
    fallback: bool = True

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise InvalidArgumentError("solver tol must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be >= 1")
        if not self.fd_step > 0:
            raise InvalidArgumentError("fd_step must be positive")

    def tolerance(self, x) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-12 * (1.0 + float(np.linalg.norm(x)))


def step_tolerance(solver: SolverConfig, x, tau: float) -> float:
    """Residual threshold for one step.

    The residual is a rate, so rounding of x' alone contributes about
    eps |x| / tau; the requested tolerance is raised to that floor.
    """
    floor = 8.0 * np.finfo(float).eps * (1.0 + float(np.linalg.norm(x))) / tau
    return max(solver.tolerance(x), floor)


@dataclass(frozen=True)
class StepDiagnostics:
    iterations: int
    residual: float
    method: SolverMethod


def _newton(residual, y, cfg: SolverConfig, tol, iters_used=0):
    r = residual(y)
    rn = float(np.linalg.norm(r))
    it = iters_used
    while rn > tol:
        if it >= cfg.max_iter:
            raise SolverDivergenceError(
                f"Newton iteration did not converge: residual {rn:.3e} > tol {tol:.3e}",
                residual=rn, iterations=it)
        n = y.size
        J = np.empty((n, n))
        for j in range(n):
            # power-of-two step, so y + h - y == h exactly
            h = 2.0 ** round(math.log2(cfg.fd_step * (1.0 + abs(y[j]))))
            yh = y.copy()
            yh[j] += h
            J[:, j] = (residual(yh) - r) / (yh[j] - y[j])
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise SolverDivergenceError("singular Jacobian in Newton iteration",
                                        residual=rn, iterations=it) from None
        y = y + delta
        it += 1
        if not np.all(np.isfinite(y)):
            raise SolverDivergenceError("Newton iterate became non-finite", residual=rn, iterations=it)
        r = residual(y)
        rn = float(np.linalg.norm(r))
    return y, it, rn


def solve_implicit(residual: Callable[[np.ndarray], np.ndarray], guess, cfg: SolverConfig,
                   scale: float = 1.0, tol: float | None = None):
    """Find y with |residual(y)| <= tol.

    Fixed-point mode iterates ``y <- y - scale * residual(y)``; callers pick
    ``residual`` and ``scale`` so that this is their contraction. Returns
    ``(y, StepDiagnostics)``.
    """
    y = as_state(guess)
    tol = cfg.tolerance(y) if tol is None else tol
    if cfg.method is SolverMethod.NEWTON_FD:
        y, it, rn = _newton(residual, y, cfg, tol)
        return y, StepDiagnostics(it, rn, SolverMethod.NEWTON_FD)

    r = residual(y)
    rn = float(np.linalg.norm(r))
    best = (rn, y)
    stalls = 0
    it = 0
    broken = False
    while rn > tol:
        if broken or it >= cfg.max_iter or (cfg.fallback and stalls >= max(1, cfg.max_iter // 2)):
            if cfg.fallback:
                log.debug("fixed point stalled at residual %.3e, switching to Newton", rn)
                try:
                    y, it, rn = _newton(residual, best[1], cfg, tol, iters_used=0)
                except SolverDivergenceError as exc:
                    raise SolverDivergenceError(
                        f"fixed point and Newton both failed: {exc}",
                        residual=min(exc.residual, best[0]), iterations=it + exc.iterations) from None
                return y, StepDiagnostics(it, rn, SolverMethod.NEWTON_FD)
            raise SolverDivergenceError(
                f"fixed-point iteration did not converge: residual {rn:.3e} > tol {tol:.3e}",
                residual=rn, iterations=it)
        y = y - scale * r
        it += 1
        try:
            if not np.all(np.isfinite(y)):
                raise ArithmeticError("non-finite iterate")
            # overflow surfaces as a non-finite residual, handled below
            with np.errstate(over="ignore", invalid="ignore"):
                r_new = residual(y)
            if not np.all(np.isfinite(r_new)):
                raise ArithmeticError("non-finite residual")
        except ArithmeticError:
            broken = True
            continue
        rn_new = float(np.linalg.norm(r_new))
        if not rn_new < rn:
            stalls += 1
        if rn_new < best[0]:
            best = (rn_new, y)
        r, rn = r_new, rn_new
    return y, StepDiagnostics(it, rn, SolverMethod.FIXED_POINT)


def _ltilde(sys: LinearGradientSystem, policy: LTildePolicy, x, y, L_x):
    if policy is LTildePolicy.FROZEN_AT_X:
        return L_x
    return sys.L(0.5 * (x + y))


def step(sys: LinearGradientSystem, x, tau: float, scheme=None,
         policy: LTildePolicy = LTildePolicy.MIDPOINT, solver: SolverConfig | None = None):
    """Advance one step of the discrete-gradient map. Returns ``(x', diagnostics)``."""
    if not tau > 0:
        raise InvalidArgumentError("time step must be positive")
    scheme = scheme or Midpoint()
    solver = solver or SolverConfig()
    x = as_state(x, sys.dimension)
    V = sys.V
    tol = step_tolerance(solver, x, tau)

    L_x = sys.L(x) if policy is LTildePolicy.FROZEN_AT_X else None

    def residual(y):
        return (y - x) / tau - _ltilde(sys, policy, x, y, L_x) @ scheme(V, x, y)

    r0 = residual(x)
    if np.linalg.norm(r0) <= tol:
        return x.copy(), StepDiagnostics(0, float(np.linalg.norm(r0)), solver.method)

    L0 = L_x if L_x is not None else sys.L(x)
    guess = x + tau * (L0 @ V.grad(x))
    y, diag = solve_implicit(residual, guess, solver, scale=tau, tol=tol)
    return y, diag


def integrate(sys: LinearGradientSystem, x0, tau: float, n_steps: int, scheme=None,
              policy: LTildePolicy = LTildePolicy.MIDPOINT, solver: SolverConfig | None = None,
              track: Sequence[ScalarField] = ()) -> Trajectory:
    """Iterate :func:`step` ``n_steps`` times.

    V is always tracked first; ``track`` adds further functions. On solver
    failure the raised :class:`SolverDivergenceError` carries the partial
    trajectory and the index of the failing step.
    """
    if n_steps < 1:
        raise InvalidArgumentError("n_steps must be >= 1")
    x = as_state(x0, sys.dimension)
    funcs = [sys.V, *track]
    states = [x]
    iters = [0]
    resid = [0.0]
    for k in range(n_steps):
        try:
            x, d = step(sys, x, tau, scheme, policy, solver)
        except (SolverDivergenceError, ArithmeticError) as exc:
            partial = make_trajectory(states, tau, funcs, iters, resid)
            if isinstance(exc, SolverDivergenceError):
                exc.trajectory, exc.step_index = partial, k
                raise
            raise SolverDivergenceError(f"step {k} failed: {exc}", trajectory=partial,
                                        step_index=k) from exc
        states.append(x)
        iters.append(d.iterations)
        resid.append(d.residual)
    return make_trajectory(states, tau, funcs, iters, resid)


def make_trajectory(states, tau, funcs, iters, resid, times=None) -> Trajectory:
    S = np.array(states, dtype=float)
    t = np.arange(len(states)) * tau if times is None else np.asarray(times, dtype=float)
    vals = np.array([[F(s) for s in S] for F in funcs]).reshape(len(funcs), len(S))
    return Trajectory(t, S, vals, np.array(iters, dtype=int), np.array(resid, dtype=float),
                      labels=tuple(F.name for F in funcs))


def reference_integrate(f: VectorField, x0, t_end: float, rel_tol: float = 1e-10,
                        t_eval=None, track: Sequence[ScalarField] = ()) -> Trajectory:
    """High-accuracy baseline: adaptive Dormand-Prince 8(5,3) with dense output."""
    if rel_tol < 1e-13:
        raise InvalidArgumentError("rel_tol must be >= 1e-13")
    x0 = as_state(x0, f.dimension)
    if t_eval is None:
        t_eval = np.array([0.0, t_end]) if t_end > 0 else np.array([0.0])
    t_eval = np.asarray(t_eval, dtype=float)
    if t_end <= 0:
        return make_trajectory([x0], 1.0, list(track), [0], [0.0], times=[0.0])
    sol = solve_ivp(lambda t, y: f(y), (0.0, t_end), x0, method="DOP853",
                    rtol=rel_tol, atol=rel_tol * 1e-2, t_eval=t_eval)
    if sol.status != 0:
        reached = sol.t[-1] if sol.t.size else 0.0
        raise StepSizeUnderflowError(f"reference integration failed between t={reached:g} and "
                                     f"t_end={t_end:g}: {sol.message}")
    n = len(sol.t)
    return make_trajectory(list(sol.y.T), 1.0, list(track), [0] * n, [0.0] * n, times=sol.t)


def empirical_order(sys: LinearGradientSystem, scheme, policy: LTildePolicy, x0, t_end: float,
                    tau_list: Sequence[float], solver: SolverConfig | None = None) -> float:
    """Least-squares slope of log(global error at t_end) against log(tau)."""
    taus = [float(t) for t in tau_list]
    if len(taus) < 4 or any(b >= a for a, b in zip(taus, taus[1:])):
        raise InvalidArgumentError("need at least 4 strictly decreasing time steps")
    solver = solver or SolverConfig()
    ref = reference_integrate(sys.vector_field(), x0, t_end, rel_tol=1e-13).states[-1]
    errs = []
    for tau in taus:
        n = int(round(t_end / tau))
        if n < 1 or abs(n * tau - t_end) > 1e-9 * t_end:
            raise InvalidArgumentError(f"t_end={t_end} is not a multiple of tau={tau}")
        traj = integrate(sys, x0, t_end / n, n, scheme, policy, solver)
        errs.append(np.linalg.norm(traj.states[-1] - ref))
    slope, _ = np.polyfit(np.log(taus), np.log(errs), 1)
    return float(slope)


def explicit_euler(f: VectorField, x0, tau: float, n_steps: int,
                   track: Sequence[ScalarField] = ()) -> Trajectory:
    """Forward Euler, used only as a non-structure-preserving comparison."""
    x = as_state(x0, f.dimension)
    states = [x]
    for _ in range(n_steps):
        x = x + tau * f(x)
        if not np.all(np.isfinite(x)):
            break
        states.append(x)
    n = len(states)
    return make_trajectory(states, tau, list(track), [0] * n, [0.0] * n)

