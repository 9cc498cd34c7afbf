"""Linear-gradient representations x' = L(x) grad V(x).

Builds the explicit skew/definite L for a system with a known integral or
Lyapunov function, checks structure classes over point clouds, applies
coordinate congruences and checks the Jacobi identity of Poisson structures.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from .core import (
    GradientTooSmallError,
    InvalidArgumentError,
    LinearGradientSystem,
    ScalarField,
    StructureClass,
    StructureMatrixField,
    VectorField,
    classify_matrix,
    combine_classes,
)

EPS_GRAD = 1e-12


def default_L(f_val, grad_v, eps_grad: float = EPS_GRAD) -> np.ndarray:
    """L_ij = (f_i v_j - v_i f_j + delta_ij f.v) / |v|^2, so that L v = f.

    The quadratic form is w^T L w = |w|^2 (f.v)/|v|^2, hence the class of L
    follows the sign of f.v.
    """
    f = np.asarray(f_val, dtype=float)
    v = np.asarray(grad_v, dtype=float)
    if f.shape != v.shape or f.ndim != 1:
        raise InvalidArgumentError("f and grad V must be vectors of equal length")
    vv = float(v @ v)
    if np.sqrt(vv) <= eps_grad:
        raise GradientTooSmallError(f"|grad V| = {np.sqrt(vv):.3e} <= {eps_grad:.1e}")
    L = np.outer(f, v) - np.outer(v, f)
    L[np.diag_indices_from(L)] += float(f @ v)
    return L / vv


def sample_box(n: int, lo: float, hi: float, n_points: int = 1000, seed: int = 0) -> np.ndarray:
    """Deterministic quasi-random points in [lo, hi]^n (scrambled Halton)."""
    if not hi > lo:
        raise InvalidArgumentError("box must satisfy lo < hi")
    pts = qmc.Halton(d=n, scramble=True, seed=seed).random(n_points)
    return qmc.scale(pts, [lo] * n, [hi] * n) if n > 0 else pts


def classify_by_rate(f: VectorField, V: ScalarField, points, tol: float = 1e-10,
                     eps_grad: float = EPS_GRAD) -> StructureClass:
    """Class implied by the sign of dV/dt = f . grad V over ``points``.

    The rate is normalised by |f||grad V| before comparing with ``tol``.
    Points with grad V ~ 0 are skipped; points with f ~ 0 do not count
    against the definite class.
    """
    rates, moving = [], []
    for x in np.atleast_2d(points):
        v = V.grad(x)
        nv = np.linalg.norm(v)
        if nv <= eps_grad:
            continue
        fx = f(x)
        nf = np.linalg.norm(fx)
        rates.append(0.0 if nf == 0 else float(fx @ v) / (nf * nv))
        moving.append(nf > tol)
    if not rates:
        return StructureClass.UNCLASSIFIED
    rates = np.array(rates)
    moving = np.array(moving)
    if np.all(np.abs(rates) <= tol):
        return StructureClass.ANTISYMMETRIC
    if np.all(rates[moving] < -tol) and np.all(rates[~moving] <= tol):
        return StructureClass.NEGATIVE_DEFINITE
    if np.all(rates <= tol):
        return StructureClass.NEGATIVE_SEMIDEFINITE
    return StructureClass.UNCLASSIFIED


def detect_class(L: StructureMatrixField, points, tol: float = 1e-12) -> StructureClass:
    """Weakest common class of ``L(x)`` over ``points``; singular points are skipped."""
    classes = []
    for x in np.atleast_2d(points):
        try:
            M = L(x)
        except (GradientTooSmallError, ArithmeticError):
            continue
        if not np.all(np.isfinite(M)):
            continue
        classes.append(classify_matrix(M, tol))
    return combine_classes(classes)


def build_linear_gradient_system(f: VectorField, V: ScalarField, eps_grad: float = EPS_GRAD,
                                 points=None, tol: float = 1e-10,
                                 name: str = "system") -> LinearGradientSystem:
    """Rewrite x' = f(x) with integral/Lyapunov function V as x' = L(x) grad V(x).

    ``points`` is the cloud used to decide the declared class; by default
    1000 quasi-random points in [-1, 1]^n.
    """
    if f.dimension != V.dimension:
        raise InvalidArgumentError("f and V dimensions disagree")
    n = f.dimension
    if points is None:
        points = sample_box(n, -1.0, 1.0)
    declared = classify_by_rate(f, V, points, tol=tol, eps_grad=eps_grad)

    def L(x):
        return default_L(f(x), V.grad(x), eps_grad)

    return LinearGradientSystem(n, StructureMatrixField(n, L, declared), V, raw_f=f, name=name)


def transform_L(L, dC, det_tol: float = 1e-12) -> np.ndarray:
    """Congruence dC L dC^T for the coordinate change with Jacobian ``dC``."""
    L = np.asarray(L, dtype=float)
    dC = np.asarray(dC, dtype=float)
    if dC.ndim != 2 or dC.shape[0] != dC.shape[1] or L.shape != dC.shape:
        raise InvalidArgumentError("L and dC must be square matrices of equal size")
    if abs(np.linalg.det(dC)) <= det_tol:
        raise InvalidArgumentError("coordinate Jacobian is singular")
    return dC @ L @ dC.T


def verify_jacobi(Omega, x, fd_step: float = 1e-5) -> float:
    """Max |Om_jk d_k Om_lm + Om_lk d_k Om_mj + Om_mk d_k Om_jl| over all (j, l, m).

    ``Omega`` is a callable (or StructureMatrixField); derivatives are
    central differences.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    W = np.asarray(Omega(x), dtype=float)
    # dW[k] = d Omega / d x_k
    dW = np.empty((n, n, n))
    for k in range(n):
        h = fd_step * (1.0 + abs(x[k]))
        e = np.zeros(n)
        e[k] = h
        dW[k] = (np.asarray(Omega(x + e)) - np.asarray(Omega(x - e))) / (2 * h)
    # T[j, l, m] = sum_k W[j, k] dW[k, l, m]
    T = np.einsum("jk,klm->jlm", W, dW)
    cyc = T + np.transpose(T, (1, 2, 0)) + np.transpose(T, (2, 0, 1))
    return float(np.max(np.abs(cyc)))
