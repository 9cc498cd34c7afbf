"""Catalog of example systems, each with its raw vector field and its
(multi)linear-gradient form.

=========================  ================================  =========================
name                       parameters (default)              structure of L
=========================  ================================  =========================
pendulum                   none                              antisymmetric (J)
rigid-body                 I1, I2, I3 (1, 2, 3)              antisymmetric (Lie-Poisson)
rigid-body-nambu           I1, I2, I3 (1, 2, 3)              Levi-Civita 3-tensor
lotka-volterra             B (1)                             antisymmetric
gradient-example           none                              -Id
lyapunov-example           none                              negative definite
damped-particle            alpha (1), potential 1 - cos(x1) antisymmetric / neg. semidef.
wind-oscillation           zeta (0.5), lambda (0.5), theta   antisymmetric / neg. definite
wind-degenerate-integral   none                              antisymmetric (J)
wind-degenerate-lyapunov   none                              -Id
=========================  ================================  =========================
"""

from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from .core import (
    GradientTooSmallError,
    InvalidArgumentError,
    LinearGradientSystem,
    ScalarField,
    StructureClass,
    StructureMatrixField,
    VectorField,
    classify_matrix,
)
from .exprlang import scalar_field
from .multigrad import MultiLinearGradientSystem, TensorField, levi_civita

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
ANTI = StructureClass.ANTISYMMETRIC


def _const_L(M, declared=None):
    M = np.array(M, dtype=float)
    declared = declared or classify_matrix(M)
    return StructureMatrixField(M.shape[0], lambda x: M, declared)


def _params(given: Mapping[str, float] | None, defaults: dict) -> dict:
    given = dict(given or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise InvalidArgumentError(f"unknown parameters: {', '.join(sorted(unknown))}")
    out = {**defaults, **given}
    for k, v in out.items():
        if v is None:
            continue
        if not math.isfinite(float(v)):
            raise InvalidArgumentError(f"parameter {k} must be finite")
        out[k] = float(v)
    return out


def pendulum(params=None) -> LinearGradientSystem:
    _params(params, {})
    V = ScalarField(2, lambda x: 0.5 * x[1] ** 2 - math.cos(x[0]),
                    lambda x: np.array([math.sin(x[0]), x[1]]))
    f = VectorField(2, lambda x: np.array([x[1], -math.sin(x[0])]))
    return LinearGradientSystem(2, _const_L(J2, ANTI), V, f, {}, "pendulum")


def _rigid_body_parts(p):
    I = np.array([p["I1"], p["I2"], p["I3"]])
    if np.any(I <= 0):
        raise InvalidArgumentError("moments of inertia must be positive")
    H = ScalarField(3, lambda x: 0.5 * float(np.sum(x * x / I)), lambda x: x / I, name="H")
    a, b, c = 1 / I[1] - 1 / I[2], 1 / I[2] - 1 / I[0], 1 / I[0] - 1 / I[1]
    f = VectorField(3, lambda x: np.array([a * x[1] * x[2], b * x[0] * x[2], c * x[0] * x[1]]))
    return H, f


def rigid_body_omega(x) -> np.ndarray:
    return np.array([[0.0, x[2], -x[1]], [-x[2], 0.0, x[0]], [x[1], -x[0], 0.0]])


def casimir() -> ScalarField:
    return ScalarField(3, lambda x: 0.5 * float(x @ x), lambda x: np.array(x, dtype=float), name="C")


def rigid_body(params=None) -> LinearGradientSystem:
    p = _params(params, {"I1": 1.0, "I2": 2.0, "I3": 3.0})
    H, f = _rigid_body_parts(p)
    L = StructureMatrixField(3, rigid_body_omega, ANTI)
    return LinearGradientSystem(3, L, H, f, p, "rigid-body")


def rigid_body_nambu(params=None) -> MultiLinearGradientSystem:
    p = _params(params, {"I1": 1.0, "I2": 2.0, "I3": 3.0})
    H, f = _rigid_body_parts(p)
    eps = levi_civita(3)
    return MultiLinearGradientSystem(3, TensorField(3, 3, lambda x: eps), (H, casimir()), f, p,
                                     "rigid-body-nambu")


def lotka_volterra(params=None) -> LinearGradientSystem:
    p = _params(params, {"B": 1.0})
    B = p["B"]

    def V(x):
        u = x[1] - x[0]
        return math.exp(u) + B * u - x[2]

    def dV(x):
        e = math.exp(x[1] - x[0])
        return np.array([-e - B, e + B, -1.0])

    def L(x):
        a, b = math.exp(x[2]), math.exp(x[0]) + math.exp(x[2])
        return np.array([[0.0, 0.0, -a], [0.0, 0.0, -b], [a, b, 0.0]])

    def f(x):
        e1, e2, e3 = math.exp(x[0]), math.exp(x[1]), math.exp(x[2])
        return np.array([e3, e1 + e3, B * e1 + e2])

    return LinearGradientSystem(3, StructureMatrixField(3, L, ANTI), ScalarField(3, V, dV),
                                VectorField(3, f), p, "lotka-volterra")


def gradient_example(params=None) -> LinearGradientSystem:
    _params(params, {})
    V = ScalarField(2, lambda x: x[0] ** 2 * (x[0] - 1) ** 2 + x[1] ** 2,
                    lambda x: np.array([2 * x[0] * (x[0] - 1) * (2 * x[0] - 1), 2 * x[1]]))
    f = VectorField(2, lambda x: np.array([-2 * x[0] * (x[0] - 1) * (2 * x[0] - 1), -2 * x[1]]))
    return LinearGradientSystem(2, _const_L(-np.eye(2)), V, f, {}, "gradient-example")


def lyapunov_example(params=None) -> LinearGradientSystem:
    """x1' = -x2 - x1^3, x2' = x1 - x2^3 with V = x1^2 + x2^2.

    L = [[a, b], [-b, a]] with a = -(x1^4 + x2^4) / (2 r^2) and
    b = -(r^2 + x2 x1^3 - x1 x2^3) / (2 r^2), r^2 = x1^2 + x2^2; these are
    half the coefficients usually quoted, which is what L grad V = f needs
    for this V.
    """
    _params(params, {})
    V = ScalarField(2, lambda x: x[0] ** 2 + x[1] ** 2, lambda x: 2.0 * np.asarray(x, dtype=float))

    def L(x):
        r2 = x[0] ** 2 + x[1] ** 2
        if r2 <= 1e-24:
            raise GradientTooSmallError("L is undefined at the origin")
        a = -(x[0] ** 4 + x[1] ** 4) / (2 * r2)
        b = -(r2 + x[1] * x[0] ** 3 - x[0] * x[1] ** 3) / (2 * r2)
        return np.array([[a, b], [-b, a]])

    f = VectorField(2, lambda x: np.array([-x[1] - x[0] ** 3, x[0] - x[1] ** 3]))
    return LinearGradientSystem(2, StructureMatrixField(2, L, StructureClass.NEGATIVE_DEFINITE), V, f,
                                {}, "lyapunov-example")


DEFAULT_POTENTIAL = "2*sin(x1/2)^2"  # = 1 - cos(x1), without cancellation near x1 = 0


def damped_particle(params=None, potential: str = DEFAULT_POTENTIAL) -> LinearGradientSystem:
    """x1' = x2, x2' = -P'(x1) - alpha x2, energy V = x2^2/2 + P(x1).

    ``potential`` is an expression in ``x1`` (and ``alpha``).
    """
    p = _params(params, {"alpha": 1.0})
    alpha = p["alpha"]
    if alpha < 0:
        raise InvalidArgumentError("alpha must be >= 0")
    P = scalar_field(potential, 1, {"alpha": alpha}, name="P")
    V = ScalarField(2, lambda x: 0.5 * x[1] ** 2 + P(x[:1]),
                    lambda x: np.array([P.grad(x[:1])[0], x[1]]))
    f = VectorField(2, lambda x: np.array([x[1], -P.grad(x[:1])[0] - alpha * x[1]]))
    M = np.array([[0.0, 1.0], [-1.0, -alpha]])
    declared = ANTI if alpha == 0 else StructureClass.NEGATIVE_SEMIDEFINITE
    return LinearGradientSystem(2, _const_L(M, declared), V, f, {**p}, "damped-particle")


def _wind_f(zeta, lam):
    return VectorField(2, lambda x: np.array([
        -zeta * x[0] - lam * x[1] + x[0] * x[1],
        lam * x[0] - zeta * x[1] + 0.5 * (x[0] ** 2 - x[1] ** 2)]))


def wind_oscillation(params=None) -> LinearGradientSystem:
    """Averaged wind-induced oscillation with zeta = rho cos(theta), lambda = rho sin(theta).

    When zeta = lambda = 0 the angle is free and taken from ``theta``
    (default 0).
    """
    p = _params(params, {"zeta": 0.5, "lambda": 0.5, "theta": None})
    zeta, lam = p["zeta"], p["lambda"]
    if zeta < 0:
        raise InvalidArgumentError("zeta must be >= 0")
    rho = math.hypot(zeta, lam)
    if rho == 0:
        theta = p["theta"] or 0.0
    else:
        if p["theta"] is not None:
            raise InvalidArgumentError("theta may only be given when zeta = lambda = 0")
        theta = math.atan2(lam, zeta)
    c, s = math.cos(theta), math.sin(theta)
    if rho > 0 and zeta == 0:
        c = 0.0  # cos(atan2(lam, 0)) is only zero to rounding
    M = np.array([[-c, -s], [s, -c]])

    def V(x):
        return (0.5 * rho * (x[0] ** 2 + x[1] ** 2)
                - 0.5 * s * (x[0] * x[1] ** 2 - x[0] ** 3 / 3)
                + 0.5 * c * (x[1] ** 3 / 3 - x[0] ** 2 * x[1]))

    def dV(x):
        return np.array([
            rho * x[0] - 0.5 * s * (x[1] ** 2 - x[0] ** 2) - c * x[0] * x[1],
            rho * x[1] - s * x[0] * x[1] + 0.5 * c * (x[1] ** 2 - x[0] ** 2)])

    params_out = {"zeta": zeta, "lambda": lam, "rho": rho, "theta": theta}
    return LinearGradientSystem(2, _const_L(M), ScalarField(2, V, dV), _wind_f(zeta, lam),
                                params_out, "wind-oscillation")


def wind_degenerate_integral(params=None) -> LinearGradientSystem:
    _params(params, {})
    V = ScalarField(2, lambda x: 0.5 * (x[0] * x[1] ** 2 - x[0] ** 3 / 3),
                    lambda x: np.array([0.5 * (x[1] ** 2 - x[0] ** 2), x[0] * x[1]]), name="V1")
    return LinearGradientSystem(2, _const_L(J2, ANTI), V, _wind_f(0.0, 0.0), {},
                                "wind-degenerate-integral")


def wind_degenerate_lyapunov(params=None) -> LinearGradientSystem:
    _params(params, {})
    V = ScalarField(2, lambda x: 0.5 * (x[1] ** 3 / 3 - x[0] ** 2 * x[1]),
                    lambda x: np.array([-x[0] * x[1], 0.5 * (x[1] ** 2 - x[0] ** 2)]), name="V2")
    return LinearGradientSystem(2, _const_L(-np.eye(2)), V, _wind_f(0.0, 0.0), {},
                                "wind-degenerate-lyapunov")


CATALOG: dict[str, Callable] = {
    "pendulum": pendulum,
    "rigid-body": rigid_body,
    "rigid-body-nambu": rigid_body_nambu,
    "lotka-volterra": lotka_volterra,
    "gradient-example": gradient_example,
    "lyapunov-example": lyapunov_example,
    "damped-particle": damped_particle,
    "wind-oscillation": wind_oscillation,
    "wind-degenerate-integral": wind_degenerate_integral,
    "wind-degenerate-lyapunov": wind_degenerate_lyapunov,
}

# Classification each entry should have with default parameters.
EXPECTED_CLASS = {
    "pendulum": ANTI,
    "rigid-body": ANTI,
    "lotka-volterra": ANTI,
    "gradient-example": StructureClass.NEGATIVE_DEFINITE,
    "lyapunov-example": StructureClass.NEGATIVE_DEFINITE,
    "damped-particle": StructureClass.NEGATIVE_SEMIDEFINITE,
    "wind-oscillation": StructureClass.NEGATIVE_DEFINITE,
    "wind-degenerate-integral": ANTI,
    "wind-degenerate-lyapunov": StructureClass.NEGATIVE_DEFINITE,
}


def builtin(name: str, params: Mapping[str, float] | None = None, **kwargs):
    """Look up a catalog entry and build it with ``params``."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown system {name!r}; available: {', '.join(CATALOG)}") from None
    return factory(params, **kwargs)
