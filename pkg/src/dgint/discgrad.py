"""Discrete gradients: two-point maps G(x, x') with

    G(x, x') . (x' - x) = V(x') - V(x)   and   G(x, x) = grad V(x).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import InvalidArgumentError, ScalarField


def coincidence_threshold(x, xp) -> float:
    return 1e-8 * (1.0 + np.linalg.norm(x) + np.linalg.norm(xp))


def midpoint_discrete_gradient(V: ScalarField, x, xp) -> np.ndarray:
    """Gonzalez midpoint discrete gradient."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise InvalidArgumentError("x and x' dimensions disagree")
    d = xp - x
    dd = float(d @ d)
    g = V.grad(0.5 * (x + xp))
    # below the threshold the secant correction is rounding noise and is
    # itself O(|d|^2); dropping it keeps the map continuous
    if np.sqrt(dd) <= coincidence_threshold(x, xp):
        return g
    return g + ((V(xp) - V(x) - float(g @ d)) / dd) * d


def coordinate_increment_discrete_gradient(V: ScalarField, x, xp) -> np.ndarray:
    """Itoh-Abe discrete gradient: one coordinate updated at a time."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise InvalidArgumentError("x and x' dimensions disagree")
    eps = coincidence_threshold(x, xp)
    out = np.empty_like(x)
    y = x.copy()
    v_prev = V(y)
    for i in range(x.size):
        di = xp[i] - x[i]
        if abs(di) <= eps:
            mid = y.copy()
            mid[i] = 0.5 * (x[i] + xp[i])
            out[i] = V.grad(mid)[i]
            y[i] = xp[i]
            v_prev = V(y)
        else:
            y[i] = xp[i]
            v_next = V(y)
            out[i] = (v_next - v_prev) / di
            v_prev = v_next
    return out


@lru_cache(maxsize=None)
def _gauss_legendre_01(q: int):
    nodes, weights = np.polynomial.legendre.leggauss(q)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def mean_value_discrete_gradient(V: ScalarField, x, xp, q: int = 2) -> np.ndarray:
    """Average of grad V along the segment, by q-point Gauss-Legendre.

    Exact (hence a true discrete gradient) only while grad V restricted to
    the segment is a polynomial of degree <= 2q - 1.
    """
    if not 1 <= q <= 16:
        raise InvalidArgumentError("quadrature_points must be in 1..16")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise InvalidArgumentError("x and x' dimensions disagree")
    d = xp - x
    if np.linalg.norm(d) <= coincidence_threshold(x, xp):
        return V.grad(0.5 * (x + xp))
    s, w = _gauss_legendre_01(q)
    return sum(wk * V.grad(x + sk * d) for sk, wk in zip(s, w))


@dataclass(frozen=True)
class Midpoint:
    def __call__(self, V, x, xp):
        return midpoint_discrete_gradient(V, x, xp)

    def __str__(self):
        return "midpoint"


@dataclass(frozen=True)
class CoordinateIncrement:
    def __call__(self, V, x, xp):
        return coordinate_increment_discrete_gradient(V, x, xp)

    def __str__(self):
        return "itoh-abe"


@dataclass(frozen=True)
class MeanValue:
    quadrature_points: int = 2

    def __post_init__(self):
        if not 1 <= self.quadrature_points <= 16:
            raise InvalidArgumentError("quadrature_points must be in 1..16")

    def __call__(self, V, x, xp):
        return mean_value_discrete_gradient(V, x, xp, self.quadrature_points)

    def __str__(self):
        return f"avf:{self.quadrature_points}"


DiscreteGradientScheme = Midpoint | CoordinateIncrement | MeanValue


def scheme_from_string(text: str) -> DiscreteGradientScheme:
    """``midpoint``, ``itoh-abe`` or ``avf:q`` (``avf`` alone means q=2)."""
    key = text.strip().lower()
    if key == "midpoint":
        return Midpoint()
    if key in ("itoh-abe", "coordinate-increment"):
        return CoordinateIncrement()
    if key == "avf" or key.startswith("avf:"):
        q = key.partition(":")[2] or "2"
        try:
            return MeanValue(int(q))
        except ValueError:
            raise InvalidArgumentError(f"bad quadrature count in {text!r}") from None
    raise InvalidArgumentError(f"unknown discrete gradient scheme {text!r}")


def check_axioms(scheme, V: ScalarField, sample_pairs, relative: bool = False) -> tuple[float, float]:
    """Max residuals of the two discrete-gradient axioms over ``sample_pairs``.

    With ``relative=True`` each secant residual is divided by
    1 + |V(x)| + |V(x')|.
    """
    ax1 = ax2 = 0.0
    for x, xp in sample_pairs:
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        vx, vxp = V(x), V(xp)
        r1 = abs(float(scheme(V, x, xp) @ (xp - x)) - (vxp - vx))
        if relative:
            r1 /= 1.0 + abs(vx) + abs(vxp)
        r2 = float(np.linalg.norm(scheme(V, x, x) - V.grad(x)))
        ax1, ax2 = max(ax1, r1), max(ax2, r2)
    return ax1, ax2
