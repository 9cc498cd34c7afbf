"""Acceptance criteria, one PASS/FAIL line each (printed after the run).

Tolerances are the pinned values; nothing here is loosened to make a
criterion pass.
"""

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, cayley, harmonic_oscillator
from exprgen import central_difference, random_expression
from dgint.core import StructureClass
from dgint.discgrad import CoordinateIncrement, Midpoint, check_axioms
from dgint.exprlang import gradient, parse, scalar_field, to_source
from dgint.lingrad import default_L, detect_class, sample_box
from dgint.multigrad import (
    bracket,
    constant_tensor,
    coordinate_function,
    leibniz_check,
    levi_civita,
    lyapunov_bracket_W,
    multi_integrate,
    multilinear_rhs,
)
from dgint.stepper import LTildePolicy, SolverConfig, SolverDivergenceError, empirical_order, integrate, step
from dgint.systems import CATALOG, builtin, rigid_body_omega

ANTI = StructureClass.ANTISYMMETRIC
NSD = StructureClass.NEGATIVE_SEMIDEFINITE
ND = StructureClass.NEGATIVE_DEFINITE
TAUS = [0.2, 0.1, 0.05, 0.025, 0.0125]


def record(label, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, detail


def potentials():
    for name in CATALOG:
        sys = builtin(name)
        for V in getattr(sys, "V_list", None) or (sys.V,):
            yield f"{name}/{V.name}", V


def test_c1_discrete_gradient_axioms():
    rng = np.random.default_rng(1)
    worst1 = worst2 = 0.0
    where = ""
    for label, V in potentials():
        pairs = rng.uniform(-3, 3, (500, 2, V.dimension))
        for scheme in (Midpoint(), CoordinateIncrement()):
            a1, a2 = check_axioms(scheme, V, pairs, relative=True)
            if a1 > worst1:
                worst1, where = a1, f"{label} {scheme}"
            worst2 = max(worst2, a2)
    record("C1 discrete-gradient axioms", worst1 <= 1e-11 and worst2 <= 1e-12,
           f"axiom1 {worst1:.2e} (<= 1e-11, worst {where}), axiom2 {worst2:.2e} (<= 1e-12)")


# catalog entry, parameters, expected class
CLASS_CASES = [
    ("pendulum", {}, ANTI),
    ("rigid-body", {}, ANTI),
    ("lotka-volterra", {}, ANTI),
    ("gradient-example", {}, ND),
    ("lyapunov-example", {}, ND),
    ("damped-particle", {"alpha": 0.0}, ANTI),
    ("damped-particle", {"alpha": 1.0}, NSD),
    ("wind-oscillation", {"zeta": 0.0, "lambda": 0.5}, ANTI),
    ("wind-oscillation", {"zeta": 0.5, "lambda": 0.5}, ND),
    ("wind-degenerate-integral", {}, ANTI),
    ("wind-degenerate-lyapunov", {}, ND),
]


def test_c2_reconstruction_and_classes():
    rng = np.random.default_rng(2)
    worst = 0.0
    for name in CATALOG:
        sys = builtin(name)
        V = sys.V_list[0] if hasattr(sys, "V_list") else sys.V
        used = 0
        while used < 100:
            x = rng.uniform(-2, 2, sys.dimension)
            g = V.grad(x)
            if np.linalg.norm(g) <= 1e-6:
                continue
            fx = sys.raw_f(x)
            worst = max(worst, np.linalg.norm(default_L(fx, g) @ g - fx) / (1 + np.linalg.norm(fx)))
            used += 1
    wrong = []
    for name, params, expected in CLASS_CASES:
        sys = builtin(name, params)
        got = detect_class(sys.L, sample_box(sys.dimension, -1.5, 1.5, 300, seed=5))
        if got is not expected or sys.structure_class is not expected:
            wrong.append(f"{name}{params}: {got.value}")
    record("C2 reconstruction + structure classes", worst <= 1e-10 and not wrong,
           f"reconstruction {worst:.2e} (<= 1e-10), class mismatches: {wrong or 'none'}")


CONSERVATIVE = [
    ("pendulum", {}, [2.0, 0.0], 0.1),
    ("rigid-body", {"I1": 1, "I2": 2, "I3": 3}, [1.0, 0.5, 0.2], 0.1),
    ("lotka-volterra", {"B": 1}, [0.0, 0.0, 0.0], 0.01),
]


def _conservation(sys, x0, tau, n_steps=10_000):
    """(max drift, trend over run, steps completed, failure note)."""
    note = ""
    try:
        traj = integrate(sys, x0, tau, n_steps, Midpoint(), LTildePolicy.MIDPOINT, SolverConfig(tol=1e-13))
    except SolverDivergenceError as exc:
        traj = exc.trajectory
        note = f"solver diverged at step {exc.step_index} (t={exc.step_index * tau:.3f})"
    drift = traj.drift()
    k = np.arange(len(drift))
    trend = abs(np.polyfit(k, drift, 1)[0]) * n_steps if len(drift) > 2 else 0.0
    monotone = len(drift) > 2 and bool(np.all(np.diff(np.abs(drift)) >= 0))
    return float(np.max(np.abs(drift))), trend, monotone, len(traj) - 1, note


@pytest.mark.slow
@pytest.mark.parametrize("name,params,x0,tau", CONSERVATIVE, ids=[c[0] for c in CONSERVATIVE])
def test_c3_exact_conservation(name, params, x0, tau):
    drift, trend, monotone, done, note = _conservation(builtin(name, params), x0, tau)
    ok = done == 10_000 and drift <= 1e-8 and trend <= 1e-8 and not monotone
    record(f"C3 conservation {name}", ok,
           f"{done}/10000 steps, max drift {drift:.2e} (<= 1e-8), linear trend {trend:.2e}"
           + (f"; {note}" if note else ""))


def _monotone(sys, x0):
    traj = integrate(sys, x0, 0.05, 1000)
    return float(np.max(np.diff(traj.v_values[0])))


@pytest.mark.slow
def test_c4_dissipation():
    cases = [
        ("damped-particle", {"alpha": 1.0}, [2.0, 0.0]),
        ("lyapunov-example", {}, [1.0, 1.0]),
        ("wind-oscillation", {"zeta": 0.5, "lambda": 0.5}, [0.3, 0.2]),
        ("wind-oscillation", {"zeta": 0.2, "lambda": 0.0}, [0.3, 0.2]),
    ]
    rises = {f"{n}{p}": _monotone(builtin(n, p), x0) for n, p, x0 in cases}
    worst = max(rises.values())
    drift, _, monotone, done, _ = _conservation(builtin("wind-oscillation", {"zeta": 0.0, "lambda": 0.5}),
                                                [0.2, 0.1], 0.1)
    ok = worst <= 1e-10 and drift <= 1e-8 and done == 10_000 and not monotone
    record("C4 dissipation", ok,
           f"largest per-step increase {worst:.2e} (<= 1e-10); zeta=0 drift {drift:.2e} (<= 1e-8)")


def test_c5_cayley_oracle():
    cfg = SolverConfig(tol=1e-13)
    worst = 0.0
    for tau in (0.01, 0.1, 0.5):
        for x in ([1.0, 0.0], [0.3, -0.7]):
            y, _ = step(harmonic_oscillator(), x, tau, Midpoint(), LTildePolicy.MIDPOINT, cfg)
            worst = max(worst, float(np.max(np.abs(y - cayley(x, tau)))))
    record("C5 Cayley closed form", worst <= 10 * cfg.tol, f"max component error {worst:.2e} (<= 1e-12)")


def test_c6_multilinear():
    rng = np.random.default_rng(6)
    nambu, poisson = builtin("rigid-body-nambu"), builtin("rigid-body")
    rhs_err = max(np.linalg.norm(multilinear_rhs(nambu, x) - rigid_body_omega(x) @ poisson.V.grad(x))
                  for x in rng.uniform(-2, 2, (100, 3)))
    traj = multi_integrate(nambu, [1.0, 0.5, 0.2], 0.05, 2000)
    d1, d2 = traj.max_drift(0), traj.max_drift(1)
    W = max(abs(lyapunov_bracket_W(nambu, V, x)) for x in rng.uniform(-2, 2, (100, 3)) for V in nambu.V_list)
    ok = rhs_err <= 1e-12 and d1 <= 1e-8 and d2 <= 1e-8 and W <= 1e-11
    record("C6 multilinear form", ok,
           f"rhs {rhs_err:.2e} (<= 1e-12), drift H {d1:.2e} C {d2:.2e} (<= 1e-8), W {W:.2e} (<= 1e-11)")


def test_c7_bracket_identities():
    rng = np.random.default_rng(7)
    eps = constant_tensor(levi_civita(3))
    phis = ["x1*x2", "sin(x1) + x2^2", "exp(x1/2)*x2", "x1/(2 + cos(x2))", "tanh(x1 - x2)"]
    worst = 0.0
    for k in range(50):
        gs = [scalar_field(random_expression(rng, 3, 4), 3) for _ in range(2)]
        fs = [scalar_field(random_expression(rng, 3, 4), 3) for _ in range(3)]
        x = rng.uniform(-1, 1, 3)
        worst = max(worst, leibniz_check(eps, fs, gs, scalar_field(phis[k % 5], 2), k % 3, x))
    T = rng.normal(size=(3, 3, 3))
    xs = [coordinate_function(i, 3) for i in range(3)]
    exact = all(bracket(constant_tensor(T), [xs[i], xs[j], xs[k]], rng.normal(size=3)) == T[i, j, k]
                for i in range(3) for j in range(3) for k in range(3))
    record("C7 bracket identities", worst <= 1e-9 and exact,
           f"Leibniz residual {worst:.2e} (<= 1e-9), fundamental brackets exact: {exact}")


def test_c8_order_midpoint():
    slope = empirical_order(builtin("pendulum"), Midpoint(), LTildePolicy.MIDPOINT, [1.0, 0.0], 1.0, TAUS)
    record("C8 order midpoint/midpoint (pendulum)", abs(slope - 2.0) <= 0.1, f"slope {slope:.4f} (2.0 +- 0.1)")


def test_c8_order_itoh_abe():
    slope = empirical_order(builtin("pendulum"), CoordinateIncrement(), LTildePolicy.FROZEN_AT_X,
                            [1.0, 0.0], 1.0, TAUS)
    record("C8 order itoh-abe/frozen (pendulum)", abs(slope - 1.0) <= 0.15, f"slope {slope:.4f} (1.0 +- 0.15)")


def test_c9_expression_layer():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(200):
        e = random_expression(rng, 3, 6)
        V = scalar_field(e, 3)
        x = rng.uniform(-1, 1, 3)
        g = V.grad(x)
        fd = np.array([central_difference(V, x, i) for i in range(3)])
        worst = max(worst, float(np.max(np.abs(g - fd) / (1 + np.abs(fd)))))
    V = scalar_field(parse("exp(x2 - x1) + B*(x2 - x1) - x3", 3, ("B",)), 3, {"B": 1.0})
    hand = 0.0
    for x in rng.uniform(-2, 2, (10, 3)):
        hand = max(hand, abs(V(x) - (np.exp(x[1] - x[0]) + (x[1] - x[0]) - x[2])))
    record("C9 expression layer", worst <= 1e-5 and hand <= 1e-14,
           f"gradient vs finite differences {worst:.2e} (<= 1e-5), parsed V vs hand {hand:.2e} (<= 1e-14)")
