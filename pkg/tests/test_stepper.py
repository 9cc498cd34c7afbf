import numpy as np
import pytest

from conftest import cayley, harmonic_oscillator
from dgint.core import (
    InvalidArgumentError,
    ScalarField,
    SolverDivergenceError,
    StructureClass,
    VectorField,
)
from dgint.discgrad import CoordinateIncrement, MeanValue, Midpoint
from dgint.lingrad import default_L
from dgint.multigrad import multi_step, multilinear_rhs
from dgint.stepper import (
    LTildePolicy,
    SolverConfig,
    SolverMethod,
    empirical_order,
    explicit_euler,
    integrate,
    reference_integrate,
    solve_implicit,
    step,
)
from dgint.systems import CATALOG, builtin

FROZEN, MID = LTildePolicy.FROZEN_AT_X, LTildePolicy.MIDPOINT
TAUS = [0.2, 0.1, 0.05, 0.025, 0.0125]


def per_step_changes(sys, traj, tau, scheme=Midpoint()):
    """(V(x_{k+1}) - V(x_k), allowed slack) for each step."""
    out = []
    for k in range(len(traj) - 1):
        x, y = traj.states[k], traj.states[k + 1]
        G = scheme(sys.V, x, y)
        tol = SolverConfig().tolerance(x) if traj.residuals[k + 1] == 0 else traj.residuals[k + 1]
        slack = tau * np.linalg.norm(G) * max(tol, traj.residuals[k + 1])
        slack += 8 * np.finfo(float).eps * (1 + abs(traj.v_values[0, k]))
        out.append((traj.v_values[0, k + 1] - traj.v_values[0, k], slack))
    return out


@pytest.mark.parametrize("policy", [FROZEN, MID])
@pytest.mark.parametrize("tau", [0.01, 0.1, 0.5])
def test_cayley_step(policy, tau):
    cfg = SolverConfig(tol=1e-13)
    y, d = step(harmonic_oscillator(), [1.0, 0.0], tau, Midpoint(), policy, cfg)
    np.testing.assert_allclose(y, cayley([1.0, 0.0], tau), atol=10 * cfg.tol)
    assert d.residual <= cfg.tol
    assert np.linalg.norm(y) == pytest.approx(1.0, abs=1e-13)


def test_cayley_numbers():
    y, _ = step(harmonic_oscillator(), [1.0, 0.0], 0.1)
    np.testing.assert_allclose(y, [0.9950125, -0.0997506], atol=1e-7)


def test_equilibrium_is_fixed():
    y, d = step(builtin("pendulum"), [0.0, 0.0], 0.1)
    assert d.iterations == 0
    np.testing.assert_array_equal(y, [0.0, 0.0])


def test_nonpositive_tau():
    with pytest.raises(InvalidArgumentError):
        step(harmonic_oscillator(), [1.0, 0.0], 0.0)


def test_damped_particle_step_dissipates():
    sys = builtin("damped-particle", {"alpha": 1.0}, potential="x1^2/2")
    x = np.array([1.0, 1.0])
    y, _ = step(sys, x, 0.1)
    assert sys.V(y) <= sys.V(x)


def test_solve_implicit_linear_newton():
    a = np.array([3.0, -1.0, 2.5])
    y, d = solve_implicit(lambda y: y - a, np.zeros(3), SolverConfig(method=SolverMethod.NEWTON_FD))
    np.testing.assert_allclose(y, a, atol=1e-12)
    assert d.iterations == 1


def test_solve_implicit_cayley_fixed_point():
    sys, x, tau = harmonic_oscillator(), np.array([1.0, 0.0]), 0.1
    J = sys.L(x)

    def residual(y):
        return (y - x) / tau - J @ ((x + y) / 2)

    # the error contracts by tau/2 per sweep from an initial residual of 1
    for tol, bound in [(1e-6, 5), (1e-8, 7), (1e-12, 10)]:
        y, d = solve_implicit(residual, x, SolverConfig(tol=tol), scale=tau)
        np.testing.assert_allclose(y, cayley(x, tau), atol=tol)
        assert d.method is SolverMethod.FIXED_POINT
        assert d.iterations <= bound
        assert d.iterations <= int(np.ceil(np.log(tol) / np.log(tau / 2))) + 1


@pytest.mark.parametrize("method", list(SolverMethod))
def test_solve_implicit_no_root(method):
    cfg = SolverConfig(method=method, max_iter=30)
    with pytest.raises(SolverDivergenceError):
        solve_implicit(lambda y: y ** 2 + 1, [0.5], cfg)


def test_solve_implicit_without_fallback():
    with pytest.raises(SolverDivergenceError):
        solve_implicit(lambda y: y ** 2 + 1, [0.5], SolverConfig(fallback=False, max_iter=20))


def test_solver_config_validation():
    with pytest.raises(InvalidArgumentError):
        SolverConfig(tol=0.0)
    with pytest.raises(InvalidArgumentError):
        SolverConfig(max_iter=0)
    assert SolverConfig().tolerance([3.0, 4.0]) == pytest.approx(6e-12)


def test_newton_fallback_on_stiff_damping():
    sys = builtin("damped-particle", {"alpha": 50.0})
    x = np.array([1.0, 0.5])
    y, d = step(sys, x, 0.1)
    assert d.method is SolverMethod.NEWTON_FD
    assert d.residual <= SolverConfig().tolerance(x)
    assert sys.V(y) <= sys.V(x)


def test_pendulum_long_run_conserves():
    sys = builtin("pendulum")
    traj = integrate(sys, [2.0, 0.0], 0.1, 2000, solver=SolverConfig(tol=1e-13))
    assert len(traj) == 2001
    assert traj.max_drift() <= 1e-9
    for dv, slack in per_step_changes(sys, traj, 0.1):
        assert abs(dv) <= slack


def test_rigid_body_itoh_abe_conserves():
    sys = builtin("rigid-body")
    traj = integrate(sys, [1.0, 0.5, 0.2], 0.1, 500, CoordinateIncrement(), FROZEN)
    assert traj.max_drift() <= 1e-9
    for dv, slack in per_step_changes(sys, traj, 0.1, CoordinateIncrement()):
        assert abs(dv) <= slack


def test_extra_tracked_functions():
    from dgint.systems import casimir

    traj = integrate(builtin("rigid-body"), [1.0, 0.5, 0.2], 0.05, 50, track=[casimir()])
    assert traj.v_values.shape == (2, 51)
    assert traj.labels == ("H", "C")
    # the Casimir is quadratic so the midpoint rule preserves it as well
    assert traj.max_drift(1) <= 1e-10


def test_lotka_volterra_short_horizon():
    sys = builtin("lotka-volterra")
    traj = integrate(sys, [0.0, 0.0, 0.0], 0.01, 50)
    assert traj.max_drift() <= 1e-9


def test_lotka_volterra_blow_up_returns_partial_trajectory():
    with pytest.raises(SolverDivergenceError) as info:
        integrate(builtin("lotka-volterra"), [0.0, 0.0, 0.0], 0.01, 1000)
    exc = info.value
    assert 40 <= exc.step_index <= 70
    assert len(exc.trajectory) == exc.step_index + 1
    assert exc.trajectory.max_drift() <= 1e-8


@pytest.mark.parametrize("name,x0", [
    ("lyapunov-example", [1.0, 1.0]),
    ("damped-particle", [2.0, 0.0]),
    ("gradient-example", [1.7, -0.8]),
    ("wind-oscillation", [0.3, 0.2]),
])
def test_dissipative_runs_are_monotone(name, x0):
    sys = builtin(name)
    traj = integrate(sys, x0, 0.05, 500)
    for dv, slack in per_step_changes(sys, traj, 0.05):
        assert dv <= slack
    assert traj.v_values[0, -1] < traj.v_values[0, 0]


def test_lyapunov_example_strictly_decreasing():
    traj = integrate(builtin("lyapunov-example"), [1.0, 1.0], 0.05, 500)
    v = traj.v_values[0]
    dv = np.diff(v)
    far = v[1:] > 1e-3
    assert np.all(dv[far] < 0)


def test_reference_harmonic_period():
    traj = reference_integrate(harmonic_oscillator().vector_field(), [1.0, 0.0], 2 * np.pi)
    np.testing.assert_allclose(traj.states[-1], [1.0, 0.0], atol=1e-8)


def test_reference_constant_field():
    f = VectorField(2, lambda x: np.zeros(2))
    traj = reference_integrate(f, [0.3, -0.2], 5.0, t_eval=np.linspace(0, 5, 11))
    assert len(traj) == 11
    np.testing.assert_array_equal(traj.states, np.tile([0.3, -0.2], (11, 1)))


def test_reference_rejects_tight_tolerance():
    with pytest.raises(InvalidArgumentError):
        reference_integrate(harmonic_oscillator().vector_field(), [1.0, 0.0], 1.0, rel_tol=1e-14)


def test_pendulum_short_time_agrees_with_reference():
    sys = builtin("pendulum")
    errs = []
    for tau in (0.01, 0.005):
        traj = integrate(sys, [1.0, 0.0], tau, int(round(0.1 / tau)))
        ref = reference_integrate(sys.vector_field(), [1.0, 0.0], 0.1, rel_tol=1e-13)
        errs.append(np.linalg.norm(traj.states[-1] - ref.states[-1]))
    assert errs[0] <= 1e-5
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def _one_step(sys, x, tau):
    if hasattr(sys, "V_list"):
        return multi_step(sys, x, tau)[0], lambda y: multilinear_rhs(sys, y)
    return step(sys, x, tau)[0], sys.raw_f


@pytest.mark.parametrize("name", list(CATALOG))
def test_single_small_step_consistency(name, rng):
    sys = builtin(name)
    for _ in range(3):
        x = rng.uniform(-1, 1, sys.dimension)
        if name == "lyapunov-example":
            x = x + np.sign(x) * 0.2
        y, f = _one_step(sys, x, 1e-4)
        ref = reference_integrate(VectorField(sys.dimension, f), x, 1e-4, rel_tol=1e-12)
        assert np.linalg.norm(y - ref.states[-1]) <= 1e-7


def test_step_output_has_linear_gradient_form(rng):
    # rebuilding a matrix from the step increment and the discrete gradient
    # reproduces the increment, and its symmetric part carries the sign of dV
    for name in ("pendulum", "damped-particle", "wind-oscillation"):
        sys = builtin(name)
        x = rng.uniform(-1, 1, 2)
        y, _ = step(sys, x, 0.1)
        G = Midpoint()(sys.V, x, y)
        inc = (y - x) / 0.1
        Lt = default_L(inc, G)
        np.testing.assert_allclose(Lt @ G, inc, atol=1e-12)
        rate = (sys.V(y) - sys.V(x)) / 0.1
        assert G @ Lt @ G == pytest.approx(rate, abs=1e-10)


def test_order_midpoint_pendulum():
    slope = empirical_order(builtin("pendulum"), Midpoint(), MID, [1.0, 0.0], 1.0, TAUS)
    assert slope == pytest.approx(2.0, abs=0.1)


def test_order_frozen_policy_rigid_body_is_one():
    # freezing a state-dependent L at x breaks the symmetry of the map
    sys = builtin("rigid-body")
    assert empirical_order(sys, CoordinateIncrement(), FROZEN, [1.0, 0.5, 0.2], 1.0, TAUS) == \
        pytest.approx(1.0, abs=0.15)
    assert empirical_order(sys, CoordinateIncrement(), MID, [1.0, 0.5, 0.2], 1.0, TAUS) == \
        pytest.approx(2.0, abs=0.1)


def test_order_itoh_abe_non_separable_is_one():
    slope = empirical_order(builtin("wind-oscillation"), CoordinateIncrement(), MID, [0.3, 0.2], 1.0, TAUS)
    assert slope == pytest.approx(1.0, abs=0.15)


def test_order_itoh_abe_separable_pendulum_is_two():
    # with V = T(x2) + U(x1) every Itoh-Abe component is a symmetric secant
    slope = empirical_order(builtin("pendulum"), CoordinateIncrement(), FROZEN, [1.0, 0.0], 1.0, TAUS)
    assert slope == pytest.approx(2.0, abs=0.1)


def test_order_linear_system_at_least_one():
    sys = builtin("gradient-example")
    slope = empirical_order(sys, MeanValue(2), FROZEN, [0.3, 0.5], 1.0, TAUS)
    assert slope >= 1.0


def test_order_rejects_short_tau_list():
    with pytest.raises(InvalidArgumentError):
        empirical_order(builtin("pendulum"), Midpoint(), MID, [1.0, 0.0], 1.0, [0.1, 0.05, 0.025])


def test_explicit_euler_drifts():
    sys = builtin("pendulum")
    traj = explicit_euler(sys.raw_f, [2.0, 0.0], 0.1, 1000, track=[sys.V])
    assert traj.max_drift() > 1e-2


def test_integrate_is_deterministic():
    sys = builtin("rigid-body")
    a = integrate(sys, [1.0, 0.5, 0.2], 0.1, 100)
    b = integrate(sys, [1.0, 0.5, 0.2], 0.1, 100)
    np.testing.assert_array_equal(a.states, b.states)


def test_reference_reports_blow_up():
    from dgint.core import StepSizeUnderflowError

    with pytest.raises(StepSizeUnderflowError, match="t_end=0.7"):
        reference_integrate(builtin("lotka-volterra").raw_f, [0.0, 0.0, 0.0], 0.7)
