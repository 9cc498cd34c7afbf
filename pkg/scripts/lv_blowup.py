"""How far the Lotka-Volterra run gets before the solution escapes to infinity.

The flow from the origin blows up in finite time (t just under 0.6 for
B = 1), so any fixed-step run of 10^4 steps must stop early. This prints
the reference blow-up bracket and the step at which the discrete map's
solver gives up, for a few step sizes.
"""

import argparse
from dataclasses import dataclass

import numpy as np

from dgint.core import SolverDivergenceError, StepSizeUnderflowError
from dgint.stepper import SolverConfig, integrate, reference_integrate
from dgint.systems import builtin


@dataclass
class Config:
    B: float = 1.0
    taus: tuple = (0.02, 0.01, 0.005, 0.0025)
    n_steps: int = 10_000


def blow_up_time(sys_, lo=0.0, hi=2.0, iters=40):
    """Bisect on whether the reference integrator reaches t."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        try:
            reference_integrate(sys_.raw_f, [0.0, 0.0, 0.0], mid, rel_tol=1e-10)
            lo = mid
        except StepSizeUnderflowError:
            hi = mid
    return lo, hi


def main(cfg: Config):
    sys_ = builtin("lotka-volterra", {"B": cfg.B})
    lo, hi = blow_up_time(sys_)
    print(f"reference solution escapes between t={lo:.6f} and t={hi:.6f}")
    for tau in cfg.taus:
        try:
            traj = integrate(sys_, [0.0, 0.0, 0.0], tau, cfg.n_steps, solver=SolverConfig(tol=1e-13))
            print(f"tau={tau}: completed {cfg.n_steps} steps")
        except SolverDivergenceError as exc:
            tr = exc.trajectory
            print(f"tau={tau}: stopped at step {exc.step_index} (t={tr.times[-1]:.4f}), "
                  f"|x|={np.linalg.norm(tr.states[-1]):.3g}, V drift so far {tr.max_drift():.2e}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--B", type=float, default=1.0)
    main(Config(B=p.parse_args().B))
