"""Empirical order of every scheme/policy pair on a few catalog systems."""

import argparse
from dataclasses import dataclass, field

from dgint.discgrad import CoordinateIncrement, MeanValue, Midpoint
from dgint.stepper import LTildePolicy, empirical_order
from dgint.systems import builtin


@dataclass
class Config:
    t_end: float = 1.0
    taus: tuple = (0.2, 0.1, 0.05, 0.025, 0.0125)
    cases: dict = field(default_factory=lambda: {
        "pendulum": [1.0, 0.0],
        "rigid-body": [1.0, 0.5, 0.2],
        "damped-particle": [2.0, 0.0],
        "wind-oscillation": [0.3, 0.2],
    })


def main(cfg: Config):
    schemes = [Midpoint(), CoordinateIncrement(), MeanValue(2)]
    print(f"{'system':<18}{'scheme':<10}{'policy':<10}{'slope':>8}")
    for name, x0 in cfg.cases.items():
        sys_ = builtin(name)
        for scheme in schemes:
            for policy in LTildePolicy:
                slope = empirical_order(sys_, scheme, policy, x0, cfg.t_end, cfg.taus)
                print(f"{name:<18}{str(scheme):<10}{policy.value:<10}{slope:>8.3f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--t-end", type=float, default=1.0)
    main(Config(t_end=p.parse_args().t_end))
