"""Online tracking of drifting time-series parameters.

A stochastic-approximation toolkit: a recursive tracking engine with a
catalog of gain functions, step-size schedules for three drift regimes,
closed-form non-asymptotic error bounds with empirical condition
verifiers, the scalar Kalman reduction, and a Monte-Carlo experiment
harness with a CLI.
"""

from . import bounds, core, experiments, gains, kalman, linalg, models, schedules

__all__ = [
    "bounds",
    "core",
    "experiments",
    "gains",
    "kalman",
    "linalg",
    "models",
    "schedules",
]

__version__ = "0.1.0"
