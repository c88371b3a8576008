"""The recursive tracking engine.

Plain and projected one-step updates plus the trajectory driver that
wires a simulator, a gain, and a step schedule together.  The estimate
recursion is theta_hat_{k+1} = theta_hat_k + gamma_k * G_k; the value
stored at slot k+1 is compared against the target at the same slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .gains import GainSpec
from .models import SimulatedPath, make_rng
from .schedules import StepSchedule

__all__ = [
    "Box",
    "Ball",
    "ProjectionRegion",
    "TrackingConfig",
    "TrackingRun",
    "TrackingDiverged",
    "GUARD_FACTOR",
    "step_update",
    "projected_step_update",
    "run_tracking",
    "replay_updates",
]

GUARD_FACTOR = 1e6  # divergence guard: abort when ||est|| > 1e6 (1 + ||est_0||)


class TrackingDiverged(RuntimeError):
    """The estimate left the guard region or the gain went non-finite."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; nearest point is the componentwise clamp."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if np.any(lower > upper):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def contains(self, point, tol: float = 1e-12) -> bool:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return bool(np.all(point >= self.lower - tol)
                    and np.all(point <= self.upper + tol))

    def project(self, point) -> np.ndarray:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return np.clip(point, self.lower, self.upper)


@dataclass(frozen=True)
class Ball:
    """Euclidean ball; nearest point is radial rescaling."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", center)

    def contains(self, point, tol: float = 1e-12) -> bool:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return float(np.linalg.norm(point - self.center)) <= self.radius + tol

    def project(self, point) -> np.ndarray:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        offset = point - self.center
        norm = float(np.linalg.norm(offset))
        if norm <= self.radius:
            return point
        return self.center + offset * (self.radius / norm)


ProjectionRegion = Union[Box, Ball]


@dataclass(frozen=True)
class TrackingConfig:
    dimension: int
    horizon: int
    initial_estimate: np.ndarray
    schedule: StepSchedule
    projection: Optional[ProjectionRegion] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        init = np.atleast_1d(np.asarray(self.initial_estimate, dtype=float))
        if init.size != self.dimension:
            raise ValueError("initial estimate dimension mismatch")
        if not np.all(np.isfinite(init)):
            raise ValueError("initial estimate must be finite")
        if self.projection is not None and not self.projection.contains(init):
            raise ValueError("initial estimate must lie inside the projection region")
        object.__setattr__(self, "initial_estimate", init)


@dataclass(frozen=True)
class TrackingRun:
    """One trajectory: estimates/targets/errors (n+1 slots), the consumed
    observation rows, the realized steps (n slots), and the seed."""

    estimates: np.ndarray
    targets: np.ndarray
    errors: np.ndarray
    observations: np.ndarray
    steps: np.ndarray
    seed: int

    @property
    def final_error(self) -> np.ndarray:
        return self.errors[-1]


def step_update(theta_hat, gamma: float, g) -> np.ndarray:
    """theta_hat + gamma * G with input validation, no mutation."""
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if not (np.all(np.isfinite(theta_hat)) and np.all(np.isfinite(g))
            and math.isfinite(gamma)):
        raise ValueError("non-finite input to step update")
    if gamma < 0:
        raise ValueError("step size must be nonnegative")
    return theta_hat + gamma * g


def projected_step_update(theta_hat, gamma: float, g,
                          region: ProjectionRegion) -> np.ndarray:
    """Step then project back onto the region; theta_hat must start inside."""
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    if not region.contains(theta_hat):
        raise ValueError("current estimate lies outside the projection region")
    return region.project(step_update(theta_hat, gamma, g))


def run_tracking(config: TrackingConfig, model, gain: GainSpec,
                 rng_seed: int) -> TrackingRun:
    """Execute the online loop for one seed.

    The simulator draws the whole observation sequence (targets are
    predictable from the past only, never from the estimates), then the
    recursion consumes one row per step.  Deterministic given the seed.
    """
    if getattr(model, "dim", config.dimension) != config.dimension:
        raise ValueError("model dimension does not match config")
    if gain.dim != config.dimension:
        raise ValueError("gain dimension does not match config")
    n = config.horizon
    rng = make_rng(rng_seed)
    sim: SimulatedPath = model.simulate(n, rng)
    gammas = config.schedule.values_upto(n)
    estimates = np.empty((n + 1, config.dimension))
    estimates[0] = config.initial_estimate
    evaluator = gain.evaluator
    projection = config.projection
    if projection is None and config.dimension == 1:
        _run_scalar(sim.observations, gammas, estimates, evaluator)
    else:
        _run_general(sim.observations, gammas, estimates, evaluator, projection)
    errors = estimates - sim.targets
    return TrackingRun(estimates=estimates, targets=sim.targets,
                       errors=errors, observations=sim.observations,
                       steps=gammas, seed=rng_seed)


def _run_general(obs: np.ndarray, gammas: np.ndarray, estimates: np.ndarray,
                 evaluator, projection) -> None:
    est = estimates[0].copy()
    guard_sq = (GUARD_FACTOR * (1.0 + float(np.linalg.norm(est)))) ** 2
    for k in range(obs.shape[0]):
        g = evaluator(est, obs[k])
        est = est + gammas[k] * np.asarray(g, dtype=float)
        if projection is not None:
            est = projection.project(est)
        sq = float(est @ est)
        if not sq <= guard_sq:  # catches NaN as well as blow-up
            raise TrackingDiverged(k, "estimate left the guard region "
                                      "or gain went non-finite")
        estimates[k + 1] = est


def _run_scalar(obs: np.ndarray, gammas: np.ndarray, estimates: np.ndarray,
                evaluator) -> None:
    # hot path for d = 1: plain float arithmetic, same IEEE results
    est = float(estimates[0, 0])
    guard = GUARD_FACTOR * (1.0 + abs(est))
    gam = gammas.tolist()
    out = estimates[:, 0]
    scalar_rows = obs.shape[1] == 1
    rows = obs[:, 0].tolist() if scalar_rows else obs
    for k in range(obs.shape[0]):
        g = evaluator(est, rows[k])
        if type(g) is not float:
            g = float(np.asarray(g).reshape(-1)[0])
        est = est + gam[k] * g
        if not abs(est) <= guard:
            raise TrackingDiverged(k, "estimate left the guard region "
                                      "or gain went non-finite")
        out[k + 1] = est


def replay_updates(initial_estimate, observations, gammas, gain: GainSpec,
                   projection: Optional[ProjectionRegion] = None) -> np.ndarray:
    """Re-run the pure recursion on stored observations (no randomness).

    Used to certify that estimates depend on nothing beyond the stored
    inputs: the replay must reproduce a run's estimate path exactly.
    """
    observations = np.asarray(observations, dtype=float)
    n = observations.shape[0]
    est = np.atleast_1d(np.asarray(initial_estimate, dtype=float)).copy()
    estimates = np.empty((n + 1, est.size))
    estimates[0] = est
    if projection is None and est.size == 1:
        _run_scalar(observations, np.asarray(gammas, dtype=float),
                    estimates, gain.evaluator)
    else:
        _run_general(observations, np.asarray(gammas, dtype=float),
                     estimates, gain.evaluator, projection)
    return estimates
