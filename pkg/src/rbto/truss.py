"""Two-bar truss benchmark: volume objective with a compliance limit state.

Both bars share the cross-section fraction lam in [0, 1] and inclination
delta from the vertical; the horizontal load component is the standard-normal
uncertain input. The limit state compares compliance against a maximum whose
scaled coefficient is c0 = 2*C_max*E*A_max/(P^2 H) = 100 for the default
configuration. Failure probability admits a closed form (g is even and
decreasing in |xi|), used here only as a test and reporting oracle, never
inside the optimization pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .reliability import LimitState
from .sampling import Normal, RandomInput
from .sgd import OptimizationProblem

DELTA_MARGIN = 1e-3  # keep delta clear of the 0 and pi/2 trigonometric poles


@dataclass(frozen=True)
class TrussProblem:
    c0: float = 100.0
    p_load: float = 1.0
    lambda_bounds: tuple[float, float] = (0.0, 1.0)
    delta_bounds: tuple[float, float] = (DELTA_MARGIN, np.pi / 2 - DELTA_MARGIN)

    def __post_init__(self):
        if self.c0 <= 0.0:
            raise ValueError("c0 must be > 0")


def objective(lam: float, delta: float) -> tuple[float, np.ndarray]:
    """Material volume measure lam/cos(delta) and its exact gradient."""
    c = np.cos(delta)
    value = lam / c
    grad = np.array([1.0 / c, lam * np.sin(delta) / c**2])
    return float(value), grad


def limit_state(problem: TrussProblem, lam: float, delta: float, xi) -> float | np.ndarray:
    """Compliance margin; failure iff <= 0. Vectorized over xi.

    lam = 0 means a vanished cross-section: always failing (returns -inf).
    """
    xi = np.asarray(xi, dtype=float)
    if lam <= 0.0:
        return -np.inf if xi.ndim == 0 else np.full(xi.shape, -np.inf)
    c, s = np.cos(delta), np.sin(delta)
    out = problem.c0 - (1.0 / (lam * c)) * (1.0 / c**2 + xi**2 / (problem.p_load**2 * s**2))
    return float(out) if xi.ndim == 0 else out


def failure_probability(problem: TrussProblem, lam: float, delta: float) -> float:
    """Closed-form P(g <= 0) for the standard-normal load component.

    g <= 0 iff xi^2 >= P^2 sin^2(delta) (c0 lam cos(delta) - 1/cos^2(delta)),
    so P_F = 2 Phi(-xi*) with xi* the positive root, or 1 when no root exists.
    """
    if lam <= 0.0:
        return 1.0
    c, s = np.cos(delta), np.sin(delta)
    rhs = problem.p_load**2 * s**2 * (problem.c0 * lam * c - 1.0 / c**2)
    if rhs <= 0.0:
        return 1.0
    return float(2.0 * stats.norm.cdf(-np.sqrt(rhs)))


def make_problem(
    problem: TrussProblem | None = None,
    theta0=(0.1, np.pi / 4),
) -> OptimizationProblem:
    """Wire the truss into the optimizer interface (1-D standard-normal input)."""
    prob = problem or TrussProblem()

    def objective_sample(theta, xi):
        return objective(theta[0], theta[1])

    g = LimitState(
        fn=lambda theta, xi: limit_state(prob, theta[0], theta[1], xi[0]),
        batch_fn=lambda theta, xis: np.atleast_1d(
            limit_state(prob, theta[0], theta[1], np.asarray(xis)[:, 0])
        ),
    )
    return OptimizationProblem(
        dim=2,
        theta0=np.asarray(theta0, dtype=float),
        lower=np.array([prob.lambda_bounds[0], prob.delta_bounds[0]]),
        upper=np.array([prob.lambda_bounds[1], prob.delta_bounds[1]]),
        random_input=RandomInput((Normal(0.0, 1.0),)),
        objective_sample=objective_sample,
        limit_state=g,
        objective_expected=lambda theta: objective(theta[0], theta[1])[0],
    )
