"""Penalized stochastic-gradient loop with periodic failure-probability refresh.

Each iteration draws a fresh mini-batch of the uncertain input, checks the
exact limit state on it (updating the failure-density model whenever a draw
fails), then takes a projected gradient step on the penalized objective. The
failure probability entering the penalty is refreshed by a sampling estimator
every m iterations and held frozen in between; the penalty is inactive until
the first refresh, which gives the failure-density parameters a short
burn-in on early failures before they start steering the design.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import failure_density as fd
from .reliability import (
    EstimatorConfig,
    LimitState,
    ReliabilityEstimate,
    SubsetStallError,
    estimate,
)
from .sampling import RandomInput, SampleStream


class OptimizerError(RuntimeError):
    """Non-finite state or gradient; carries the iteration and partial history."""

    def __init__(self, msg: str, iteration: int, history: "RunHistory | None" = None):
        super().__init__(msg)
        self.iteration = iteration
        self.history = history


@dataclass
class OptimizationProblem:
    """Callbacks and geometry of one design problem.

    objective_sample(theta, xi) returns a sampled objective value and its
    design gradient; constraints is a tuple of callables with the same
    signature returning (q_i, grad q_i) for penalized inequality constraints
    q_i <= 0. objective_expected, when available, evaluates the exact
    expectation of the sampled objective at a design; it is recorded as a
    noise-free convergence trace and never enters the descent direction.
    """

    dim: int
    theta0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    random_input: RandomInput
    objective_sample: Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]
    limit_state: LimitState
    constraints: tuple = ()
    objective_expected: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float)
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dim,)).copy()
        if self.theta0.shape != (self.dim,):
            raise ValueError("theta0 dimension mismatch")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")


@dataclass(frozen=True)
class OptimizerConfig:
    eta: float
    n: int
    m: int
    kappa_f: float
    p_a: float
    iterations: int
    estimator: EstimatorConfig
    seed: int
    alpha0: float = 0.01
    beta0: float = 0.01
    eta_f: float = 0.2
    kappa_c: tuple = ()

    def __post_init__(self):
        if self.eta <= 0.0:
            raise ValueError("eta must be > 0")
        if self.n < 1 or self.m < 1 or self.iterations < 1:
            raise ValueError("n, m, iterations must be >= 1")
        if self.kappa_f < 0.0:
            raise ValueError("kappa_f must be >= 0")
        if not 0.0 < self.p_a < 1.0:
            raise ValueError("p_a must lie in (0, 1)")
        if any(k < 0.0 for k in self.kappa_c):
            raise ValueError("kappa_c entries must be >= 0")


@dataclass
class RunHistory:
    """Per-iteration traces and run totals.

    objective holds the mini-batch estimate; objective_expected holds the
    exact expectation when the problem can evaluate it (NaN otherwise).
    """

    objective: np.ndarray = field(default_factory=lambda: np.array([]))
    objective_expected: np.ndarray = field(default_factory=lambda: np.array([]))
    alpha: np.ndarray = field(default_factory=lambda: np.array([]))
    beta_norm: np.ndarray = field(default_factory=lambda: np.array([]))
    failure_update: np.ndarray = field(default_factory=lambda: np.array([], dtype=bool))
    p_f_iterations: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    p_f_values: np.ndarray = field(default_factory=lambda: np.array([]))
    final_theta: np.ndarray | None = None
    final_beta: np.ndarray | None = None
    n_exact_g_evals: int = 0
    n_objective_evals: int = 0

    def p_f_at(self, k: int) -> float | None:
        hit = np.nonzero(self.p_f_iterations == k)[0]
        return float(self.p_f_values[hit[0]]) if hit.size else None


def project(theta: np.ndarray, lower, upper) -> np.ndarray:
    """Clip componentwise into the design box; idempotent."""
    return np.clip(theta, lower, upper)


def stochastic_gradient(
    problem: OptimizationProblem,
    theta: np.ndarray,
    batch: np.ndarray,
    failure_penalty: np.ndarray,
    kappa_c: tuple = (),
) -> tuple[np.ndarray, float]:
    """Mini-batch gradient: objective and constraint terms are batch means.

    Returns (h, mean sampled objective). The objective and constraint terms
    are averaged over the batch, the usual mini-batch convention, so the step
    size means the same thing for every n; the failure penalty enters once.
    The constraint contribution per sample is kappa_i * max(q_i, 0) * grad q_i,
    the gradient of the quadratic hinge penalty kappa_i/2 * (q_i+)^2.
    """
    batch = np.atleast_2d(batch)
    n = batch.shape[0]
    if n < 1:
        raise ValueError("batch must be nonempty")
    h = np.zeros(problem.dim)
    total = 0.0
    for xi in batch:
        value, grad = problem.objective_sample(theta, xi)
        total += value
        h += grad
        for kap, con in zip(kappa_c, problem.constraints):
            q, gq = con(theta, xi)
            if q > 0.0:
                h += kap * q * np.asarray(gq)
    return h / n + failure_penalty, total / n


def run(problem: OptimizationProblem, cfg: OptimizerConfig) -> tuple[np.ndarray, RunHistory]:
    """Run the optimization loop; deterministic given cfg.seed."""
    root = SampleStream(cfg.seed)
    theta = project(problem.theta0, problem.lower, problem.upper)
    model = fd.initial_model(problem.dim, cfg.alpha0, cfg.beta0, cfg.eta_f)
    kappa_c = tuple(cfg.kappa_c) if cfg.kappa_c else (0.0,) * len(problem.constraints)

    iters = cfg.iterations
    hist = RunHistory(
        objective=np.empty(iters),
        objective_expected=np.full(iters, np.nan),
        alpha=np.empty(iters),
        beta_norm=np.empty(iters),
        failure_update=np.zeros(iters, dtype=bool),
    )
    p_iters: list[int] = []
    p_vals: list[float] = []
    p_hat: float | None = None
    evals0 = problem.limit_state.n_evals

    def finalize() -> RunHistory:
        hist.p_f_iterations = np.array(p_iters, dtype=int)
        hist.p_f_values = np.array(p_vals)
        hist.final_theta = theta.copy()
        hist.final_beta = model.beta.copy()
        hist.n_exact_g_evals = problem.limit_state.n_evals - evals0
        return hist

    for k in range(1, iters + 1):
        try:
            if cfg.kappa_f > 0.0 and k % cfg.m == 0:
                est = estimate(
                    problem.limit_state, theta, problem.random_input,
                    cfg.estimator, root.child("pf", k),
                )
                p_hat = est.p_hat
                p_iters.append(k)
                p_vals.append(p_hat)

            batch = problem.random_input.sample(cfg.n, root.child("batch", k))
            gs = problem.limit_state.batch(theta, batch)
            if np.any(gs <= 0.0):
                model = fd.update(model, [theta])
                hist.failure_update[k - 1] = True

            if cfg.kappa_f > 0.0 and p_hat is not None:
                penalty = fd.penalty_gradient(model, p_hat, cfg.p_a, cfg.kappa_f)
            else:
                penalty = np.zeros(problem.dim)

            h, obj = stochastic_gradient(problem, theta, batch, penalty, kappa_c)
            hist.n_objective_evals += cfg.n
            hist.objective[k - 1] = obj
            if problem.objective_expected is not None:
                hist.objective_expected[k - 1] = problem.objective_expected(theta)
            hist.alpha[k - 1] = model.alpha
            hist.beta_norm[k - 1] = float(np.linalg.norm(model.beta))

            if not np.all(np.isfinite(h)):
                bad = int(np.nonzero(~np.isfinite(h))[0][0])
                raise OptimizerError(
                    f"non-finite gradient component {bad} at iteration {k}", k
                )
            theta = project(theta - cfg.eta * h, problem.lower, problem.upper)
            if not np.all(np.isfinite(theta)):
                bad = int(np.nonzero(~np.isfinite(theta))[0][0])
                raise OptimizerError(
                    f"non-finite design component {bad} at iteration {k}", k
                )
        except OptimizerError as err:
            for arr in (hist.objective, hist.alpha, hist.beta_norm):
                arr[k - 1 :] = np.nan
            err.history = finalize()
            raise
        except (fd.FailureModelOverflowError, SubsetStallError) as err:
            for arr in (hist.objective, hist.alpha, hist.beta_norm):
                arr[k - 1 :] = np.nan
            raise OptimizerError(str(err), k, finalize()) from err

    return theta, finalize()
