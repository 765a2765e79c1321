"""Exponential model for the density of failing designs and its updates.

The density of design vectors conditioned on failure is approximated by
exp(-alpha - beta . theta). Enforcing unit mass of that approximation gives a
scalar residual q; (alpha, beta) follow stochastic gradient descent on q^2/2
using designs observed to fail, and beta feeds the failure-probability
penalty gradient of the optimizer.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MAX_EXPONENT = 700.0  # exp() overflows past ~709; clamping would corrupt beta


class FailureModelOverflowError(FloatingPointError):
    pass


@dataclass(frozen=True)
class FailureDensityModel:
    alpha: float
    beta: np.ndarray
    eta_f: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if not self.eta_f > 0.0:
            raise ValueError("eta_f must be > 0")
        if not (np.isfinite(self.alpha) and np.all(np.isfinite(self.beta))):
            raise ValueError("model parameters must be finite")


def initial_model(dim: int, alpha0: float, beta0: float, eta_f: float) -> FailureDensityModel:
    return FailureDensityModel(alpha0, np.full(dim, beta0), eta_f)


def log_density(model: FailureDensityModel, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != model.beta.shape:
        raise ValueError("design dimension does not match beta")
    return float(-model.alpha - model.beta @ theta)


def _exp_terms(model: FailureDensityModel, failed_designs: np.ndarray) -> np.ndarray:
    exponents = -model.alpha - failed_designs @ model.beta
    if np.any(exponents > MAX_EXPONENT):
        raise FailureModelOverflowError(
            f"density exponent exceeded {MAX_EXPONENT:.0f}; "
            "model parameters have diverged"
        )
    return np.exp(exponents)


def residual_and_score(model: FailureDensityModel, failed_designs) -> tuple[float, np.ndarray]:
    """Normalization residual q and the score vector L over the failed set.

    q = sum_j exp(-alpha - beta . theta_j) - 1 and L stacks the negated sums
    of the exponential terms and their theta-weighted versions, so that L*q
    is the gradient of q^2/2 in (alpha, beta).
    """
    failed = np.atleast_2d(np.asarray(failed_designs, dtype=float))
    if failed.shape[0] < 1:
        raise ValueError("need at least one failed design")
    e = _exp_terms(model, failed)
    q = float(np.sum(e) - 1.0)
    score = -np.concatenate([[np.sum(e)], failed.T @ e])
    return q, score


def update(model: FailureDensityModel, failed_designs) -> FailureDensityModel:
    """One gradient-descent step of (alpha, beta) on q^2/2; no-op if empty."""
    failed = np.atleast_2d(np.asarray(failed_designs, dtype=float))
    if failed.size == 0:
        return model
    q, score = residual_and_score(model, failed)
    step = model.eta_f * score * q
    alpha = model.alpha - step[0]
    beta = model.beta - step[1:]
    if not (np.isfinite(alpha) and np.all(np.isfinite(beta))):
        raise FailureModelOverflowError("non-finite density-model update")
    return replace(model, alpha=alpha, beta=beta)


def penalty_gradient(
    model: FailureDensityModel, p_hat: float, p_a: float, kappa_f: float
) -> np.ndarray:
    """Design-space gradient of the failure-probability penalty.

    Under the exponential density model the log failure probability has
    design gradient -beta, so the penalty kappa_f/2 * [(ln p_hat - ln p_a)+]^2
    contributes -kappa_f * (ln p_hat - ln p_a)+ * beta. Zero whenever the
    constraint is satisfied, including p_hat = 0 (the log is never formed).
    """
    if not 0.0 < p_a < 1.0:
        raise ValueError("p_a must lie in (0, 1)")
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError("p_hat must lie in [0, 1]")
    if p_hat <= p_a:
        return np.zeros_like(model.beta)
    return -kappa_f * (np.log(p_hat) - np.log(p_a)) * model.beta
