"""Failure-probability estimators over a user-supplied limit state.

Failure is g(theta; xi) <= 0 throughout. Three estimators are provided:
plain Monte Carlo, multi-level subset sampling with a component-wise
Metropolis kernel in u-space, and a hybrid scheme that screens Monte Carlo
samples through a polynomial chaos surrogate and re-evaluates only those in
the band |ghat| <= gamma with the exact model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pce
from .sampling import RandomInput, SampleStream


class LimitState:
    """Wraps an exact limit-state evaluator and counts its evaluations.

    The counter increments once per exact-model call. An optional vectorized
    evaluator over a batch of realizations avoids per-sample Python overhead;
    it must agree with the scalar evaluator point for point.
    """

    def __init__(self, fn, batch_fn=None):
        self.fn = fn
        self.batch_fn = batch_fn
        self.n_evals = 0

    def __call__(self, theta, xi) -> float:
        self.n_evals += 1
        g = float(self.fn(theta, xi))
        return g

    def batch(self, theta, xis: np.ndarray) -> np.ndarray:
        xis = np.atleast_2d(np.asarray(xis, dtype=float))
        self.n_evals += xis.shape[0]
        if self.batch_fn is not None:
            return np.asarray(self.batch_fn(theta, xis), dtype=float)
        return np.array([float(self.fn(theta, xi)) for xi in xis])


@dataclass(frozen=True)
class ReliabilityEstimate:
    p_hat: float
    method: str  # "mc" | "subset" | "hybrid"
    levels: int = 0
    n_exact_evals: int = 0
    n_surrogate_evals: int = 0
    thresholds: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError(f"p_hat must lie in [0, 1], got {self.p_hat}")


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 10**6

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class SubsetConfig:
    n_samples: int = 500
    p0: float = 0.1
    proposal_std: float = 1.0
    max_levels: int = 20

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie in (0, 1)")
        if math.ceil(self.n_samples * self.p0) < 2:
            raise ValueError("need ceil(N*p0) >= 2 chain seeds")
        if math.floor(1.0 / self.p0) < 2:
            raise ValueError("need floor(1/p0) >= 2 chain length")
        if self.proposal_std <= 0.0:
            raise ValueError("proposal_std must be > 0")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")


@dataclass(frozen=True)
class HybridConfig:
    gamma: float = 2.5
    n_samples: int = 10**6
    n_fit: int = 100
    pce_order: int = 4

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")
        if self.n_samples < 1 or self.n_fit < 1:
            raise ValueError("sample counts must be >= 1")
        if self.pce_order < 0:
            raise ValueError("pce_order must be >= 0")


class SubsetStallError(RuntimeError):
    """Raised when the level thresholds stall above zero.

    Carries the partial estimate; a stall usually means g is bounded away
    from zero (the failure event is empty or misposed).
    """

    def __init__(self, msg: str, estimate: ReliabilityEstimate):
        super().__init__(msg)
        self.estimate = estimate


def mc_estimate(
    g: LimitState,
    theta,
    input: RandomInput,
    n_samples: int,
    stream: SampleStream,
) -> ReliabilityEstimate:
    """Plain Monte Carlo: fraction of i.i.d. samples with g <= 0."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    xis = input.sample(n_samples, stream.child("mc"))
    gs = g.batch(theta, xis)
    return ReliabilityEstimate(
        p_hat=float(np.mean(gs <= 0.0)),
        method="mc",
        n_exact_evals=n_samples,
    )


def _metropolis_step(u, gs, b_j, g, theta, input, proposal_std, rng):
    """One lockstep move of all chains: component-wise accept, then g-gate.

    Every assembled candidate is evaluated with the exact model, matching the
    per-step cost accounting of the sampler (one evaluation per chain step).
    """
    n, d = u.shape
    z = rng.standard_normal((n, d))
    unif = rng.random((n, d))
    cand = u + proposal_std * z
    # accept each component with prob min(1, phi(cand)/phi(u))
    log_ratio = 0.5 * (u**2 - cand**2)
    comp_accept = np.log(unif) < log_ratio
    trial = np.where(comp_accept, cand, u)
    g_trial = g.batch(theta, input.from_u(trial))
    keep = g_trial <= b_j
    u_next = np.where(keep[:, None], trial, u)
    gs_next = np.where(keep, g_trial, gs)
    return u_next, gs_next


def subset_estimate(
    g: LimitState,
    theta,
    input: RandomInput,
    cfg: SubsetConfig,
    stream: SampleStream,
    level_log: list | None = None,
) -> ReliabilityEstimate:
    """Multi-level splitting estimate of P(g <= 0).

    Level thresholds are the ceil(N*p0)-th smallest g among the level
    population, so each conditional level has probability ~p0; those samples
    seed Markov chains of length floor(1/p0) (seed included) targeting the
    conditional law, and the final estimate is (n_fail/N) * p0^k.
    """
    n0 = cfg.n_samples
    n_seed = math.ceil(n0 * cfg.p0)
    chain_len = math.floor(1.0 / cfg.p0)
    nd0 = g.n_evals

    u = input.sample_u(n0, stream.child("mc"))
    gs = g.batch(theta, input.from_u(u))

    order = np.argsort(gs, kind="stable")
    u, gs = u[order], gs[order]
    b_j = float(gs[n_seed - 1])
    thresholds = [b_j]
    levels = 0
    if level_log is not None:
        level_log.append((b_j, u.copy(), gs.copy()))

    if b_j <= 0.0:
        # first threshold already nonpositive: plain MC on the same samples
        return ReliabilityEstimate(
            p_hat=float(np.mean(gs <= 0.0)),
            method="subset",
            levels=0,
            n_exact_evals=g.n_evals - nd0,
            thresholds=tuple(thresholds),
        )

    while b_j > 0.0:
        if levels >= cfg.max_levels:
            n_fail = int(np.sum(gs <= 0.0))
            partial = ReliabilityEstimate(
                p_hat=(n_fail / len(gs)) * cfg.p0**levels,
                method="subset",
                levels=levels,
                n_exact_evals=g.n_evals - nd0,
                thresholds=tuple(thresholds),
            )
            raise SubsetStallError(
                f"threshold stalled at b={b_j:.6g} after {levels} levels "
                f"(limit state may be bounded away from 0)",
                partial,
            )
        # chains in lockstep: state (n_seed, d); population = all visited states
        rng = stream.child("mm", levels).rng()
        cur_u, cur_g = u[:n_seed].copy(), gs[:n_seed].copy()
        pop_u, pop_g = [cur_u.copy()], [cur_g.copy()]
        for _ in range(chain_len - 1):
            cur_u, cur_g = _metropolis_step(
                cur_u, cur_g, b_j, g, theta, input, cfg.proposal_std, rng
            )
            pop_u.append(cur_u.copy())
            pop_g.append(cur_g.copy())
        u = np.concatenate(pop_u)
        gs = np.concatenate(pop_g)

        order = np.argsort(gs, kind="stable")
        u, gs = u[order], gs[order]
        levels += 1
        b_j = float(gs[n_seed - 1])
        thresholds.append(b_j)
        if level_log is not None:
            level_log.append((b_j, u.copy(), gs.copy()))

    n_fail = int(np.sum(gs <= 0.0))
    return ReliabilityEstimate(
        p_hat=(n_fail / len(gs)) * cfg.p0**levels,
        method="subset",
        levels=levels,
        n_exact_evals=g.n_evals - nd0,
        thresholds=tuple(thresholds),
    )


def hybrid_estimate(
    g: LimitState,
    theta,
    input: RandomInput,
    cfg: HybridConfig,
    stream: SampleStream,
) -> ReliabilityEstimate:
    """Surrogate-screened Monte Carlo estimate of P(g <= 0).

    A polynomial chaos surrogate ghat is fitted from n_fit exact evaluations;
    the large Monte Carlo batch is classified by ghat except inside the band
    |ghat| <= gamma, where the exact model decides.
    """
    nd0 = g.n_evals
    indices = pce.multi_indices(input.dim, cfg.pce_order)
    if cfg.n_fit < len(indices):
        raise ValueError(
            f"n_fit={cfg.n_fit} is below the {len(indices)}-term basis size"
        )
    u_fit = input.sample_u(cfg.n_fit, stream.child("fit"))
    g_fit = g.batch(theta, input.from_u(u_fit))
    model = pce.fit_least_squares(u_fit, g_fit, indices, input)

    u_mc = input.sample_u(cfg.n_samples, stream.child("mc"))
    ghat = model.evaluate_u(u_mc)

    fail = ghat < -cfg.gamma
    band = np.abs(ghat) <= cfg.gamma
    if np.any(band):
        g_band = g.batch(theta, input.from_u(u_mc[band]))
        fail[band] = g_band <= 0.0

    return ReliabilityEstimate(
        p_hat=float(np.mean(fail)),
        method="hybrid",
        n_exact_evals=g.n_evals - nd0,
        n_surrogate_evals=cfg.n_samples,
    )


EstimatorConfig = McConfig | SubsetConfig | HybridConfig


def estimate(
    g: LimitState,
    theta,
    input: RandomInput,
    cfg: EstimatorConfig,
    stream: SampleStream,
) -> ReliabilityEstimate:
    """Dispatch on the estimator configuration type."""
    if isinstance(cfg, McConfig):
        return mc_estimate(g, theta, input, cfg.n_samples, stream)
    if isinstance(cfg, SubsetConfig):
        return subset_estimate(g, theta, input, cfg, stream)
    if isinstance(cfg, HybridConfig):
        return hybrid_estimate(g, theta, input, cfg, stream)
    raise TypeError(f"unknown estimator config {type(cfg).__name__}")
