#!/usr/bin/env python3
"""Compare the three failure-probability estimators at a fixed truss design
against the closed-form value, including evaluation budgets.

Usage: python scripts/estimator_comparison.py [--lam 0.3425] [--delta-deg 43.25]
"""
import argparse

import numpy as np

from rbto import truss
from rbto.reliability import (
    HybridConfig,
    LimitState,
    McConfig,
    SubsetConfig,
    estimate,
)
from rbto.sampling import Normal, RandomInput, SampleStream


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--lam", type=float, default=0.3425)
    parser.add_argument("--delta-deg", type=float, default=43.25)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    prob = truss.TrussProblem()
    delta = np.deg2rad(args.delta_deg)
    exact = truss.failure_probability(prob, args.lam, delta)
    input_1d = RandomInput((Normal(0.0, 1.0),))

    configs = [
        ("monte-carlo", McConfig(n_samples=10**6)),
        ("subset", SubsetConfig(n_samples=500, p0=0.1)),
        ("hybrid", HybridConfig(gamma=2.5, n_samples=10**6, n_fit=100, pce_order=4)),
    ]
    print(f"design (lam, delta) = ({args.lam}, {args.delta_deg} deg), "
          f"closed-form P_F = {exact:.4e}")
    print(f"{'method':<12} {'p_hat':>12} {'rel err':>9} {'exact evals':>12} "
          f"{'surrogate evals':>16}")
    for name, cfg in configs:
        g = LimitState(
            fn=lambda t, xi: truss.limit_state(prob, args.lam, delta, xi[0]),
            batch_fn=lambda t, xis: truss.limit_state(prob, args.lam, delta, xis[:, 0]),
        )
        est = estimate(g, None, input_1d, cfg, SampleStream(args.seed, (name,)))
        rel = abs(est.p_hat - exact) / exact
        print(f"{name:<12} {est.p_hat:12.4e} {rel:8.1%} {est.n_exact_evals:12d} "
              f"{est.n_surrogate_evals:16d}")


if __name__ == "__main__":
    main()
