"""Command-line runner: JSON run configurations, history/design/summary outputs.

Subcommands:
    run <config.json>       optimize and write history.csv, design files, summary.json
    estimate <config.json>  one failure-probability estimate at a fixed design

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem, truss
from .reliability import (
    HybridConfig,
    McConfig,
    SubsetConfig,
    SubsetStallError,
    estimate as run_estimator,
)
from .sampling import SampleStream
from .sgd import OptimizerConfig, OptimizerError, RunHistory, run as run_optimizer


class ConfigError(ValueError):
    pass


_ESTIMATOR_KEYS = {
    "mc": {"method", "n_samples"},
    "subset": {"method", "n_samples", "p0", "proposal_std", "max_levels"},
    "hybrid": {"method", "n_samples", "n_fit", "pce_order", "gamma"},
}

_PROBLEM_KEYS = {
    "truss": {"c0", "p_load", "theta0"},
    "beam": {"nx", "ny", "c_max", "tau", "p0_load", "load_coeff", "e0_mean",
             "e0_std", "theta0"},
    "lbeam": {"n_grid", "c_max", "tau", "p0_load", "load_coeff", "e0_mean",
              "e0_std", "theta0"},
}

_TOP_KEYS = {
    "problem", "mode", "seed", "iterations", "eta", "n", "m", "kappa_f",
    "kappa_c", "p_a", "alpha0", "beta0", "eta_f", "estimator", "problem_params",
    "posthoc_samples", "out_dir", "theta",
}

_DEFAULTS = {
    "truss": dict(
        iterations=10_000, eta=1e-5, n=1, m=100, kappa_f=2500.0, p_a=1e-3,
        alpha0=0.01, beta0=0.01, eta_f=0.2, posthoc_samples=10**6,
        estimator=dict(method="hybrid", gamma=2.5, n_samples=10**6,
                       n_fit=100, pce_order=4),
    ),
    "beam": dict(
        iterations=5_000, eta=0.02, n=8, m=25, kappa_f=1e5, p_a=1e-3,
        alpha0=1e-5, beta0=1e-5, eta_f=1e-5, posthoc_samples=10**4,
        estimator=dict(method="hybrid", gamma=25.0, n_samples=5 * 10**4,
                       n_fit=100, pce_order=4),
    ),
    "lbeam": dict(
        iterations=5_000, eta=0.035, n=4, m=25, kappa_f=1e5, p_a=1e-3,
        alpha0=1e-5, beta0=1e-5, eta_f=1e-5, posthoc_samples=10**4,
        estimator=dict(method="hybrid", gamma=25.0, n_samples=5 * 10**4,
                       n_fit=100, pce_order=4),
    ),
}


@dataclass
class RunConfig:
    problem: str
    mode: str
    seed: int
    iterations: int
    eta: float
    n: int
    m: int
    kappa_f: float
    p_a: float
    alpha0: float
    beta0: float
    eta_f: float
    estimator: dict
    posthoc_samples: int
    kappa_c: tuple = ()
    problem_params: dict = field(default_factory=dict)
    out_dir: str | None = None
    theta: object = None  # estimate subcommand: fixed design

    @property
    def effective_kappa_f(self) -> float:
        return 0.0 if self.mode == "robust" else self.kappa_f


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def parse_config(raw: dict) -> RunConfig:
    _require(isinstance(raw, dict), "config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    _require("problem" in raw, "missing required field 'problem'")
    problem = raw["problem"]
    _require(problem in _DEFAULTS, f"problem must be one of {sorted(_DEFAULTS)}, got {problem!r}")
    _require("seed" in raw, "missing required field 'seed'")
    _require(isinstance(raw["seed"], int) and raw["seed"] >= 0,
             "seed must be a non-negative integer")

    merged = dict(_DEFAULTS[problem])
    for key, val in raw.items():
        if key in ("problem", "problem_params", "estimator", "theta"):
            continue
        merged[key] = val
    est = dict(_DEFAULTS[problem]["estimator"])
    if "estimator" in raw:
        _require(isinstance(raw["estimator"], dict), "estimator must be an object")
        user_est = dict(raw["estimator"])
        method = user_est.get("method", est["method"])
        _require(method in _ESTIMATOR_KEYS,
                 f"estimator.method must be one of {sorted(_ESTIMATOR_KEYS)}, got {method!r}")
        if method != est["method"]:
            est = {"method": method}
        _reject_unknown(user_est, _ESTIMATOR_KEYS[method], f"estimator ({method})")
        est.update(user_est)
        est["method"] = method
    params = raw.get("problem_params", {})
    _require(isinstance(params, dict), "problem_params must be an object")
    _reject_unknown(params, _PROBLEM_KEYS[problem], f"problem_params ({problem})")

    mode = merged.get("mode", "rbto")
    _require(mode in ("rbto", "robust"), f"mode must be 'rbto' or 'robust', got {mode!r}")

    cfg = RunConfig(
        problem=problem,
        mode=mode,
        seed=merged["seed"],
        iterations=int(merged["iterations"]),
        eta=float(merged["eta"]),
        n=int(merged["n"]),
        m=int(merged["m"]),
        kappa_f=float(merged["kappa_f"]),
        p_a=float(merged["p_a"]),
        alpha0=float(merged["alpha0"]),
        beta0=float(merged["beta0"]),
        eta_f=float(merged["eta_f"]),
        estimator=est,
        posthoc_samples=int(merged["posthoc_samples"]),
        kappa_c=tuple(merged.get("kappa_c", ())),
        problem_params=dict(params),
        out_dir=merged.get("out_dir"),
        theta=raw.get("theta"),
    )
    for name, positive in (("iterations", cfg.iterations), ("n", cfg.n), ("m", cfg.m),
                           ("posthoc_samples", cfg.posthoc_samples)):
        _require(positive >= 1, f"{name} must be >= 1")
    _require(cfg.eta > 0, "eta must be > 0")
    _require(cfg.kappa_f >= 0, "kappa_f must be >= 0")
    _require(0 < cfg.p_a < 1, "p_a must lie in (0, 1)")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON at {path}:{err.lineno}:{err.colno}: {err.msg}")
    return parse_config(raw)


def estimator_config(est: dict):
    method = est["method"]
    if method == "mc":
        return McConfig(n_samples=int(est["n_samples"]))
    if method == "subset":
        return SubsetConfig(
            n_samples=int(est.get("n_samples", 500)),
            p0=float(est.get("p0", 0.1)),
            proposal_std=float(est.get("proposal_std", 1.0)),
            max_levels=int(est.get("max_levels", 20)),
        )
    return HybridConfig(
        gamma=float(est["gamma"]),
        n_samples=int(est["n_samples"]),
        n_fit=int(est.get("n_fit", 100)),
        pce_order=int(est.get("pce_order", 4)),
    )


def build_problem(cfg: RunConfig):
    """Returns (OptimizationProblem, context) for the configured example."""
    params = cfg.problem_params
    if cfg.problem == "truss":
        spec = truss.TrussProblem(
            c0=float(params.get("c0", 100.0)),
            p_load=float(params.get("p_load", 1.0)),
        )
        theta0 = params.get("theta0", (0.1, np.pi / 4))
        return truss.make_problem(spec, theta0=theta0), spec
    common = {k: params[k] for k in
              ("c_max", "tau", "p0_load", "load_coeff", "e0_mean", "e0_std", "theta0")
              if k in params}
    if cfg.problem == "beam":
        beam_cfg = fem.BeamConfig(
            variant="rect",
            nx=int(params.get("nx", 120)),
            ny=int(params.get("ny", 40)),
            **common,
        )
    else:
        beam_cfg = fem.lbeam_config(n_grid=int(params.get("n_grid", 72)), **common)
    beam = fem.BeamProblem(beam_cfg)
    return beam.make_problem(), beam


def _atomic_write(path: Path, writer) -> None:
    """Write via temp file + rename so interrupted runs never leave partial files."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_history_csv(path: Path, hist: RunHistory) -> None:
    def writer(fh):
        out = csv.writer(fh)
        out.writerow(["iteration", "objective", "p_f", "alpha", "beta_norm",
                      "failure_update"])
        p_map = dict(zip(hist.p_f_iterations.tolist(), hist.p_f_values.tolist()))
        for k in range(1, len(hist.objective) + 1):
            p_cell = f"{p_map[k]:.10e}" if k in p_map else ""
            out.writerow([
                k,
                f"{hist.objective[k - 1]:.10e}",
                p_cell,
                f"{hist.alpha[k - 1]:.10e}",
                f"{hist.beta_norm[k - 1]:.10e}",
                int(hist.failure_update[k - 1]),
            ])

    _atomic_write(path, writer)


def _summary_design(cfg: RunConfig, context, theta: np.ndarray, out_dir: Path) -> dict:
    if cfg.problem == "truss":
        lam, delta = float(theta[0]), float(theta[1])
        value, _ = truss.objective(lam, delta)
        _atomic_write(out_dir / "design.csv",
                      lambda fh: fh.write(f"lambda,delta\n{lam:.12e},{delta:.12e}\n"))
        return {
            "theta": [lam, delta],
            "delta_degrees": float(np.rad2deg(delta)),
            "objective": value,
        }
    rho = fem.filter_forward(context.weights, theta)
    grid = context.density_grid(rho)
    fem.write_density_csv(out_dir / "design.csv", grid)
    fem.write_density_pgm(out_dir / "design.pgm", grid)
    c1, _ = context.unit_solution(theta)
    return {
        "volume_fraction": float(np.mean(rho)),
        "unit_compliance": float(c1),
        "n_elements": int(context.mesh.n_elems),
        "files": ["design.csv", "design.pgm"],
    }


def cmd_run(cfg: RunConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    problem, context = build_problem(cfg)
    opt_cfg = OptimizerConfig(
        eta=cfg.eta, n=cfg.n, m=cfg.m, kappa_f=cfg.effective_kappa_f,
        p_a=cfg.p_a, iterations=cfg.iterations,
        estimator=estimator_config(cfg.estimator), seed=cfg.seed,
        alpha0=cfg.alpha0, beta0=cfg.beta0, eta_f=cfg.eta_f,
        kappa_c=cfg.kappa_c,
    )
    start = time.perf_counter()
    try:
        theta, hist = run_optimizer(problem, opt_cfg)
    except OptimizerError as err:
        if err.history is not None:
            write_history_csv(out_dir / "history.csv", err.history)
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - start

    # post-run check with a fresh high-accuracy Monte Carlo call
    posthoc = run_estimator(
        problem.limit_state, theta, problem.random_input,
        McConfig(n_samples=cfg.posthoc_samples), SampleStream(cfg.seed, ("posthoc",)),
    )

    write_history_csv(out_dir / "history.csv", hist)
    summary = {
        "problem": cfg.problem,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "design": _summary_design(cfg, context, theta, out_dir),
        "final_p_f": posthoc.p_hat,
        "posthoc_samples": cfg.posthoc_samples,
        "n_exact_g_evals": hist.n_exact_g_evals,
        "n_objective_evals": hist.n_objective_evals,
        "wall_time_s": wall,
        "config": _echo_config(cfg),
    }
    _atomic_write(out_dir / "summary.json",
                  lambda fh: fh.write(json.dumps(summary, indent=2) + "\n"))
    print(f"run complete: final P_F = {posthoc.p_hat:.4e} "
          f"({hist.n_exact_g_evals} exact g evaluations)")
    return 0


def _echo_config(cfg: RunConfig) -> dict:
    echo = {
        "problem": cfg.problem, "mode": cfg.mode, "seed": cfg.seed,
        "iterations": cfg.iterations, "eta": cfg.eta, "n": cfg.n, "m": cfg.m,
        "kappa_f": cfg.kappa_f, "kappa_c": list(cfg.kappa_c), "p_a": cfg.p_a,
        "alpha0": cfg.alpha0, "beta0": cfg.beta0, "eta_f": cfg.eta_f,
        "estimator": cfg.estimator, "posthoc_samples": cfg.posthoc_samples,
        "problem_params": cfg.problem_params,
    }
    if cfg.out_dir is not None:
        echo["out_dir"] = cfg.out_dir
    if cfg.theta is not None:
        echo["theta"] = cfg.theta
    return echo


def _resolve_theta(cfg: RunConfig, problem, context) -> np.ndarray:
    spec = cfg.theta
    if spec is None:
        return problem.theta0
    if isinstance(spec, list):
        arr = np.asarray(spec, dtype=float)
        if arr.shape != (problem.dim,):
            raise ConfigError(f"theta must have {problem.dim} entries")
        return arr
    if isinstance(spec, dict) and "uniform" in spec:
        return np.full(problem.dim, float(spec["uniform"]))
    if isinstance(spec, dict) and "csv" in spec:
        grid = np.loadtxt(spec["csv"], delimiter=",")
        if cfg.problem == "truss":
            return grid.ravel()[: problem.dim]
        nx, ny = context.mesh.grid_shape
        ex, ey = context.mesh.elem_grid[:, 0], context.mesh.elem_grid[:, 1]
        return grid[ny - 1 - ey, ex]
    raise ConfigError("theta must be a list, {'uniform': v}, or {'csv': path}")


def cmd_estimate(cfg: RunConfig) -> int:
    problem, context = build_problem(cfg)
    theta = _resolve_theta(cfg, problem, context)
    est_cfg = estimator_config(cfg.estimator)
    try:
        result = run_estimator(
            problem.limit_state, theta, problem.random_input, est_cfg,
            SampleStream(cfg.seed, ("estimate",)),
        )
    except SubsetStallError as err:
        print(f"estimator stalled: {err}", file=sys.stderr)
        print(f"partial p_hat = {err.estimate.p_hat:.6e}", file=sys.stderr)
        return 3
    print(f"method           : {result.method}")
    print(f"p_hat            : {result.p_hat:.6e}")
    print(f"exact evals      : {result.n_exact_evals}")
    print(f"surrogate evals  : {result.n_surrogate_evals}")
    if result.method == "subset":
        ladder = " > ".join(f"{b:.6g}" for b in result.thresholds)
        print(f"levels           : {result.levels}")
        print(f"threshold ladder : {ladder}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rbto",
        description="Reliability-based topology optimization runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "estimate"):
        cmd = sub.add_parser(name)
        cmd.add_argument("config", help="path to JSON run configuration")
        cmd.add_argument("--out", help="output directory (default: config's out_dir or '.')")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        cmd.add_argument("--iterations", type=int, help="override iteration count")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker-count cap (runs are single-threaded)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.iterations is not None:
            cfg.iterations = args.iterations
        if args.command == "run":
            out_dir = Path(args.out or cfg.out_dir or ".")
            return cmd_run(cfg, out_dir)
        return cmd_estimate(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (OptimizerError, fem.SolverError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
