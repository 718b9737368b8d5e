"""Configuration-driven command line frontend.

One INI config per experiment (sections [model] or [bucket.*], [risk],
[grid], [sim], [solver]); subcommands pick the solver, flags override seed,
trial count and output path for sweeps.  Every run writes an RFC-4180-style
CSV (header row, '.' decimals, no locale dependence) plus a JSON sidecar
with the fully resolved config, seed and package version; the sidecar can
be fed back as the config to reproduce the run byte for byte.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical
failure (instability or no convergence).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .finite import LgdSpec, LossSamples, run_finite_experiment
from .fixed_point import FixedPointNoConvergence, solve_fixed_point
from .moments import simulate_limiting_loss
from .deterministic import analytic_no_feedback_loss, solve_pde_predictor_corrector
from .params import (
    NameParams,
    PoolEntry,
    PoolSpec,
    SimConfig,
    SystematicRiskModel,
    TimeGrid,
    validate_pool,
)
from .risk import simulate_risk_path
from .rng import PURPOSE_RISK, derive_stream
from .spde import SpdeFdConfig, SpdeInstabilityError, solve_spde_explicit
from .stats import EmpiricalDistribution, ks_distance, spearman, var_at_level

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

MODEL_KEYS = {"alpha", "lambda_bar", "sigma", "beta_c", "beta_s", "lambda0"}
BUCKET_KEYS = MODEL_KEYS | {"weight"}
RISK_KEYS = {"kind", "x0", "kappa", "theta", "epsilon"}
GRID_KEYS = {"delta", "horizon", "sample_horizons"}
SIM_KEYS = {"trials", "seed"}
SOLVER_KEYS = {
    "finite": {"kind", "n", "lgd", "lgd_lo", "lgd_hi"},
    "moments": {"kind", "k", "variant"},
    "fd-deterministic": {"kind", "mesh_size", "lambda_max", "substeps", "method"},
    "fd-spde": {"kind", "mesh_size", "lambda_max", "blowup"},
    "fixed-point": {"kind", "inner_trials", "tol", "max_iter"},
}


class ConfigError(Exception):
    """Configuration problem; the message names the offending key."""


def load_config(path: str) -> dict[str, dict[str, str]]:
    """Read an INI config, or the "config" object of a JSON sidecar."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        cfg = payload.get("config")
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path}: JSON config must carry a 'config' object")
        return {s: {k: str(v) for k, v in kv.items()} for s, kv in cfg.items()}
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _need(cfg: dict, section: str, key: str) -> str:
    try:
        return cfg[section][key]
    except KeyError:
        raise ConfigError(f"missing config key [{section}] {key}") from None


def _get(cfg: dict, section: str, key: str, default: str) -> str:
    return cfg.get(section, {}).get(key, default)


def _float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None


def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from None


def _check_keys(cfg: dict, section: str, allowed: set[str]):
    for key in cfg.get(section, {}):
        if key not in allowed:
            raise ConfigError(f"unknown config key [{section}] {key}")


def _check_sections(cfg: dict):
    for section in cfg:
        if section not in ("model", "risk", "grid", "sim", "solver") \
                and not section.startswith("bucket."):
            raise ConfigError(f"unknown config section [{section}]")


def parse_pool(cfg: dict) -> PoolSpec:
    buckets = sorted(s for s in cfg if s.startswith("bucket."))
    if "model" in cfg and buckets:
        raise ConfigError("config has both [model] and [bucket.*] sections; use one")
    if "model" not in cfg and not buckets:
        raise ConfigError("config needs a [model] or at least one [bucket.*] section")

    def entry(section: str, with_weight: bool) -> PoolEntry:
        _check_keys(cfg, section, BUCKET_KEYS if with_weight else MODEL_KEYS)
        params = NameParams(
            alpha=_float(section, "alpha", _need(cfg, section, "alpha")),
            lambda_bar=_float(section, "lambda_bar", _need(cfg, section, "lambda_bar")),
            sigma=_float(section, "sigma", _need(cfg, section, "sigma")),
            beta_c=_float(section, "beta_c", _need(cfg, section, "beta_c")),
            beta_s=_float(section, "beta_s", _need(cfg, section, "beta_s")),
        )
        lam0 = _float(section, "lambda0", _need(cfg, section, "lambda0"))
        weight = _int(section, "weight", _need(cfg, section, "weight")) if with_weight else 1
        return PoolEntry(params=params, lambda0=lam0, weight=weight)

    if buckets:
        pool = PoolSpec(entries=tuple(entry(s, True) for s in buckets))
    else:
        pool = PoolSpec(entries=(entry("model", False),))
    report = validate_pool(pool)
    if not report.ok:
        raise ConfigError("pool validation failed: " + "; ".join(report.violations))
    return pool


def parse_risk(cfg: dict) -> SystematicRiskModel:
    _check_keys(cfg, "risk", RISK_KEYS)
    kind = _need(cfg, "risk", "kind")
    x0 = _float("risk", "x0", _need(cfg, "risk", "x0"))
    if kind in ("none", "brownian"):
        for key in ("kappa", "theta", "epsilon"):
            if key in cfg.get("risk", {}):
                raise ConfigError(f"[risk] {key} is not a parameter of kind {kind}")
        return SystematicRiskModel(kind, x0)
    if kind in ("ou", "cir"):
        try:
            return SystematicRiskModel(
                kind, x0,
                kappa=_float("risk", "kappa", _need(cfg, "risk", "kappa")),
                theta=_float("risk", "theta", _need(cfg, "risk", "theta")),
                epsilon=_float("risk", "epsilon", _need(cfg, "risk", "epsilon")),
            )
        except ValueError as exc:
            raise ConfigError(f"[risk] {exc}") from None
    raise ConfigError(f"[risk] kind = {kind!r} is not one of none|brownian|ou|cir")


def parse_grid(cfg: dict) -> TimeGrid:
    _check_keys(cfg, "grid", GRID_KEYS)
    delta = _float("grid", "delta", _need(cfg, "grid", "delta"))
    horizon = _float("grid", "horizon", _need(cfg, "grid", "horizon"))
    raw = _get(cfg, "grid", "sample_horizons", "")
    horizons = tuple(float(tok) for tok in raw.replace(",", " ").split()) if raw.strip() else ()
    try:
        return TimeGrid(delta=delta, horizon=horizon, sample_horizons=horizons)
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None


def parse_sim(cfg: dict, threads: int) -> SimConfig:
    _check_keys(cfg, "sim", SIM_KEYS)
    trials = _int("sim", "trials", _get(cfg, "sim", "trials", "1"))
    seed = _int("sim", "seed", _need(cfg, "sim", "seed"))
    try:
        return SimConfig(trials=trials, master_seed=seed, parallelism=threads)
    except ValueError as exc:
        raise ConfigError(f"[sim] {exc}") from None


def _check_solver(cfg: dict, expected_kind: str):
    _check_keys(cfg, "solver", SOLVER_KEYS[expected_kind])
    kind = _get(cfg, "solver", "kind", expected_kind)
    if kind != expected_kind:
        raise ConfigError(
            f"[solver] kind = {kind!r} does not match the {expected_kind!r} subcommand")


def parse_lgd(cfg: dict) -> LgdSpec:
    kind = _get(cfg, "solver", "lgd", "unit")
    if kind == "unit":
        for key in ("lgd_lo", "lgd_hi"):
            if key in cfg.get("solver", {}):
                raise ConfigError(f"[solver] {key} requires lgd = uniform")
        return LgdSpec.unit()
    if kind == "uniform":
        try:
            return LgdSpec.uniform(
                _float("solver", "lgd_lo", _need(cfg, "solver", "lgd_lo")),
                _float("solver", "lgd_hi", _need(cfg, "solver", "lgd_hi")),
            )
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None
    raise ConfigError(f"[solver] lgd = {kind!r} is not one of unit|uniform")


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    return repr(float(x))


def write_samples_csv(path: str, samples: LossSamples):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "horizon", "loss", "x_value"])
        for m in range(samples.losses.shape[1]):
            for h, horizon in enumerate(samples.horizons):
                writer.writerow([m, _fmt(horizon), _fmt(samples.losses[h, m]),
                                 _fmt(samples.x_values[h, m])])


def write_path_csv(path: str, times, loss):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "loss"])
        for t, l in zip(times, loss):
            writer.writerow([_fmt(t), _fmt(l)])


def write_sidecar(out: str, command: str, cfg: dict, seed: int):
    payload = {
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": cfg,
    }
    with open(out + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_samples_csv(path: str) -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """Group a samples CSV by horizon; returns horizon -> (loss, x_value)."""
    groups: dict[float, list[tuple[float, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"horizon", "loss"} <= set(reader.fieldnames):
            raise ConfigError(f"{path}: expected columns horizon, loss")
        has_x = "x_value" in reader.fieldnames
        for row in reader:
            h = float(row["horizon"])
            groups.setdefault(h, []).append(
                (float(row["loss"]), float(row["x_value"]) if has_x else float("nan")))
    return {
        h: (np.array([l for l, _ in rows]), np.array([x for _, x in rows]))
        for h, rows in sorted(groups.items())
    }


# ---------------------------------------------------------------- solvers


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = {s: dict(kv) for s, kv in cfg.items()}
    if getattr(args, "seed", None) is not None:
        cfg.setdefault("sim", {})["seed"] = str(args.seed)
    if getattr(args, "trials", None) is not None:
        cfg.setdefault("sim", {})["trials"] = str(args.trials)
    return cfg


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    env = os.environ.get("POOLSIM_THREADS", "")
    return max(1, int(env)) if env.strip() else 1


def run_solver(cfg: dict, kind: str, threads: int) -> LossSamples:
    """Run one of the sample-producing solvers on a parsed config."""
    _check_sections(cfg)
    pool = parse_pool(cfg)
    model = parse_risk(cfg)
    grid = parse_grid(cfg)
    sim = parse_sim(cfg, threads)
    _check_solver(cfg, kind)
    if kind == "finite":
        lgd = parse_lgd(cfg)
        n = _int("solver", "n", _get(cfg, "solver", "n", str(pool.total_names)))
        if n < 1:
            raise ConfigError("[solver] n must be >= 1")
        return run_finite_experiment(pool, model, lgd, grid, sim, n_names=n)
    if kind == "moments":
        order = _int("solver", "k", _need(cfg, "solver", "k"))
        variant = _get(cfg, "solver", "variant", "plain")
        try:
            run = simulate_limiting_loss(pool, model, grid, order, sim, variant=variant)
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None
        return run.samples
    if kind == "fd-spde":
        cfg_fd = SpdeFdConfig(
            mesh_size=_float("solver", "mesh_size", _need(cfg, "solver", "mesh_size")),
            lambda_max=_float("solver", "lambda_max", _need(cfg, "solver", "lambda_max")),
            blowup=_float("solver", "blowup", _get(cfg, "solver", "blowup", "1e6")),
        )
        idx = grid.horizon_indices()
        losses = np.empty((len(idx), sim.trials))
        xs = np.empty((len(idx), sim.trials))
        for m in range(sim.trials):
            risk = simulate_risk_path(model, grid,
                                      derive_stream(sim.master_seed, (PURPOSE_RISK, m, 0)))
            sol = solve_spde_explicit(pool, model, cfg_fd, risk)
            for h, j in enumerate(idx):
                losses[h, m] = sol.loss[j]
                xs[h, m] = risk.x[j]
        return LossSamples(horizons=tuple(grid.sample_horizons), losses=losses, x_values=xs)
    if kind == "fixed-point":
        inner = _int("solver", "inner_trials", _need(cfg, "solver", "inner_trials"))
        tol = _float("solver", "tol", _get(cfg, "solver", "tol", "1e-4"))
        max_iter = _int("solver", "max_iter", _get(cfg, "solver", "max_iter", "50"))
        idx = grid.horizon_indices()
        losses = np.empty((len(idx), sim.trials))
        xs = np.empty((len(idx), sim.trials))
        for m in range(sim.trials):
            risk = simulate_risk_path(model, grid,
                                      derive_stream(sim.master_seed, (PURPOSE_RISK, m, 0)))
            res = solve_fixed_point(pool, risk, grid, inner,
                                    tol=tol, max_iter=max_iter,
                                    master_seed=sim.master_seed, trial=m)
            for h, j in enumerate(idx):
                losses[h, m] = res.loss[j]
                xs[h, m] = risk.x[j]
        return LossSamples(horizons=tuple(grid.sample_horizons), losses=losses, x_values=xs)
    raise ConfigError(f"solver kind {kind!r} does not produce loss samples")


def cmd_samples(args, kind: str) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    samples = run_solver(cfg, kind, _threads(args))
    write_samples_csv(args.out, samples)
    write_sidecar(args.out, args.command, cfg, int(cfg["sim"]["seed"]))
    return EXIT_OK


def cmd_solve_deterministic(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    _check_sections(cfg)
    _check_keys(cfg, "sim", SIM_KEYS)
    if "risk" in cfg:
        parse_risk(cfg)  # validated though unused: beta_s = 0 solvers ignore X
    pool = parse_pool(cfg)
    grid = parse_grid(cfg)
    _check_solver(cfg, "fd-deterministic")
    method = _get(cfg, "solver", "method", "predictor-corrector")
    if method == "analytic":
        try:
            loss = np.array([analytic_no_feedback_loss(pool, t) for t in grid.times()])
        except ValueError as exc:
            raise ConfigError(f"[model] {exc}") from None
        times = grid.times()
    elif method == "predictor-corrector":
        try:
            sol = solve_pde_predictor_corrector(
                pool, grid,
                mesh_size=_float("solver", "mesh_size", _need(cfg, "solver", "mesh_size")),
                lambda_max=_float("solver", "lambda_max", _need(cfg, "solver", "lambda_max")),
                substeps=_int("solver", "substeps", _get(cfg, "solver", "substeps", "2")),
            )
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None
        times, loss = sol.times, sol.loss
    else:
        raise ConfigError(f"[solver] method = {method!r} is not one of "
                          "analytic|predictor-corrector")
    write_path_csv(args.out, times, loss)
    seed = int(cfg.get("sim", {}).get("seed", "0"))
    write_sidecar(args.out, "solve-deterministic", cfg, seed)
    return EXIT_OK


def cmd_analyze(args) -> int:
    levels = [float(tok) for tok in args.levels.split(",") if tok.strip()]
    groups_a = read_samples_csv(args.samples)
    groups_b = read_samples_csv(args.against) if args.against else None
    header = ["horizon", "count", "mean"]
    header += [f"var_{lv:g}" for lv in levels]
    header += ["spearman_x_loss"]
    if groups_b is not None:
        header += ["ks"] + [f"var_{lv:g}_delta" for lv in levels]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for h, (loss, xv) in groups_a.items():
            dist = EmpiricalDistribution.from_samples(loss)
            row = [_fmt(h), len(loss), _fmt(loss.mean())]
            row += [_fmt(var_at_level(dist, lv)) for lv in levels]
            rho = spearman(xv, loss) if np.isfinite(xv).all() else float("nan")
            row.append(_fmt(rho))
            if groups_b is not None:
                if h not in groups_b:
                    raise ConfigError(f"{args.against}: no samples at horizon {h}")
                loss_b = groups_b[h][0]
                dist_b = EmpiricalDistribution.from_samples(loss_b)
                row.append(_fmt(ks_distance(dist, dist_b)))
                row += [_fmt(var_at_level(dist, lv) - var_at_level(dist_b, lv))
                        for lv in levels]
            writer.writerow(row)
    return EXIT_OK


def cmd_compare(args) -> int:
    levels = [float(tok) for tok in args.levels.split(",") if tok.strip()]
    cfg_a = _apply_overrides(load_config(args.config_a), args)
    cfg_b = _apply_overrides(load_config(args.config_b), args)
    kind_a = _need(cfg_a, "solver", "kind")
    kind_b = _need(cfg_b, "solver", "kind")
    if cfg_a.get("sim", {}).get("seed") != cfg_b.get("sim", {}).get("seed"):
        raise ConfigError("[sim] seed differs between the two configs; "
                          "compare requires a shared master seed")
    threads = _threads(args)
    samples_a = run_solver(cfg_a, kind_a, threads)
    samples_b = run_solver(cfg_b, kind_b, threads)
    if samples_a.horizons != samples_b.horizons:
        raise ConfigError("[grid] sample_horizons differ between the two configs")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["horizon", "ks"]
        for lv in levels:
            header += [f"var_{lv:g}_a", f"var_{lv:g}_b", f"var_{lv:g}_delta"]
        writer.writerow(header)
        for h, horizon in enumerate(samples_a.horizons):
            da = EmpiricalDistribution.from_samples(samples_a.losses[h])
            db = EmpiricalDistribution.from_samples(samples_b.losses[h])
            row = [_fmt(horizon), _fmt(ks_distance(da, db))]
            for lv in levels:
                va = var_at_level(da, lv)
                vb = var_at_level(db, lv)
                row += [_fmt(va), _fmt(vb), _fmt(va - vb)]
            writer.writerow(row)
    write_sidecar(args.out, "compare", {"a": cfg_a, "b": cfg_b},
                  int(cfg_a["sim"]["seed"]))
    return EXIT_OK


# ---------------------------------------------------------------- frontend


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poolsim",
        description="Correlated default timing in large loan pools: finite-pool "
                    "Monte Carlo and limiting-loss solvers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run(name: str, help_: str):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="experiment config (INI, or a JSON sidecar)")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--seed", type=int, help="override [sim] seed")
        p.add_argument("--trials", type=int, help="override [sim] trials")
        p.add_argument("--threads", type=int,
                       help="worker threads (default POOLSIM_THREADS or 1); "
                            "never changes output values")
        return p

    add_run("simulate-finite", "Monte Carlo of the finite N-name pool")
    add_run("simulate-limit", "moment-method samples of the limiting loss")
    add_run("solve-spde-fd", "explicit finite-difference SPDE solve per trial")
    add_run("solve-fixed-point", "mean-field fixed-point solve per trial")
    add_run("solve-deterministic", "beta_s = 0 reference solvers (analytic / "
                                   "predictor-corrector)")

    pa = sub.add_parser("analyze", help="VaR/ECDF/Spearman/KS from stored sample files")
    pa.add_argument("samples", help="samples CSV (trial,horizon,loss,x_value)")
    pa.add_argument("against", nargs="?", help="optional second samples CSV for KS/deltas")
    pa.add_argument("--out", required=True)
    pa.add_argument("--levels", default="0.95,0.99", help="VaR levels, comma separated")

    pc = sub.add_parser("compare", help="run two solver configs on shared seeds "
                                        "and emit KS/VaR deltas")
    pc.add_argument("config_a")
    pc.add_argument("config_b")
    pc.add_argument("--out", required=True)
    pc.add_argument("--levels", default="0.95,0.99")
    pc.add_argument("--seed", type=int, help="override [sim] seed in both configs")
    pc.add_argument("--trials", type=int, help="override [sim] trials in both configs")
    pc.add_argument("--threads", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate-finite":
            return cmd_samples(args, "finite")
        if args.command == "simulate-limit":
            return cmd_samples(args, "moments")
        if args.command == "solve-spde-fd":
            return cmd_samples(args, "fd-spde")
        if args.command == "solve-fixed-point":
            return cmd_samples(args, "fixed-point")
        if args.command == "solve-deterministic":
            return cmd_solve_deterministic(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "compare":
            return cmd_compare(args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpdeInstabilityError, FixedPointNoConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
