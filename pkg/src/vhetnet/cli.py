"""
Command-line experiment runner.

Every subcommand reads one scenario (``--config`` JSON, default: the
reference simulation setting), applies ``--set`` overrides, runs one
experiment with a seeded random stream and writes its tables plus a
``<subcommand>.manifest.json`` into ``--out``.

Usage:
    vhetnet assoc-sweep --config scenarios/association_highrise.json --h-min 10 --h-max 300 --steps 30
    vhetnet simulate --policy comp3-same-tier --gamma-db -4 --set alpha_ABS=3 --seed 42
    vhetnet repro-all --seed 42 --out results/
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from . import __version__
from .assoc import assoc_prob_abs_analytic, assoc_prob_mc, regime_analysis
from .cache import FitCache
from .channel import los_profile
from .coverage import DEFAULT_COVERAGE_TRIALS, coverage_sweep, curve_shape
from .deploy import (
    WeightedSamples,
    classical_weighted_kmeans,
    compare_strategies,
    fading_aware_kmeans,
    grid_search_single_center,
    make_grid,
    placement_frame,
    realize_tbs,
    strategies_frame,
    weighted_kmeanspp,
)
from .dist import (
    histogram_table,
    ks_against_analytic,
    pdf_abs_first,
    pdf_abs_nth,
    pdf_abs_nth_binomial,
    pdf_tbs_first,
    pdf_tbs_nth,
    sample_batch,
    tbs_truncation_radius,
)
from .exceptions import ConfigError, DegenerateTriangulationError, VHetNetError
from .model import NetworkConfig, db_to_linear, linear_to_db, load_config, parse_override, table2_config, validate
from .numerics import DEFAULT_MC_TRIALS, RngStream, default_workers
from .outputs import ExperimentManifest, write_csv, write_json, write_pgm
from .sigstats import (
    DEFAULT_FIT_TRIALS,
    FitOptions,
    fit_pair,
    fit_table,
    ks_fit_vs_empirical,
    sample_u,
    sample_v,
    select_cross_moment_variant,
)
from .sim import empirical_coverage_sweep, sir_samples
from .triangulation import delaunay, empty_circumcircle_violations, locate, obtuse_fraction, scan_locate
from .types import LinkStateVector, Method, Policy, Strategy, Tier

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
DEFAULT_OUT = "results"
DEFAULT_EXTENT = (-1000.0, 1000.0, -1000.0, 1000.0)
DEFAULT_MAP_TRIALS = 200

EPILOG = """
Subcommands:
  validate-dists      analytic vs sampled distance laws (CSV + KS table)
  fit-gamma           Gamma fits of U and V per tier and link-state vector
  assoc-sweep         ABS association probability against user altitude
  regime              altitude regimes of the association curve (JSON)
  coverage-sweep      analytic and simulated coverage against threshold
  simulate            system-level simulation of one cooperation policy
  deploy-opt          cluster weighted samples into ABS positions
  heatmap             coverage map of one deployment strategy (CSV + PGM)
  compare-strategies  coverage of the four deployment strategies
  los-profile         LoS probability against user altitude
  invariants          exactness, clustering, Delaunay and determinism checks
  repro-all           run the acceptance experiments and check them

Examples:
  vhetnet validate-dists --trials 100000
  vhetnet coverage-sweep --gamma-db-min -10 --gamma-db-max 10 --steps 11
  vhetnet coverage-sweep --vary N --values 5 10 20 40 --gamma-db-min 3 --gamma-db-max 3 --steps 1
  vhetnet deploy-opt --samples weights.csv --k 5 --alpha 2 --m 2
  vhetnet repro-all --seed 42 --threads 8
"""


def setup_logging(level: str = "INFO", log_file: str | None = None) -> None:
    """Configure the root logger for console output, and a file when ``log_file`` is set."""
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        handlers.insert(0, logging.FileHandler(path, mode="w", encoding="utf-8"))
    logging.basicConfig(level=getattr(logging, level.upper()), format=LOG_FORMAT, handlers=handlers, force=True)


# ========== Run context ==========


@dataclass
class RunContext:
    """Everything a subcommand needs: scenario, random stream, output directory and manifest."""

    args: argparse.Namespace
    cfg: NetworkConfig
    rng: RngStream
    out: Path
    workers: int
    cache: FitCache
    manifest: ExperimentManifest

    def trials(self, default: int) -> int:
        return self.args.trials or default

    def fit_options(self, **changes: Any) -> FitOptions:
        return FitOptions(
            trials=getattr(self.args, "fit_trials", DEFAULT_FIT_TRIALS),
            select_variant=not getattr(self.args, "fixed_variant", False),
            **changes,
        )

    def csv(self, frame: pd.DataFrame, name: str) -> Path:
        path = write_csv(frame, self.out / name)
        self.manifest.add_output(path)
        logger.info("Wrote %s", path)
        return path

    def json(self, data: Any, name: str) -> Path:
        path = write_json(data, self.out / name)
        self.manifest.add_output(path)
        logger.info("Wrote %s", path)
        return path

    def pgm(self, values: np.ndarray, name: str, extent: Sequence[float]) -> None:
        for path in write_pgm(values, self.out / name, tuple(extent)):
            self.manifest.add_output(path)
        logger.info("Wrote %s", self.out / name)


def load_scenario(args: argparse.Namespace) -> NetworkConfig:
    """Scenario from ``--config`` (or the reference setting) with ``--set`` overrides applied."""
    overrides = dict(parse_override(item) for item in args.set)
    source = args.config if args.config else table2_config().to_dict()
    return load_config(source, overrides)


def _parameters(args: argparse.Namespace, cfg: NetworkConfig) -> dict[str, Any]:
    params = {k: v for k, v in vars(args).items() if k != "handler"}
    params["workers"] = args.threads or default_workers()
    params["config"] = cfg.to_dict()
    return params


# ========== Subcommands ==========


def cmd_validate_dists(ctx: RunContext) -> dict[str, Any]:
    trials = ctx.trials(100_000)
    tables, ks_rows = [], []
    for i, tier in enumerate(Tier):
        samples = sample_batch(tier, ctx.cfg, ctx.rng.child(i).generator(), trials)
        for n in (1, 2, 3):
            column = samples[:, n - 1]
            tables.append(histogram_table(tier, n, ctx.cfg, column, ctx.args.bins))
            result = ks_against_analytic(tier, n, ctx.cfg, trials, ctx.rng, samples=column)
            ks_rows.append(asdict(result) | {"tier": str(tier)})
            logger.info("%s n=%d: KS %.4f", tier, n, result.statistic)
    ctx.csv(pd.concat(tables, ignore_index=True), "dists.csv")
    ks = pd.DataFrame(ks_rows)
    ctx.csv(ks, "dists_ks.csv")
    return {"max_ks": float(ks["statistic"].max())}


def cmd_fit_gamma(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    options = ctx.fit_options(
        state_weighting=args.weighting, state_domain=args.state_domain, exponent_pairing=args.exponent_pairing
    )
    table = fit_table(ctx.cfg, options, ctx.rng, ctx.cache, ctx.workers)
    entries = [(Tier.ABS, LinkStateVector.all_los(), table.abs_U, table.abs_V)]
    entries += [(Tier.TBS, z, table.tbs_U[z.label], table.tbs_V[z.label]) for z in LinkStateVector.all()]

    rows, ks_v = [], {}
    check_rng = ctx.rng.substream(5)
    for i, (tier, zeta, u, v) in enumerate(entries):
        row = {
            "tier": str(tier),
            "zeta": zeta.label,
            "nu": u.nu,
            "theta": u.theta,
            "nu_prime": v.nu,
            "theta_prime": v.theta,
            "variant": v.variant,
        }
        if args.ks_trials:
            gen = check_rng.child(i).generator()
            row["ks_u"] = ks_fit_vs_empirical(u, sample_u(tier, zeta, ctx.cfg, gen, args.ks_trials, args.weighting))
            row["ks_v"] = ks_fit_vs_empirical(v, sample_v(tier, zeta, ctx.cfg, gen, args.ks_trials, args.weighting))
            ks_v[f"{tier}/{zeta.label}"] = row["ks_v"]
        rows.append(row)
    ctx.csv(pd.DataFrame(rows), "fits.csv")

    if args.select_variant:
        selections = {}
        for i, zeta in enumerate(LinkStateVector.all()):
            selection = select_cross_moment_variant(
                Tier.TBS, zeta, ctx.cfg, options.trials, ctx.rng.substream(6).child(i), options, args.weighting
            )
            selections[zeta.label] = {
                "best": selection.best.variant,
                "scores": selection.scores,
                "empirical_variance": selection.empirical_variance,
            }
        ctx.json(selections, "fit_variants.json")
    return {"ks_v": ks_v}


def _h_grid(args: argparse.Namespace) -> np.ndarray:
    return np.linspace(args.h_min, args.h_max, args.steps)


def cmd_assoc_sweep(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    method = args.method
    trials = ctx.trials(DEFAULT_MC_TRIALS)
    options = ctx.fit_options()
    rows = []
    for i, h in enumerate(_h_grid(args)):
        cfg_h = validate(ctx.cfg.replace(h=float(h))).config
        row: dict[str, Any] = {"h": float(h)}
        if method in ("analytic", "both"):
            analytic = assoc_prob_abs_analytic(
                cfg_h, trials, ctx.rng.child(i), options=options, cache=ctx.cache, workers=ctx.workers
            )
            row["p_abs_analytic"] = analytic.p_abs
            row["std_error_analytic"] = analytic.std_error
        if method in ("montecarlo", "both"):
            mc = assoc_prob_mc(cfg_h, args.mc_trials, ctx.rng.substream(1).child(i), args.user_spread, ctx.workers)
            row["p_abs_mc"] = mc.p_abs
            row["p_mixed"] = mc.p_mixed
            row["std_error_mc"] = mc.std_error
        logger.info("h=%.1f m: %s", h, {k: round(v, 4) for k, v in row.items() if k != "h"})
        rows.append(row)
    frame = pd.DataFrame(rows)
    ctx.csv(frame, "assoc.csv")
    return {column: frame[column].tolist() for column in frame.columns}


def cmd_regime(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    method = Method.ANALYTIC if args.method == "analytic" else Method.MONTECARLO
    report = regime_analysis(
        ctx.cfg,
        list(_h_grid(args)),
        method,
        ctx.trials(DEFAULT_MC_TRIALS),
        ctx.rng,
        ctx.fit_options(),
        ctx.cache,
        ctx.workers,
    )
    ctx.csv(pd.DataFrame({"h": report.h_grid, "p_abs": report.p_abs_curve}), "regime.csv")
    ctx.json(report.to_dict(), "regime.json")
    return report.to_dict()


def cmd_coverage_sweep(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    if (args.vary is None) != (args.values is None):
        raise ConfigError("--vary and --values must be given together")
    gammas_db = np.linspace(args.gamma_db_min, args.gamma_db_max, args.steps)
    frame = coverage_sweep(
        ctx.cfg,
        gammas_db,
        args.vary,
        args.values,
        trials=ctx.trials(DEFAULT_COVERAGE_TRIALS),
        mc_trials=args.mc_trials,
        rng=ctx.rng,
        include_mc=not args.no_mc,
        options=ctx.fit_options(),
        cache=ctx.cache,
        workers=ctx.workers,
    )
    ctx.csv(frame, "coverage.csv")
    summary: dict[str, Any] = {column: frame[column].tolist() for column in ("x", "gamma_db", "p_total_analytic")}
    if args.vary is not None and len(args.values) >= 3:
        groups = (g.sort_values("x") for _, g in frame.groupby("gamma_db", sort=False))
        summary["shapes"] = [curve_shape(g["x"], g["p_total_analytic"]).to_dict() for g in groups]
    if not args.no_mc:
        summary["p_total_mc"] = frame["p_total_mc"].tolist()
        summary["max_abs_diff"] = float(np.max(np.abs(frame["p_total_analytic"] - frame["p_total_mc"])))
    return summary


def cmd_simulate(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    gamma_db = linear_to_db(ctx.cfg.gamma_ABS) if args.gamma_db is None else args.gamma_db
    report = empirical_coverage_sweep(
        ctx.cfg,
        [db_to_linear(gamma_db)],
        Policy(args.policy),
        ctx.trials(20_000),
        ctx.rng,
        args.window_radius,
        args.user_spread,
        ctx.workers,
    )[0]
    data = report.to_dict() | {"policy": args.policy}
    ctx.json(data, "simulate.json")
    return data


def cmd_deploy_opt(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    samples = WeightedSamples.from_frame(pd.read_csv(args.samples))
    init = weighted_kmeanspp(samples, args.k, ctx.rng.substream(4))
    if args.strategy == Strategy.CLASSICAL:
        state = classical_weighted_kmeans(samples, args.k, args.epsilon, args.t_max, init)
    else:
        scale = args.length_scale or ctx.cfg.gap
        state = fading_aware_kmeans(
            samples, args.k, args.alpha, args.m, args.epsilon, args.t_max, init, length_scale=scale
        )
    ctx.csv(placement_frame(state.centers), "centers.csv")
    data = state.to_dict() | {"strategy": args.strategy}
    ctx.json(data, "cluster_state.json")
    return {"objective": state.objective, "iterations": state.iterations, "converged": state.converged}


def _strategy_results(ctx: RunContext):
    args = ctx.args
    extent = tuple(args.extent)
    grid = make_grid(extent, args.nx, args.ny)
    tbs_xy = realize_tbs(ctx.cfg, extent, ctx.rng.substream(1))
    results = compare_strategies(
        ctx.cfg,
        grid,
        args.k,
        gamma_db=args.gamma_db,
        trials=ctx.trials(DEFAULT_MAP_TRIALS),
        rng=ctx.rng,
        tbs_xy=tbs_xy,
        extent=extent,
        alpha=args.alpha,
        m=args.m,
        length_scale=args.length_scale,
        epsilon=args.epsilon,
        T_max=args.t_max,
        workers=ctx.workers,
    )
    return grid, tbs_xy, results


def _obtuse(points: np.ndarray) -> float | None:
    try:
        return obtuse_fraction(delaunay(points))
    except DegenerateTriangulationError:
        return None


def cmd_heatmap(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    grid, _, results = _strategy_results(ctx)
    result = results[Strategy(args.strategy)]
    name = f"heatmap_{args.strategy}"
    ctx.csv(pd.DataFrame({"x": grid[:, 0], "y": grid[:, 1], "coverage": result.coverage_map}), f"{name}.csv")
    ctx.pgm(result.coverage_map.reshape(args.ny, args.nx), f"{name}.pgm", args.extent)
    return {"strategy": args.strategy, "aggregate": result.aggregate}


def cmd_compare_strategies(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    grid, tbs_xy, results = _strategy_results(ctx)
    ctx.csv(strategies_frame(results), "strategies.csv")

    maps = pd.DataFrame({"x": grid[:, 0], "y": grid[:, 1]})
    placements = []
    for strategy, result in results.items():
        maps[str(strategy)] = result.coverage_map
        placements.append(placement_frame(result.abs_xy).assign(strategy=str(strategy)))
        ctx.pgm(result.coverage_map.reshape(args.ny, args.nx), f"map_{strategy}.pgm", args.extent)
    ctx.csv(maps, "coverage_maps.csv")
    ctx.csv(pd.concat(placements, ignore_index=True)[["strategy", "k", "x", "y"]], "placements.csv")

    summary = {
        "aggregate": {str(s): r.aggregate for s, r in results.items()},
        "tbs_count": len(tbs_xy),
        "obtuse_fraction_tbs": _obtuse(tbs_xy),
        "obtuse_fraction_fading_aware": _obtuse(results[Strategy.FADING_AWARE].abs_xy),
    }
    ctx.json(summary, "strategies.json")
    return summary


def cmd_los_profile(ctx: RunContext) -> dict[str, Any]:
    args = ctx.args
    h = _h_grid(args)
    p_los, p_nlos = los_profile(h, args.z, ctx.cfg.env)
    ctx.csv(pd.DataFrame({"h": h, "p_los": p_los, "p_nlos": p_nlos}), "los_profile.csv")
    return {"p_los_min": float(np.min(p_los)), "p_los_max": float(np.max(p_los))}


def cmd_invariants(ctx: RunContext) -> dict[str, Any]:
    """Exact identities and determinism of the numerical kernels, independent of Monte Carlo tolerances."""
    args = ctx.args
    if min(args.instances, args.toy_sets) < 1 or args.points < 3:
        raise ValueError("--instances and --toy-sets must be >= 1 and --points >= 3")
    cfg = ctx.cfg
    r_abs = np.linspace(cfg.gap, cfg.r_max, 1000)
    r_tbs = np.linspace(cfg.h, tbs_truncation_radius(1, cfg), 1000)
    summary: dict[str, Any] = {
        "reduction_abs_max_diff": float(np.max(np.abs(pdf_abs_nth(r_abs, 1, cfg) - pdf_abs_first(r_abs, cfg)))),
        "reduction_tbs_max_diff": float(np.max(np.abs(pdf_tbs_nth(r_tbs, 1, cfg) - pdf_tbs_first(r_tbs, cfg)))),
        "binomial_form_max_diff": max(
            float(np.max(np.abs(pdf_abs_nth_binomial(r_abs, n, cfg) - pdf_abs_nth(r_abs, n, cfg))))
            for n in range(1, min(3, cfg.N) + 1)
        ),
    }

    gen = ctx.rng.substream(1).generator()
    drops = capped = 0
    for i in range(args.instances):
        samples = WeightedSamples(gen.uniform(0.0, 500.0, (40, 2)), gen.exponential(1.0, 40))
        state = fading_aware_kmeans(samples, 3, T_max=50, rng=ctx.rng.child(i), length_scale=100.0)
        drops += state.assignment_drops
        capped += state.iterations > 50
    gaps = []
    for _ in range(args.toy_sets):
        samples = WeightedSamples(gen.uniform(0.0, 30.0, (10, 2)), gen.uniform(0.5, 1.5, 10))
        state = fading_aware_kmeans(samples, 1, epsilon=1e-9, T_max=500, init=samples.points[:1], length_scale=100.0)
        gaps.append(abs(state.objective - grid_search_single_center(samples, length_scale=100.0, resolution=301)[1]))
    summary |= {"assignment_drops": drops, "iteration_cap_exceeded": capped, "single_center_max_gap": max(gaps)}

    violations = 0
    for _ in range(args.instances):
        tri = delaunay(gen.random((args.points, 2)) * 1_000.0)
        violations += empty_circumcircle_violations(tri)
    queries = gen.uniform(-50.0, 1_050.0, (args.queries, 2))
    mismatches, start = 0, 0
    for q, want in zip(queries, scan_locate(tri, queries)):
        loc = locate(tri, q, start, warn=False)
        mismatches += int(loc.inside != (want >= 0) or (loc.inside and loc.triangle != want))
        start = loc.triangle if loc.inside else start
    summary |= {"circumcircle_violations": violations, "locate_mismatches": mismatches}

    workers = max(2, ctx.workers)
    trials = ctx.trials(5_000)
    runs = [sir_samples(cfg, trials=trials, rng=ctx.rng.substream(2), workers=w).sir for w in (1, workers, 1)]
    fits = [
        fit_pair(Tier.TBS, LinkStateVector.all_los(), cfg, ctx.fit_options(), ctx.rng.substream(3), workers=w)
        for w in (1, workers)
    ]
    summary["worker_mismatches"] = sum(not np.array_equal(runs[0], r) for r in runs[1:]) + (fits[0] != fits[1])
    ctx.json(summary, "invariants.json")
    return summary


# ========== Acceptance suite ==========


@dataclass(frozen=True, slots=True)
class Check:
    """One acceptance check: ``value`` must lie in [lower, upper]. Soft checks only warn."""

    name: str
    value: float
    lower: float
    upper: float
    hard: bool = True

    @property
    def passed(self) -> bool:
        return bool(self.lower <= self.value <= self.upper)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "hard": self.hard,
            "passed": self.passed,
        }


ASSOCIATION = ["--set", "r_C=500", "--set", "N=30"]
COMP_ALPHA = ["--set", "alpha_ABS=3", "--set", "alpha_TBS_L=3", "--set", "alpha_TBS_N=3"]
POLICIES = ("comp3-same-tier", "single-nearest", "strongest-three")
STRATEGY_TARGETS = {"fading-aware": 0.8142, "classical": 0.7985, "random": 0.7293, "tbs-only": 0.6199}
ABS_COUNTS = ["5", "10", "20", "30", "40", "60"]
USER_ALTITUDES = [str(h) for h in range(30, 301, 30)]


def _scaled(trials: int, scale: float, floor: int = 1_000) -> str:
    return str(max(floor, int(trials * scale)))


def repro_plan(scale: float = 1.0) -> dict[str, list[str]]:
    """Sub-experiment name -> argv, in run order."""
    fit = ["--fit-trials", _scaled(DEFAULT_FIT_TRIALS, scale)]
    assoc_grid = ["--h-min", "10", "--h-max", "300", "--steps", "30"]
    plan = {
        "validate-dists": ["validate-dists", "--trials", _scaled(100_000, scale)],
        "fit-gamma": ["fit-gamma", "--weighting", "conditional", "--ks-trials", _scaled(100_000, scale), *fit],
        "assoc-highrise": [
            "assoc-sweep", *ASSOCIATION, "--set", "env=highrise", *assoc_grid, "--method", "both",
            "--trials", _scaled(50_000, scale), "--mc-trials", _scaled(50_000, scale), "--user-spread", "1000", *fit,
        ],
        "assoc-suburban": [
            "assoc-sweep", *ASSOCIATION, "--set", "env=suburban", "--h-min", "30", "--h-max", "30", "--steps", "1",
            "--method", "analytic", "--trials", _scaled(50_000, scale), *fit,
        ],
        "regime-highrise": [
            "regime", *ASSOCIATION, "--set", "env=highrise", *assoc_grid, "--trials", _scaled(50_000, scale), *fit,
        ],
        "coverage-sweep": [
            "coverage-sweep", "--gamma-db-min", "-10", "--gamma-db-max", "10", "--steps", "11",
            "--trials", _scaled(DEFAULT_COVERAGE_TRIALS, scale), "--mc-trials", _scaled(20_000, scale), *fit,
        ],
    }
    for policy in POLICIES:
        plan[f"simulate-{policy}"] = [
            "simulate", "--policy", policy, "--gamma-db", "-4", *COMP_ALPHA, "--trials", _scaled(20_000, scale)
        ]
    plan["coverage-abs-count"] = [
        "coverage-sweep", "--set", "alpha_ABS=3", "--set", "alpha_TBS_L=3", "--vary", "N", "--values", *ABS_COUNTS,
        "--gamma-db-min", "0", "--gamma-db-max", "0", "--steps", "1", "--no-mc",
        "--trials", _scaled(20_000, scale), *fit,
    ]
    plan["coverage-altitude"] = [
        "coverage-sweep", "--vary", "h", "--values", *USER_ALTITUDES, "--gamma-db-min", "-3", "--gamma-db-max", "-3",
        "--steps", "1", "--no-mc", "--trials", _scaled(20_000, scale), *fit,
    ]
    plan["compare-strategies"] = ["compare-strategies", "--k", "5", "--trials", _scaled(DEFAULT_MAP_TRIALS, scale, 20)]
    plan["invariants"] = ["invariants", "--trials", _scaled(5_000, scale), "--fit-trials", _scaled(20_000, scale)]
    return plan


def _at(summary: dict[str, Any], column: str, h: float) -> float:
    index = int(np.argmin(np.abs(np.asarray(summary["h"]) - h)))
    return float(summary[column][index])


def acceptance_checks(summaries: dict[str, dict[str, Any]]) -> list[Check]:
    """Evaluate the acceptance criteria on the summaries of a ``repro_plan`` run."""
    checks = [Check("distance KS max", summaries["validate-dists"]["max_ks"], 0.0, 0.01)]
    ks_v = summaries["fit-gamma"]["ks_v"]
    checks.append(Check("V fit KS ABS", ks_v["ABS/LLL"], 0.0, 0.05))
    checks.append(Check("V fit KS TBS LLL", ks_v["TBS/LLL"], 0.0, 0.05))

    high = summaries["assoc-highrise"]
    checks.append(Check("p_abs h=30 highrise", _at(high, "p_abs_analytic", 30.0), 0.69, 0.79))
    checks.append(Check("p_abs h=300", _at(high, "p_abs_analytic", 300.0), 0.92, 0.98))
    checks.append(Check("p_abs h=30 suburban", summaries["assoc-suburban"]["p_abs_analytic"][0], 0.33, 0.43))
    checks.append(Check("mixed share max", float(np.max(high["p_mixed"])), 0.0, 0.10))
    checks.append(Check("mixed share mean", float(np.mean(high["p_mixed"])), 0.03, 0.07))
    checks.append(Check("regime h_th", summaries["regime-highrise"]["h_threshold"], 90.0, 130.0))

    coverage = summaries["coverage-sweep"]
    checks.append(Check("analytic vs MC coverage", coverage["max_abs_diff"], 0.0, 0.05))
    steps = np.diff(coverage["p_total_analytic"])
    checks.append(Check("coverage increase along gamma", float(np.max(steps, initial=0.0)), -np.inf, 1e-12))
    by_count = summaries["coverage-abs-count"]["shapes"][0]
    checks.append(Check("coverage interior max in N", float(by_count["interior_max"]), 1.0, 1.0))
    checks.append(Check("coverage curvature in N", by_count["max_curvature"], -np.inf, 5e-4, hard=False))
    by_altitude = summaries["coverage-altitude"]["shapes"][0]
    checks.append(Check("coverage interior min in h", float(by_altitude["interior_min"]), 1.0, 1.0))

    comp3 = summaries["simulate-comp3-same-tier"]["p_total"]
    single = summaries["simulate-single-nearest"]["p_total"]
    strongest = summaries["simulate-strongest-three"]["p_total"]
    checks.append(Check("CoMP gain", comp3 - single, 0.5, 1.0))
    checks.append(Check("comp3 coverage", comp3, 0.8, 1.0))
    checks.append(Check("single-nearest coverage", single, 0.0, 0.25))
    checks.append(Check("comp3 vs strongest-three", abs(comp3 - strongest), 0.0, 0.05))

    aggregate = summaries["compare-strategies"]["aggregate"]
    order = list(STRATEGY_TARGETS)
    for better, worse in zip(order, order[1:]):
        checks.append(Check(f"{better} >= {worse}", aggregate[better] - aggregate[worse], 0.0, np.inf))
    for name, target in STRATEGY_TARGETS.items():
        checks.append(Check(f"{name} aggregate", aggregate[name], target - 0.03, target + 0.03, hard=False))

    exact = summaries["invariants"]
    checks.append(Check("ABS n=1 reduction", exact["reduction_abs_max_diff"], 0.0, 1e-12))
    checks.append(Check("TBS n=1 reduction", exact["reduction_tbs_max_diff"], 0.0, 1e-12))
    checks.append(Check("binomial vs compact density", exact["binomial_form_max_diff"], 0.0, 1e-10))
    checks.append(Check("assignment step drops", exact["assignment_drops"], 0, 0))
    checks.append(Check("iteration cap exceeded", exact["iteration_cap_exceeded"], 0, 0))
    checks.append(Check("K=1 gap to grid optimum", exact["single_center_max_gap"], 0.0, 1e-3))
    checks.append(Check("circumcircle violations", exact["circumcircle_violations"], 0, 0))
    checks.append(Check("locate vs exhaustive scan", exact["locate_mismatches"], 0, 0))
    checks.append(Check("results across worker counts", exact["worker_mismatches"], 0, 0))
    return checks


def cmd_repro_all(ctx: RunContext) -> dict[str, Any]:
    parser = build_parser()
    common = _common_argv(ctx.args)
    summaries = {}
    for name, argv in repro_plan(ctx.args.scale).items():
        logger.info("Running %s", name)
        sub_args = parser.parse_args([*argv, *common, "--out", str(ctx.out / name)])
        summaries[name] = _execute(sub_args, ctx.cache, ctx.args.repository)
    checks = acceptance_checks(summaries)
    for check in checks:
        log = logger.info if check.passed else (logger.error if check.hard else logger.warning)
        log("%-32s %s (value %.4g, range [%g, %g])", check.name, "ok" if check.passed else "FAIL", check.value,
            check.lower, check.upper)
    failed = [c.name for c in checks if c.hard and not c.passed]
    summary = {"checks": [c.to_dict() for c in checks], "failed": failed, "passed": not failed}
    ctx.json(summary, "repro_summary.json")
    return summary


def _common_argv(args: argparse.Namespace) -> list[str]:
    argv = ["--seed", str(args.seed)]
    if args.config:
        argv += ["--config", str(args.config)]
    for item in args.set:
        argv += ["--set", item]
    if args.threads:
        argv += ["--threads", str(args.threads)]
    return argv


# ========== Parser ==========


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("global options")
    group.add_argument("--config", default=None, help="scenario JSON (default: reference setting)")
    group.add_argument(
        "--set", action="append", default=[], metavar="FIELD=VALUE", help="override a config field (repeatable)"
    )
    group.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    group.add_argument("--threads", type=int, default=None, help="worker threads (default: $VHETNET_THREADS or 1)")
    group.add_argument("--out", default=DEFAULT_OUT, help=f"output directory (default: {DEFAULT_OUT})")
    group.add_argument("--db", default=None, metavar="URL", help="SQLAlchemy URL of the fit cache and run ledger")
    group.add_argument(
        "--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="(default: INFO)"
    )
    group.add_argument("--log-file", default=None, help="also log to this file")
    group.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (default: per subcommand)")
    return common


def _add_h_grid(parser: argparse.ArgumentParser, lo: float, hi: float, steps: int) -> None:
    parser.add_argument("--h-min", type=float, default=lo, help=f"lowest user altitude in m (default: {lo})")
    parser.add_argument("--h-max", type=float, default=hi, help=f"highest user altitude in m (default: {hi})")
    parser.add_argument("--steps", type=int, default=steps, help=f"grid points (default: {steps})")


def _add_fit_trials(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--fit-trials",
        type=int,
        default=DEFAULT_FIT_TRIALS,
        help=f"cross-moment trials of each Gamma fit (default: {DEFAULT_FIT_TRIALS})",
    )
    parser.add_argument(
        "--fixed-variant",
        action="store_true",
        help="keep the requested cross-moment reading instead of selecting it against sampled V",
    )


def _add_clustering(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=5, help="number of ABSs (default: 5)")
    parser.add_argument("--alpha", type=float, default=2.0, help="kernel path-loss exponent (default: 2)")
    parser.add_argument("--m", type=float, default=2.0, help="kernel Nakagami parameter, inf allowed (default: 2)")
    parser.add_argument("--length-scale", type=float, default=None, help="distance normalisation (default: H - h)")
    parser.add_argument("--epsilon", type=float, default=1e-3, help="objective tolerance (default: 1e-3)")
    parser.add_argument("--t-max", type=int, default=100, help="iteration cap (default: 100)")


def _add_map(parser: argparse.ArgumentParser) -> None:
    _add_clustering(parser)
    parser.add_argument(
        "--extent", type=float, nargs=4, default=list(DEFAULT_EXTENT), metavar=("XMIN", "XMAX", "YMIN", "YMAX")
    )
    parser.add_argument("--nx", type=int, default=40, help="grid columns (default: 40)")
    parser.add_argument("--ny", type=int, default=40, help="grid rows (default: 40)")
    parser.add_argument("--gamma-db", type=float, default=None, help="coverage threshold (default: gamma_TBS)")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="vhetnet",
        description="CoMP coverage experiments for vertical heterogeneous networks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def add(name: str, handler: Callable[[RunContext], dict], help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("validate-dists", cmd_validate_dists, "analytic vs sampled distance laws")
    p.add_argument("--bins", type=int, default=60, help="histogram bins (default: 60)")

    p = add("fit-gamma", cmd_fit_gamma, "Gamma fits of U and V")
    _add_fit_trials(p)
    p.add_argument("--weighting", choices=["indicator", "conditional"], default="indicator")
    p.add_argument("--state-domain", choices=["pair-sum", "fixed"], default="pair-sum")
    p.add_argument("--exponent-pairing", choices=["own", "crossed"], default="own")
    p.add_argument("--ks-trials", type=int, default=0, help="draws for KS checks of each fit (default: 0, off)")
    p.add_argument("--select-variant", action="store_true", help="score every cross-moment variant")

    p = add("assoc-sweep", cmd_assoc_sweep, "ABS association against user altitude")
    _add_h_grid(p, 10.0, 300.0, 30)
    _add_fit_trials(p)
    p.add_argument("--method", choices=["analytic", "montecarlo", "both"], default="both")
    p.add_argument("--mc-trials", type=int, default=50_000, help="simulated users per altitude (default: 50000)")
    p.add_argument("--user-spread", type=float, default=0.0, help="side of the user square in m (default: 0)")

    p = add("regime", cmd_regime, "altitude regimes of the association curve")
    _add_h_grid(p, 10.0, 300.0, 30)
    _add_fit_trials(p)
    p.add_argument("--method", choices=["analytic", "montecarlo"], default="analytic")

    p = add("coverage-sweep", cmd_coverage_sweep, "analytic and simulated coverage")
    _add_fit_trials(p)
    p.add_argument("--gamma-db-min", type=float, default=-10.0)
    p.add_argument("--gamma-db-max", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--vary", choices=["h", "H", "N"], default=None, help="also sweep one scenario field")
    p.add_argument("--values", type=float, nargs="+", default=None, help="values of the swept field")
    p.add_argument("--mc-trials", type=int, default=20_000, help="simulated snapshots (default: 20000)")
    p.add_argument("--no-mc", action="store_true", help="skip the system-level simulation")

    p = add("simulate", cmd_simulate, "system-level coverage simulation")
    p.add_argument("--policy", choices=[str(x) for x in Policy], default=str(Policy.COMP3_SAME_TIER))
    p.add_argument("--gamma-db", type=float, default=None, help="threshold (default: gamma_ABS)")
    p.add_argument("--window-radius", type=float, default=None, help="TBS window in m (default: derived)")
    p.add_argument("--user-spread", type=float, default=0.0)

    p = add("deploy-opt", cmd_deploy_opt, "cluster weighted samples into ABS positions")
    _add_clustering(p)
    p.add_argument("--samples", required=True, help="CSV with columns x, y, w")
    p.add_argument("--strategy", choices=[str(Strategy.FADING_AWARE), str(Strategy.CLASSICAL)], default="fading-aware")

    p = add("heatmap", cmd_heatmap, "coverage map of one deployment strategy")
    _add_map(p)
    p.add_argument("--strategy", choices=[str(s) for s in Strategy], default=str(Strategy.FADING_AWARE))

    p = add("compare-strategies", cmd_compare_strategies, "coverage of every deployment strategy")
    _add_map(p)

    p = add("los-profile", cmd_los_profile, "LoS probability against user altitude")
    _add_h_grid(p, 1.0, 300.0, 61)
    p.add_argument("--z", type=float, default=100.0, help="horizontal distance in m (default: 100)")

    p = add("invariants", cmd_invariants, "exactness, clustering, Delaunay and determinism checks")
    _add_fit_trials(p)
    p.add_argument("--instances", type=int, default=100, help="clustering instances and point sets (default: 100)")
    p.add_argument("--points", type=int, default=200, help="points per Delaunay set (default: 200)")
    p.add_argument("--queries", type=int, default=10_000, help="point-location queries (default: 10000)")
    p.add_argument("--toy-sets", type=int, default=10, help="K = 1 toy sets for the grid optimum (default: 10)")

    p = add("repro-all", cmd_repro_all, "run and check the acceptance experiments")
    p.add_argument("--scale", type=float, default=1.0, help="multiply every trial count (default: 1)")
    return parser


# ========== Entry point ==========


@contextmanager
def _fit_store(url: str | None) -> Iterator[tuple[FitCache, Any]]:
    """A FitCache, written through to a database when ``url`` is set."""
    if not url:
        yield FitCache(), None
        return
    try:
        from sqlalchemy import create_engine
        from sqlalchemy.orm import Session

        from .models import Base
        from .repository import FitRepository
    except ImportError:
        raise ConfigError("--db needs SQLAlchemy: pip install vhetnet[db]") from None
    engine = create_engine(url)
    Base.metadata.create_all(engine)
    with Session(engine) as session:
        repository = FitRepository(session)
        yield FitCache(store=repository), repository
        session.commit()
    engine.dispose()


def _execute(args: argparse.Namespace, cache: FitCache, repository: Any = None) -> dict[str, Any]:
    """Run one parsed subcommand and write its manifest; returns the subcommand's summary."""
    started = time.perf_counter()
    cfg = load_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    args.repository = repository
    manifest = ExperimentManifest(
        subcommand=args.command,
        config_hash=cfg.config_hash(),
        seed=args.seed,
        tool_version=__version__,
        overrides=dict(parse_override(item) for item in args.set),
    )
    ctx = RunContext(args, cfg, RngStream(args.seed), out, args.threads or default_workers(), cache, manifest)
    summary = args.handler(ctx)
    params = _parameters(args, cfg)
    params.pop("repository", None)
    manifest.parameters = params
    manifest.wall_clock_s = time.perf_counter() - started
    path = manifest.write(out)
    if repository is not None:
        repository.record_manifest(manifest)
    logger.info("%s done in %.1f s; manifest %s", args.command, manifest.wall_clock_s, path)
    return summary


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    try:
        with _fit_store(args.db) as (cache, repository):
            summary = _execute(args, cache, repository)
    except ConfigError as exc:
        logger.error("Invalid configuration: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (VHetNetError, ValueError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "repro-all" and not summary["passed"]:
        print(f"failed checks: {', '.join(summary['failed'])}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
