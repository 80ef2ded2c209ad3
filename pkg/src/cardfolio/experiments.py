"""Seeded multi-run campaigns and the reporting built on top of them.

A campaign runs one solver configuration across a set of seeds and reduces
the per-run results to distributional statistics (quantiles over per-run
best values, mean/std of per-run medians and runtimes). Everything higher
level is composition: effort grids re-run campaigns across budgets,
sensitivity sweeps re-run them across market/constraint scenarios, the
exact benchmark compares heuristics against the enumerated optimum, and
the runtime profile times each method under a recorded environment.

Quantiles use linear interpolation between order statistics throughout;
standard deviations are sample (ddof=1) with the single-observation case
pinned to 0.0.
"""

from __future__ import annotations

import dataclasses
import os
import platform
import sys
from dataclasses import dataclass, field

import numpy as np

from cardfolio._kernels import backend_name
from cardfolio.calibration import (
    AssetRecord,
    FactorCovariance,
    MarketParams,
    Universe,
)
from cardfolio.diagnostics import jaccard_overlap
from cardfolio.metrics import Portfolio, evaluate
from cardfolio.randomness import Xoshiro256
from cardfolio.solvers import SolverConfig, SolverRun, solve, with_seed

DEFAULT_SEEDS = tuple(range(1, 11))


def _sample_std(values) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(np.asarray(values, dtype=float), ddof=1))


@dataclass(frozen=True)
class RunDistribution:
    """Cross-seed summary of one method under one configuration.

    Quantile fields describe the distribution of per-run best values;
    median_mean/median_std describe the per-run medians of the evaluation
    logs (the two-level reporting convention: how good is the winner, and
    how good is a typical draw).
    """

    method: str
    seeds: tuple[int, ...]
    per_seed: tuple[dict, ...]
    best: float
    q05: float
    q25: float
    median: float
    q75: float
    q95: float
    iqr: float
    best_mean: float
    best_std: float
    median_mean: float
    median_std: float
    runtime_mean: float
    runtime_std: float
    runs: tuple[SolverRun, ...] = field(repr=False, compare=False)

    def as_record(self, include_timing: bool = True) -> dict:
        """Plain-dict summary; with include_timing=False the record is
        bit-for-bit reproducible across re-executions of the campaign."""
        per_seed = list(self.per_seed)
        if not include_timing:
            per_seed = [{k: v for k, v in p.items() if k != "wall_time_seconds"}
                        for p in per_seed]
        record = {
            "method": self.method,
            "seeds": list(self.seeds),
            "per_seed": per_seed,
            "best": self.best,
            "q05": self.q05,
            "q25": self.q25,
            "median": self.median,
            "q75": self.q75,
            "q95": self.q95,
            "iqr": self.iqr,
            "best_mean": self.best_mean,
            "best_std": self.best_std,
            "median_mean": self.median_mean,
            "median_std": self.median_std,
        }
        if include_timing:
            record["runtime_mean"] = self.runtime_mean
            record["runtime_std"] = self.runtime_std
        return record


def run_campaign(
    method: str,
    universe: Universe,
    fc: FactorCovariance,
    base_config: SolverConfig,
    seeds=DEFAULT_SEEDS,
) -> RunDistribution:
    """One solver run per seed, reduced to distribution statistics.

    Results are keyed and ordered by seed, so a permuted seed list yields
    identical statistics and an identically ordered artifact.
    """
    seeds = tuple(int(s) for s in seeds)
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"seeds must be distinct, got {seeds}")
    runs = []
    for seed in sorted(seeds):
        try:
            runs.append(solve(method, universe, fc, with_seed(base_config, seed)))
        except Exception as exc:
            raise RuntimeError(f"campaign run failed at seed {seed}: {exc}") from exc

    bests = [r.best_sharpe for r in runs]
    medians = []
    per_seed = []
    for r in runs:
        if r.all_sharpes is not None and np.any(~np.isnan(r.all_sharpes)):
            run_median = float(np.nanquantile(r.all_sharpes, 0.5))
        else:
            run_median = r.best_sharpe
        medians.append(run_median)
        per_seed.append({
            "seed": r.config.seed,
            "best_sharpe": r.best_sharpe,
            "median_sharpe": run_median,
            "evaluations": r.evaluations,
            "n_skipped": r.n_skipped,
            "wall_time_seconds": r.wall_time,
            "support": list(r.best_portfolio.support),
        })
    runtimes = [r.wall_time for r in runs]
    q = np.quantile(np.asarray(bests, dtype=float), [0.05, 0.25, 0.5, 0.75, 0.95])
    return RunDistribution(
        method=method,
        seeds=tuple(sorted(seeds)),
        per_seed=tuple(per_seed),
        best=float(max(bests)),
        q05=float(q[0]),
        q25=float(q[1]),
        median=float(q[2]),
        q75=float(q[3]),
        q95=float(q[4]),
        iqr=float(q[3] - q[1]),
        best_mean=float(np.mean(bests)),
        best_std=_sample_std(bests),
        median_mean=float(np.mean(medians)),
        median_std=_sample_std(medians),
        runtime_mean=float(np.mean(runtimes)),
        runtime_std=_sample_std(runtimes),
        runs=tuple(runs),
    )


@dataclass(frozen=True)
class EffortRow:
    budget: int
    best_mean: float
    best_std: float
    median_mean: float
    median_std: float
    runtime_mean: float
    runtime_std: float
    distribution: RunDistribution = field(repr=False, compare=False)


def effort_grid(
    method: str,
    universe: Universe,
    fc: FactorCovariance,
    budgets,
    seeds=DEFAULT_SEEDS,
    base_config: SolverConfig | None = None,
) -> list[EffortRow]:
    """Campaigns across an increasing budget ladder, seed-paired.

    The budget maps to draws for Monte Carlo and to generations for the
    GA. Because every run at a larger budget extends the same generator
    stream, per-seed best values are non-decreasing along the ladder.
    """
    budgets = [int(b) for b in budgets]
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError(f"budgets must be strictly increasing, got {budgets}")
    if method not in ("mc", "ga"):
        raise ValueError(f"effort_grid applies to budgeted methods (mc, ga), got {method!r}")
    if base_config is None:
        raise ValueError("effort_grid requires a base_config carrying constraints")
    rows = []
    for budget in budgets:
        if method == "mc":
            cfg = dataclasses.replace(base_config, n_draws=budget)
        else:
            cfg = dataclasses.replace(base_config, generations=budget)
        dist = run_campaign(method, universe, fc, cfg, seeds)
        rows.append(EffortRow(
            budget=budget,
            best_mean=dist.best_mean,
            best_std=dist.best_std,
            median_mean=dist.median_mean,
            median_std=dist.median_std,
            runtime_mean=dist.runtime_mean,
            runtime_std=dist.runtime_std,
            distribution=dist,
        ))
    return rows


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and R^2 of log(y) against log(x)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise ValueError("need at least two points for a slope")
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r_squared


def reduced_instance(universe: Universe, fc: FactorCovariance, n: int):
    """First n assets in input order, with the matching covariance block."""
    if not 1 <= n <= universe.n:
        raise ValueError(f"reduced size {n} outside [1, {universe.n}]")
    u2 = Universe(
        assets=universe.assets[:n],
        market=universe.market,
        audit=universe.audit + (f"reduced to first {n} assets by input order",),
    )
    return u2, fc.restrict(list(range(n)))


@dataclass(frozen=True)
class GapRow:
    label: str
    method: str
    best_sharpe: float
    gap_percent: float
    support: tuple[int, ...]


@dataclass(frozen=True)
class GapTable:
    exact_sharpe: float
    exact_support: tuple[int, ...]
    subsets_visited: int
    rows: tuple[GapRow, ...]

    def as_record(self) -> dict:
        return {
            "exact_sharpe": self.exact_sharpe,
            "exact_support": list(self.exact_support),
            "subsets_visited": self.subsets_visited,
            "rows": [
                {
                    "label": r.label,
                    "method": r.method,
                    "best_sharpe": r.best_sharpe,
                    "gap_percent": r.gap_percent,
                    "support": list(r.support),
                }
                for r in self.rows
            ],
        }


def exact_benchmark(
    universe: Universe,
    fc: FactorCovariance,
    k: int,
    heuristic_configs: dict[str, tuple[str, SolverConfig]],
) -> GapTable:
    """Enumerated ground truth vs heuristics, with percentage gaps.

    Gap = 100 * (exact - heuristic) / exact, so 0 means the heuristic
    found the optimum. The comparison is on equal-weight subset quality;
    configs requesting other weightings are rejected because the gap
    would mix selection quality with weight optimization.
    """
    if not heuristic_configs:
        raise ValueError("at least one heuristic config is required")
    for label, (method, cfg) in heuristic_configs.items():
        if cfg.normalized_weighting() != "equal":
            raise ValueError(
                f"benchmark config {label!r} uses weighting="
                f"{cfg.normalized_weighting()!r}; gaps are defined against the "
                f"equal-weight optimum"
            )
        if cfg.constraints.k != k:
            raise ValueError(
                f"benchmark config {label!r} has k={cfg.constraints.k}, expected {k}"
            )
    first_cfg = next(iter(heuristic_configs.values()))[1]
    exact_cfg = SolverConfig(constraints=first_cfg.constraints)
    exact_run = solve("exact", universe, fc, exact_cfg)
    rows = []
    for label, (method, cfg) in heuristic_configs.items():
        run = solve(method, universe, fc, cfg)
        gap = 100.0 * (exact_run.best_sharpe - run.best_sharpe) / exact_run.best_sharpe
        rows.append(GapRow(
            label=label,
            method=method,
            best_sharpe=run.best_sharpe,
            gap_percent=gap,
            support=run.best_portfolio.support,
        ))
    return GapTable(
        exact_sharpe=exact_run.best_sharpe,
        exact_support=exact_run.best_portfolio.support,
        subsets_visited=exact_run.subsets_visited,
        rows=tuple(rows),
    )


@dataclass(frozen=True)
class SensitivityScenario:
    """A named perturbation of the baseline problem.

    Market shifts rebuild expected returns from the market line (betas and
    the covariance never depend on rf/erp, so the risk model is shared);
    k and cap override the constraint set. The baseline objects are never
    modified.
    """

    name: str
    k: int | None = None
    rf_shift: float | None = None
    erp_shift: float | None = None
    cap: float | None = None

    def apply(self, universe: Universe, config: SolverConfig):
        market = universe.market
        if self.rf_shift or self.erp_shift:
            market = dataclasses.replace(
                market,
                rf=market.rf + (self.rf_shift or 0.0),
                erp=market.erp + (self.erp_shift or 0.0),
            )
            universe = Universe(assets=universe.assets, market=market,
                                audit=universe.audit)
        constraints = config.constraints
        if self.k is not None:
            constraints = dataclasses.replace(constraints, k=self.k)
        if self.cap is not None:
            constraints = dataclasses.replace(constraints, weight_cap=self.cap)
        return universe, dataclasses.replace(config, constraints=constraints)


@dataclass(frozen=True)
class ScenarioOutcome:
    scenario: SensitivityScenario
    distribution: RunDistribution
    best_support: tuple[int, ...]


@dataclass(frozen=True)
class SweepResult:
    outcomes: tuple[ScenarioOutcome, ...]
    overlap_labels: tuple[str, ...]
    overlap_matrix: tuple[tuple[float, ...], ...]

    def as_record(self) -> dict:
        return {
            "scenarios": [
                {
                    "name": o.scenario.name,
                    "overrides": {
                        key: getattr(o.scenario, key)
                        for key in ("k", "rf_shift", "erp_shift", "cap")
                        if getattr(o.scenario, key) is not None
                    },
                    "best_support": list(o.best_support),
                    "distribution": o.distribution.as_record(),
                }
                for o in self.outcomes
            ],
            "overlap_labels": list(self.overlap_labels),
            "overlap_matrix": [list(row) for row in self.overlap_matrix],
        }


def sensitivity_sweep(
    universe: Universe,
    fc: FactorCovariance,
    scenarios,
    method: str,
    base_config: SolverConfig,
    seeds=DEFAULT_SEEDS,
) -> SweepResult:
    """Run the same method across scenarios and compare winning supports."""
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ValueError(f"scenario names must be unique, got {names}")
    outcomes = []
    for scenario in scenarios:
        u2, cfg2 = scenario.apply(universe, base_config)
        dist = run_campaign(method, u2, fc, cfg2, seeds)
        best_run = max(dist.runs, key=lambda r: (r.best_sharpe, -r.config.seed))
        outcomes.append(ScenarioOutcome(
            scenario=scenario,
            distribution=dist,
            best_support=best_run.best_portfolio.support,
        ))
    matrix = tuple(
        tuple(jaccard_overlap(a.best_support, b.best_support) for b in outcomes)
        for a in outcomes
    )
    return SweepResult(
        outcomes=tuple(outcomes),
        overlap_labels=tuple(names),
        overlap_matrix=matrix,
    )


def environment_probe() -> dict:
    """Where the timings came from; embedded in every profile artifact."""
    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
        "kernel_backend": backend_name(),
    }


@dataclass(frozen=True)
class ProfileRow:
    method: str
    runtime_mean: float
    runtime_std: float
    evaluations_mean: float
    best_mean: float


@dataclass(frozen=True)
class ProfileReport:
    rows: tuple[ProfileRow, ...]
    environment: dict

    def as_record(self) -> dict:
        return {
            "environment": self.environment,
            "rows": [dataclasses.asdict(r) for r in self.rows],
        }


def runtime_profile(
    universe: Universe,
    fc: FactorCovariance,
    method_configs: dict[str, SolverConfig],
    seeds=DEFAULT_SEEDS,
) -> ProfileReport:
    """Wall-time comparison across methods under one recorded environment."""
    rows = []
    for method, cfg in method_configs.items():
        dist = run_campaign(method, universe, fc, cfg, seeds)
        rows.append(ProfileRow(
            method=method,
            runtime_mean=dist.runtime_mean,
            runtime_std=dist.runtime_std,
            evaluations_mean=float(np.mean([r.evaluations for r in dist.runs])),
            best_mean=dist.best_mean,
        ))
    return ProfileReport(rows=tuple(rows), environment=environment_probe())


def make_random_universe(
    n: int,
    seed: int,
    rf: float = 0.0397,
    erp: float = 0.0423,
    sigma_m: float = 0.17,
) -> Universe:
    """Synthetic calibration for data-free benchmarks and profiling.

    Betas are uniform on [0.3, 1.8]. Volatilities are drawn so that each
    asset keeps strictly positive residual variance (sigma is at least 5
    percent above beta * sigma_m), capped at 0.75 annualized; this keeps
    the single-index structure nondegenerate on every instance.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = Xoshiro256(seed)
    assets = []
    for i in range(n):
        beta = 0.3 + 1.5 * rng.uniform()
        sigma_floor = max(0.15, 1.05 * beta * sigma_m)
        sigma = sigma_floor + (0.75 - sigma_floor) * rng.uniform()
        firms = 1 + rng.below(60)
        assets.append(AssetRecord(
            id=f"syn{i:03d}", name=f"synthetic sector {i}", firms=firms,
            beta=beta, sigma=sigma,
        ))
    return Universe(
        assets=tuple(assets),
        market=MarketParams(rf=rf, erp=erp, sigma_m=sigma_m),
        audit=(f"synthetic universe: n={n}, seed={seed}",),
    )


def frontier_cloud(
    universe: Universe,
    fc: FactorCovariance,
    k: int,
    n_draws: int,
    seed: int,
    weighting: str = "dirichlet",
):
    """Random K-sparse portfolios as (sigma_p, mu_p, sharpe) triples.

    The raw material for risk/return scatter plots: uniform random
    supports with equal or Dirichlet(1) weights, evaluated under the
    calibrated model. Returns three aligned arrays.
    """
    if weighting not in ("equal", "dirichlet"):
        raise ValueError(f"frontier weighting must be equal or dirichlet, got {weighting!r}")
    if not 1 <= k <= universe.n:
        raise ValueError(f"k={k} outside [1, {universe.n}]")
    rng = Xoshiro256(seed)
    idx = list(range(universe.n))
    sigmas = np.empty(n_draws)
    mus = np.empty(n_draws)
    sharpes = np.empty(n_draws)
    for d in range(n_draws):
        rng.partial_shuffle(idx, k)
        support = tuple(sorted(idx[:k]))
        if weighting == "equal":
            p = Portfolio.equal_weight(support)
        else:
            p = Portfolio(support=support, weights=tuple(rng.dirichlet_uniform(k)))
        ev = evaluate(p, universe, fc)
        sigmas[d] = ev.sigma_p
        mus[d] = ev.mu_p
        sharpes[d] = ev.sharpe
    return sigmas, mus, sharpes
