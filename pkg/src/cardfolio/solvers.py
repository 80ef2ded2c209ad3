"""Search schemes over K-sparse portfolios.

Four subset searches (greedy ranking, Monte Carlo sampling, genetic
algorithm, exact enumeration) plus continuous weight re-optimization on a
fixed support. Every stochastic method is driven by the portable seeded
generator, with the subset phase and the re-optimization phase on separate
sub-streams derived from the run seed, so the two phases never share draws
and each is reproducible in isolation.

Weighting modes:
* equal        - 1/K on the selected support
* dirichlet    - Monte Carlo only: weights drawn per subset from a
                 symmetric Dirichlet(1)
* reoptimized  - two-stage: subset search at equal weights, then Dirichlet
                 local search re-optimizes the winning support's weights

Objectives: "sharpe" (default) maximizes the Sharpe ratio; "scalarized"
maximizes risk_aversion * mu_p - variance (the scalarized mean-variance
objective). The evaluation log holds whichever objective the run optimized.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from cardfolio import __version__
from cardfolio._kernels import backend_name, get_backend
from cardfolio.calibration import FactorCovariance, Universe
from cardfolio.metrics import (
    ConstraintSet,
    Portfolio,
    PortfolioEvaluation,
    capm_sharpe_proxy,
    verify_decision,
)
from cardfolio.randomness import GENERATOR_NAME, Xoshiro256, derive_seed

logger = logging.getLogger(__name__)

ENUM_CEILING_DEFAULT = 10_000_000
REOPT_BUDGET_DEFAULT = 4000
REOPT_STAGES = 3
REOPT_CONC_MULT = 4.0
REOPT_ALPHA_FLOOR = 0.05

_WEIGHTING_ALIASES = {
    "equal": "equal",
    "equal_weight": "equal",
    "dirichlet": "dirichlet",
    "reopt": "reoptimized",
    "reoptimized": "reoptimized",
}


@dataclass(frozen=True)
class SolverConfig:
    """Everything a run needs to be reproduced, minus the universe itself."""

    seed: int = 1
    constraints: ConstraintSet = field(default_factory=lambda: ConstraintSet(k=10))
    weighting: str = "equal"
    n_draws: int | None = None          # Monte Carlo budget
    population: int | None = None       # GA
    generations: int | None = None      # GA
    reopt_budget: int = REOPT_BUDGET_DEFAULT
    objective: str = "sharpe"
    risk_aversion: float = 1.0          # lambda for objective="scalarized"
    score: str = "proxy"                # greedy ranking: proxy | mu_over_sigma
    max_retries: int = 100
    enum_ceiling: int = ENUM_CEILING_DEFAULT

    def normalized_weighting(self) -> str:
        try:
            return _WEIGHTING_ALIASES[self.weighting]
        except KeyError:
            raise ValueError(
                f"unknown weighting {self.weighting!r}; "
                f"use equal, dirichlet, or reoptimized"
            ) from None

    def validate(self, n: int, method: str) -> list[str]:
        errors = self.constraints.validate(n)
        try:
            w = self.normalized_weighting()
        except ValueError as exc:
            errors.append(str(exc))
            w = "equal"
        if self.objective not in ("sharpe", "scalarized"):
            errors.append(f"unknown objective {self.objective!r}")
        if method == "mc":
            if not self.n_draws or self.n_draws < 1:
                errors.append("monte_carlo requires n_draws >= 1")
        if method == "ga":
            if not self.population or self.population < 2:
                errors.append("genetic_algorithm requires population >= 2")
            if not self.generations or self.generations < 1:
                errors.append("genetic_algorithm requires generations >= 1")
            if w == "dirichlet":
                errors.append("genetic_algorithm fitness is defined on equal weights; "
                              "weighting=dirichlet is not meaningful (use mc)")
        if method == "greedy":
            if self.score not in ("proxy", "mu_over_sigma"):
                errors.append(f"unknown greedy score {self.score!r}")
            if w == "dirichlet":
                errors.append("greedy_select is deterministic; weighting=dirichlet "
                              "is not meaningful (use mc)")
        if method == "exact" and w == "dirichlet":
            errors.append("exact_enumerate scans equal-weight subsets; "
                          "weighting=dirichlet is not meaningful (use mc)")
        if self.reopt_budget < 1:
            errors.append("reopt_budget must be >= 1")
        return errors

    def to_dict(self) -> dict:
        c = self.constraints
        return {
            "seed": self.seed,
            "weighting": self.normalized_weighting(),
            "n_draws": self.n_draws,
            "population": self.population,
            "generations": self.generations,
            "reopt_budget": self.reopt_budget,
            "objective": self.objective,
            "risk_aversion": self.risk_aversion,
            "score": self.score,
            "max_retries": self.max_retries,
            "enum_ceiling": self.enum_ceiling,
            "constraints": {
                "k": c.k,
                "weight_cap": list(c.weight_cap) if isinstance(c.weight_cap, tuple) else c.weight_cap,
                "beta_band": list(c.beta_band) if c.beta_band else None,
                "min_return": c.min_return,
                "exempt_indices": list(c.exempt_indices),
                "exempt_cap": c.exempt_cap,
            },
        }


@dataclass(frozen=True)
class SolverRun:
    """One solver execution: configuration, winner, and the evaluation log.

    The canonical JSON serialization excludes wall_time (and the backend
    name), so identical configs produce bit-identical artifacts regardless
    of machine speed or which kernel backend is installed; timing lives in
    the profiling reports instead.
    """

    method: str
    config: SolverConfig
    market: dict
    best_portfolio: Portfolio
    best_eval: PortfolioEvaluation
    all_sharpes: np.ndarray | None
    running_best: tuple[tuple[int, float], ...]
    evaluations: int
    n_skipped: int
    wall_time: float
    backend: str
    subsets_visited: int | None = None
    phase_info: dict = field(default_factory=dict)

    @property
    def best_sharpe(self) -> float:
        return self.best_eval.sharpe

    def canonical_dict(self) -> dict:
        log = None
        if self.all_sharpes is not None:
            log = [None if math.isnan(x) else x for x in self.all_sharpes.tolist()]
        return {
            "toolkit_version": __version__,
            "method": self.method,
            "config": self.config.to_dict(),
            "market": self.market,
            "rng": {
                "algorithm": GENERATOR_NAME,
                "seed": self.config.seed,
                "subset_stream_seed": derive_seed(self.config.seed, 0),
                "reopt_stream_seed": derive_seed(self.config.seed, 1),
            },
            "best": {
                "support": list(self.best_portfolio.support),
                "weights": list(self.best_portfolio.weights),
                **self.best_eval.as_record(),
            },
            "evaluations": self.evaluations,
            "n_skipped": self.n_skipped,
            "subsets_visited": self.subsets_visited,
            "phase_info": self.phase_info,
            "running_best": [[int(e), b] for e, b in self.running_best],
            "evaluation_log": log,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))

    def full_dict(self) -> dict:
        d = self.canonical_dict()
        d["wall_time_seconds"] = self.wall_time
        d["kernel_backend"] = self.backend
        return d


class InfeasibleError(ValueError):
    """Raised when no portfolio satisfying the constraints was found."""


def _market_record(universe: Universe) -> dict:
    m = universe.market
    return {"rf": m.rf, "erp": m.erp, "sigma_m": m.sigma_m, "n_assets": universe.n}


def _caps_array(constraints: ConstraintSet, n: int) -> np.ndarray:
    caps = np.full(n, np.inf)
    if constraints.weight_cap is not None:
        if isinstance(constraints.weight_cap, tuple):
            caps = np.array(constraints.weight_cap, dtype=float)
        else:
            caps[:] = constraints.weight_cap
    for i in constraints.exempt_indices:
        caps[i] = constraints.exempt_cap if constraints.exempt_cap is not None else np.inf
    return caps


def _band(constraints: ConstraintSet) -> tuple[float, float]:
    if constraints.beta_band is None:
        return float("-inf"), float("inf")
    return float(constraints.beta_band[0]), float(constraints.beta_band[1])


def _min_ret(constraints: ConstraintSet) -> float:
    return float("-inf") if constraints.min_return is None else float(constraints.min_return)


def _lam(config: SolverConfig) -> float:
    return config.risk_aversion if config.objective == "scalarized" else float("nan")


def _eval_kernel_order(support, weights, universe: Universe, fc: FactorCovariance) -> PortfolioEvaluation:
    """Evaluate with the kernels' exact accumulation order.

    Used for the reported best so that best_eval.sharpe equals the max of
    the logged values bit-for-bit (numpy dot products can differ in the
    last ulp from sequential accumulation).
    """
    mu = universe.mu
    beta = fc.beta
    resid = fc.resid_var
    mu_p = 0.0
    beta_p = 0.0
    wsq = 0.0
    for i, w in zip(support, weights):
        mu_p += w * mu[i]
        beta_p += w * beta[i]
        wsq += w * w * resid[i]
    var = beta_p * beta_p * fc.var_m + wsq
    rf = universe.market.rf
    if var > 0.0:
        sharpe = (mu_p - rf) / math.sqrt(var)
        sigma_p = math.sqrt(var)
    else:
        sigma_p = 0.0
        excess = mu_p - rf
        sharpe = 0.0 if excess == 0.0 else math.copysign(math.inf, excess)
    return PortfolioEvaluation(mu_p=mu_p, sigma_p=sigma_p, sharpe=sharpe,
                               beta_p=beta_p, variance=var)


def _assert_feasible(portfolio: Portfolio, constraints: ConstraintSet,
                     universe: Universe, fc: FactorCovariance, method: str) -> None:
    r_star = float("-inf")
    if constraints.min_return is not None:
        # small slack: the kernels enforce the return floor with their own
        # accumulation order, which can differ in the last ulp
        r_star = constraints.min_return - 1e-12
    ok, violations = verify_decision(
        portfolio, float("inf"), r_star, constraints, universe, fc
    )
    if not ok:
        raise InfeasibleError(
            f"{method} produced a constraint-violating portfolio: " + "; ".join(violations)
        )


def _config_errors_or_raise(config: SolverConfig, n: int, method: str) -> None:
    errors = config.validate(n, method)
    if errors:
        raise ValueError(f"invalid config for {method}: " + "; ".join(errors))


def feasible_start_weights(support, constraints: ConstraintSet) -> list[float]:
    """Equal weights, water-filled under per-asset caps if necessary.

    Iteratively clips weights at their caps and spreads the remaining mass
    over un-capped assets. Converges whenever the structural feasibility
    check (sum of the K largest caps >= 1) holds.
    """
    k = len(support)
    caps = [constraints.cap_for(i) for i in support]
    caps = [math.inf if c is None else c for c in caps]
    w = [1.0 / k] * k
    if all(wi <= ci + 1e-9 for wi, ci in zip(w, caps)):
        return w
    fixed = [False] * k
    for _ in range(k):
        w = [min(wi, ci) if not fi else wi for wi, ci, fi in zip(w, caps, fixed)]
        fixed = [wi >= ci - 1e-15 for wi, ci in zip(w, caps)]
        deficit = 1.0 - sum(w)
        if deficit <= 1e-12:
            break
        free = [j for j in range(k) if not fixed[j]]
        if not free:
            raise InfeasibleError(
                f"caps on support {tuple(support)} cannot absorb full weight"
            )
        share = deficit / len(free)
        for j in free:
            w[j] += share
    total = sum(w)
    w = [wi / total for wi in w]
    if any(wi > ci + 1e-9 for wi, ci in zip(w, caps)):
        raise InfeasibleError(
            f"could not construct feasible start weights on support {tuple(support)}"
        )
    return w


def _reopt_phase(support, w_init, universe, fc, config, caps, total_evals_before,
                 running_best, prior_best):
    """Run the re-optimization kernel and merge its log into the run record."""
    kern = get_backend()
    band_lo, band_hi = _band(config.constraints)
    out = kern.dirichlet_reopt(
        list(support), list(w_init), config.reopt_budget,
        derive_seed(config.seed, 1),
        universe.mu, fc.beta, fc.resid_var, fc.var_m, universe.market.rf,
        caps, band_lo, band_hi, _min_ret(config.constraints), _lam(config),
        REOPT_STAGES, REOPT_CONC_MULT, REOPT_ALPHA_FLOOR,
    )
    log = np.asarray(out["log"])
    stride = max(1, len(log) // 50)
    best = prior_best
    for pos in range(len(log)):
        v = log[pos]
        if not math.isnan(v) and v > best:
            best = v
        if (pos + 1) % stride == 0 or pos == len(log) - 1:
            if best > float("-inf"):
                running_best.append((total_evals_before + pos + 1, best))
    return out, log


def reoptimize_weights(
    support,
    universe: Universe,
    fc: FactorCovariance,
    constraints: ConstraintSet,
    budget: int = REOPT_BUDGET_DEFAULT,
    seed: int = 1,
    objective: str = "sharpe",
    risk_aversion: float = 1.0,
) -> Portfolio:
    """Maximize the objective over the simplex on a fixed support.

    Dirichlet local search: three stages of budget/3 draws, with the
    concentration parameter scaled up 4x per stage around the running
    incumbent. The starting point (equal weight, water-filled under caps)
    is evaluated first, so the result never scores below it.
    """
    support = tuple(int(i) for i in support)
    structural = constraints.structural_infeasibility(universe.n)
    if structural:
        raise InfeasibleError("; ".join(structural))
    w_init = feasible_start_weights(support, constraints)
    start = Portfolio(support=support, weights=tuple(w_init))
    r_star = float("-inf") if constraints.min_return is None else constraints.min_return
    ok, violations = verify_decision(
        start, float("inf"), r_star, constraints, universe, fc
    )
    if not ok:
        raise InfeasibleError(
            "no feasible starting weights on this support: " + "; ".join(violations)
        )
    caps = _caps_array(constraints, universe.n)
    config = SolverConfig(
        seed=seed, constraints=constraints, reopt_budget=budget,
        objective=objective, risk_aversion=risk_aversion,
    )
    out, _ = _reopt_phase(support, w_init, universe, fc, config, caps, 0, [], float("-inf"))
    portfolio = Portfolio(support=support, weights=tuple(out["best_weights"]))
    _assert_feasible(portfolio, constraints, universe, fc, "reoptimize_weights")
    return portfolio


def greedy_select(universe: Universe, fc: FactorCovariance, config: SolverConfig) -> SolverRun:
    """Deterministic top-K selection by per-asset score.

    score="proxy" ranks by (beta * erp) / sigma, "mu_over_sigma" by mu /
    sigma. Ties break toward the lexicographically smaller asset id. The
    seed only matters when weighting=reoptimized (it drives the weight
    search on the selected support).
    """
    _config_errors_or_raise(config, universe.n, "greedy")
    t0 = time.perf_counter()
    k = config.constraints.k
    market = universe.market
    if config.score == "proxy":
        scores = [capm_sharpe_proxy(a, market) for a in universe.assets]
    else:
        scores = [float(universe.mu[i]) / a.sigma for i, a in enumerate(universe.assets)]
    order = sorted(range(universe.n), key=lambda i: (-scores[i], universe.assets[i].id))
    support = tuple(sorted(order[:k]))

    running_best: list[tuple[int, float]] = []
    weighting = config.normalized_weighting()
    if weighting == "reoptimized":
        caps = _caps_array(config.constraints, universe.n)
        w_init = feasible_start_weights(support, config.constraints)
        out, log = _reopt_phase(support, w_init, universe, fc, config, caps,
                                0, running_best, float("-inf"))
        portfolio = Portfolio(support=support, weights=tuple(out["best_weights"]))
        all_sharpes = log
        evaluations = int(np.sum(~np.isnan(log)))
        n_skipped = int(np.sum(np.isnan(log)))
        phase = {"subset_evals": 0, "reopt_evals": evaluations}
    else:
        portfolio = Portfolio.equal_weight(support)
        ev0 = _eval_kernel_order(portfolio.support, portfolio.weights, universe, fc)
        all_sharpes = np.array([ev0.sharpe if config.objective == "sharpe"
                                else config.risk_aversion * ev0.mu_p - ev0.variance])
        running_best.append((1, float(all_sharpes[0])))
        evaluations = 1
        n_skipped = 0
        phase = {"subset_evals": 1, "reopt_evals": 0}

    best_eval = _eval_kernel_order(portfolio.support, portfolio.weights, universe, fc)
    _assert_feasible(portfolio, config.constraints, universe, fc, "greedy_select")
    return SolverRun(
        method="greedy",
        config=config,
        market=_market_record(universe),
        best_portfolio=portfolio,
        best_eval=best_eval,
        all_sharpes=all_sharpes,
        running_best=tuple(running_best),
        evaluations=evaluations,
        n_skipped=n_skipped,
        wall_time=time.perf_counter() - t0,
        backend=backend_name(),
        phase_info=phase,
    )


def monte_carlo(universe: Universe, fc: FactorCovariance, config: SolverConfig) -> SolverRun:
    """Uniform random K-subsets with simplex weights, best-of-N.

    weighting=equal scores each sampled subset at equal weights;
    dirichlet draws weights from a symmetric Dirichlet(1) per subset
    (cap/band/return violations re-draw the weights up to max_retries
    before skipping the subset); reoptimized runs the equal-weight search
    and then re-optimizes the winning support.
    """
    _config_errors_or_raise(config, universe.n, "mc")
    t0 = time.perf_counter()
    weighting = config.normalized_weighting()
    kern = get_backend()
    caps = _caps_array(config.constraints, universe.n)
    band_lo, band_hi = _band(config.constraints)
    n_draws = config.n_draws
    stride = max(1, n_draws // 200)
    out = kern.mc_search(
        universe.n, config.constraints.k, n_draws, derive_seed(config.seed, 0),
        universe.mu, fc.beta, fc.resid_var, fc.var_m, universe.market.rf,
        weighting == "dirichlet", caps, band_lo, band_hi,
        _min_ret(config.constraints), _lam(config), config.max_retries, stride,
    )
    if not out["best_subset"]:
        raise InfeasibleError(
            f"monte_carlo found no feasible portfolio in {n_draws} draws "
            f"({out['n_skipped']} skipped)"
        )
    subset_log = np.asarray(out["log"])
    running_best = [(int(e), float(b))
                    for e, b in zip(out["checkpoint_evals"], out["checkpoint_best"])]
    evaluations = n_draws - out["n_skipped"]
    n_skipped = out["n_skipped"]
    phase = {"subset_evals": evaluations, "reopt_evals": 0}

    if weighting == "reoptimized":
        support = tuple(out["best_subset"])
        w_init = feasible_start_weights(support, config.constraints)
        r_out, r_log = _reopt_phase(support, w_init, universe, fc, config, caps,
                                    n_draws, running_best, out["best_fitness"])
        portfolio = Portfolio(support=support, weights=tuple(r_out["best_weights"]))
        all_sharpes = np.concatenate([subset_log, r_log])
        r_evals = int(np.sum(~np.isnan(r_log)))
        phase["reopt_evals"] = r_evals
        evaluations += r_evals
        n_skipped += int(np.sum(np.isnan(r_log)))
    else:
        portfolio = Portfolio(support=tuple(out["best_subset"]),
                              weights=tuple(out["best_weights"]))
        all_sharpes = subset_log

    best_eval = _eval_kernel_order(portfolio.support, portfolio.weights, universe, fc)
    _assert_feasible(portfolio, config.constraints, universe, fc, "monte_carlo")
    return SolverRun(
        method="mc",
        config=config,
        market=_market_record(universe),
        best_portfolio=portfolio,
        best_eval=best_eval,
        all_sharpes=all_sharpes,
        running_best=tuple(running_best),
        evaluations=evaluations,
        n_skipped=n_skipped,
        wall_time=time.perf_counter() - t0,
        backend=backend_name(),
        phase_info=phase,
    )


def _ga_feasible(support, caps, band_lo, band_hi, min_ret, universe, fc) -> bool:
    k = len(support)
    w = 1.0 / k
    if np.any(w > caps[support] + 1e-9):
        return False
    if band_lo == float("-inf") and band_hi == float("inf") and min_ret == float("-inf"):
        return True
    beta_p = float(np.mean(fc.beta[support]))
    mu_p = float(np.mean(universe.mu[support]))
    return band_lo <= beta_p <= band_hi and mu_p >= min_ret


def genetic_algorithm(universe: Universe, fc: FactorCovariance, config: SolverConfig) -> SolverRun:
    """GA over K-of-n subsets with repair.

    Chromosomes are index sets of size exactly K. Tournament selection of
    size 2, uniform crossover on the binary membership vector, repair to
    exactly K ones by uniform random add/remove, then swap mutation (one
    selected asset moves to a random unselected slot) with probability 1/K
    per child. Elitism carries the single best chromosome forward. Fitness
    is the equal-weight objective on the support; infeasible chromosomes
    score -inf and log NaN.
    """
    _config_errors_or_raise(config, universe.n, "ga")
    t0 = time.perf_counter()
    n = universe.n
    k = config.constraints.k
    pop_size = config.population
    gens = config.generations
    kern = get_backend()
    caps = _caps_array(config.constraints, universe.n)
    band_lo, band_hi = _band(config.constraints)
    min_ret = _min_ret(config.constraints)
    lam = _lam(config)
    rng = Xoshiro256(derive_seed(config.seed, 0))

    mu_arr, beta_arr, resid_arr = universe.mu, fc.beta, fc.resid_var

    def fitness(support: np.ndarray) -> float:
        if not _ga_feasible(support, caps, band_lo, band_hi, min_ret, universe, fc):
            return float("-inf")
        return kern.eval_equal_weight(support, mu_arr, beta_arr, resid_arr,
                                      fc.var_m, universe.market.rf, lam)

    scratch = list(range(n))
    population: list[np.ndarray] = []
    for _ in range(pop_size):
        rng.partial_shuffle(scratch, k)
        population.append(np.array(sorted(scratch[:k]), dtype=np.int64))

    log: list[float] = []
    running_best: list[tuple[int, float]] = []
    fits = []
    for chrom in population:
        f = fitness(chrom)
        fits.append(f)
        log.append(f if f > float("-inf") else float("nan"))
    best_idx = max(range(pop_size), key=lambda i: (fits[i], -i))
    best_fit = fits[best_idx]
    best_chrom = population[best_idx].copy()
    if best_fit > float("-inf"):
        running_best.append((len(log), best_fit))

    mut_prob = 1.0 / k
    for _gen in range(gens):
        elite = best_chrom.copy()
        elite_fit = best_fit
        children: list[np.ndarray] = [elite]
        child_fits: list[float] = [elite_fit]
        while len(children) < pop_size:
            # tournament selection, size 2
            parents = []
            for _ in range(2):
                a = rng.below(pop_size)
                b = rng.below(pop_size)
                parents.append(population[b] if fits[b] > fits[a] else population[a])
            pa, pb = parents
            in_a = np.zeros(n, dtype=bool)
            in_a[pa] = True
            in_b = np.zeros(n, dtype=bool)
            in_b[pb] = True
            child_mask = np.zeros(n, dtype=bool)
            for gene in range(n):
                take_a = rng.below(2) == 0
                child_mask[gene] = in_a[gene] if take_a else in_b[gene]
            ones = [int(i) for i in np.nonzero(child_mask)[0]]
            zeros = [int(i) for i in np.nonzero(~child_mask)[0]]
            # repair to exactly k ones by uniform add/remove
            while len(ones) > k:
                j = rng.below(len(ones))
                zeros.append(ones.pop(j))
            while len(ones) < k:
                j = rng.below(len(zeros))
                ones.append(zeros.pop(j))
            if rng.uniform() < mut_prob:
                j = rng.below(len(ones))
                m = rng.below(len(zeros))
                ones[j], zeros[m] = zeros[m], ones[j]
            child = np.array(sorted(ones), dtype=np.int64)
            f = fitness(child)
            log.append(f if f > float("-inf") else float("nan"))
            children.append(child)
            child_fits.append(f)
            if f > best_fit:
                best_fit = f
                best_chrom = child.copy()
        population = children
        fits = child_fits
        if best_fit > float("-inf"):
            running_best.append((len(log), best_fit))

    if best_fit == float("-inf"):
        raise InfeasibleError(
            f"genetic_algorithm found no feasible subset in {len(log)} evaluations"
        )

    support = tuple(int(i) for i in best_chrom)
    evaluations = len(log)
    all_sharpes = np.array(log)
    n_skipped = int(np.sum(np.isnan(all_sharpes)))
    phase = {"subset_evals": evaluations - n_skipped, "reopt_evals": 0}

    if config.normalized_weighting() == "reoptimized":
        w_init = feasible_start_weights(support, config.constraints)
        r_out, r_log = _reopt_phase(support, w_init, universe, fc, config, caps,
                                    evaluations, running_best, best_fit)
        portfolio = Portfolio(support=support, weights=tuple(r_out["best_weights"]))
        all_sharpes = np.concatenate([all_sharpes, r_log])
        r_evals = int(np.sum(~np.isnan(r_log)))
        phase["reopt_evals"] = r_evals
        evaluations += r_evals
        n_skipped += int(np.sum(np.isnan(r_log)))
    else:
        portfolio = Portfolio.equal_weight(support)

    best_eval = _eval_kernel_order(portfolio.support, portfolio.weights, universe, fc)
    _assert_feasible(portfolio, config.constraints, universe, fc, "genetic_algorithm")
    return SolverRun(
        method="ga",
        config=config,
        market=_market_record(universe),
        best_portfolio=portfolio,
        best_eval=best_eval,
        all_sharpes=all_sharpes,
        running_best=tuple(running_best),
        evaluations=evaluations,
        n_skipped=n_skipped,
        wall_time=time.perf_counter() - t0,
        backend=backend_name(),
        phase_info=phase,
    )


def exact_enumerate(universe: Universe, fc: FactorCovariance, config: SolverConfig) -> SolverRun:
    """Visit every K-subset in lexicographic order; the exact optimum.

    Refuses instances with C(n,K) above config.enum_ceiling. Infeasible
    subsets count as visited. Ties keep the lexicographically first argmax.
    """
    _config_errors_or_raise(config, universe.n, "exact")
    n, k = universe.n, config.constraints.k
    total = math.comb(n, k)
    if total > config.enum_ceiling:
        raise ValueError(
            f"C({n},{k}) = {total:,} exceeds the enumeration ceiling "
            f"{config.enum_ceiling:,}; reduce the instance or raise enum_ceiling"
        )
    t0 = time.perf_counter()
    kern = get_backend()
    caps = _caps_array(config.constraints, universe.n)
    band_lo, band_hi = _band(config.constraints)
    store_log = total <= 1_000_000
    stride = max(1, total // 200)
    out = kern.enumerate_search(
        n, k, universe.mu, fc.beta, fc.resid_var, fc.var_m, universe.market.rf,
        caps, band_lo, band_hi, _min_ret(config.constraints), _lam(config),
        store_log, stride,
    )
    if not out["best_subset"]:
        raise InfeasibleError("no feasible subset exists under the constraints")
    running_best = [(int(e), float(b))
                    for e, b in zip(out["checkpoint_evals"], out["checkpoint_best"])]
    evaluations = out["count"] - out["n_skipped"]
    n_skipped = out["n_skipped"]
    phase = {"subset_evals": evaluations, "reopt_evals": 0}
    all_sharpes = np.asarray(out["log"]) if out["log"] is not None else None

    if config.normalized_weighting() == "reoptimized":
        support = tuple(out["best_subset"])
        w_init = feasible_start_weights(support, config.constraints)
        r_out, r_log = _reopt_phase(support, w_init, universe, fc, config, caps,
                                    out["count"], running_best, out["best_fitness"])
        portfolio = Portfolio(support=support, weights=tuple(r_out["best_weights"]))
        if all_sharpes is not None:
            all_sharpes = np.concatenate([all_sharpes, r_log])
        r_evals = int(np.sum(~np.isnan(r_log)))
        phase["reopt_evals"] = r_evals
        evaluations += r_evals
        n_skipped += int(np.sum(np.isnan(r_log)))
    else:
        portfolio = Portfolio(support=tuple(out["best_subset"]),
                              weights=tuple(out["best_weights"]))

    best_eval = _eval_kernel_order(portfolio.support, portfolio.weights, universe, fc)
    _assert_feasible(portfolio, config.constraints, universe, fc, "exact_enumerate")
    return SolverRun(
        method="exact",
        config=config,
        market=_market_record(universe),
        best_portfolio=portfolio,
        best_eval=best_eval,
        all_sharpes=all_sharpes,
        running_best=tuple(running_best),
        evaluations=evaluations,
        n_skipped=n_skipped,
        wall_time=time.perf_counter() - t0,
        backend=backend_name(),
        subsets_visited=out["count"],
        phase_info=phase,
    )


METHODS = {
    "greedy": greedy_select,
    "mc": monte_carlo,
    "ga": genetic_algorithm,
    "exact": exact_enumerate,
}


def solve(method: str, universe: Universe, fc: FactorCovariance, config: SolverConfig) -> SolverRun:
    """Dispatch to a search scheme by name: greedy | mc | ga | exact."""
    try:
        fn = METHODS[method]
    except KeyError:
        raise ValueError(
            f"unknown method {method!r}; expected one of {sorted(METHODS)}"
        ) from None
    return fn(universe, fc, config)


def with_seed(config: SolverConfig, seed: int) -> SolverConfig:
    """Copy of the config with a different seed (campaign plumbing)."""
    return replace(config, seed=seed)
