"""Command-line entry points.

One executable, ten subcommands: calibrate, solve, frontier, diagnose,
option, bump, sweep, benchmark, profile, export. Every command accepts
--config (JSON run configuration), and flags always win over config
values. Exit code 0 on success; handled failures print a single
"cardfolio: error: ..." line to stderr and exit nonzero.

Tabular results go to stdout as comma-delimited text at full float
precision; human-readable summaries round for display. JSON report files
embed the parameters that produced them.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

import numpy as np

from . import __version__
from .calibration import (
    AssetRecord,
    MarketParams,
    Universe,
    build_factor_covariance,
    correlation_from_covariance,
    materialize_dense,
    psd_gate,
)
from .derivatives import OptionSpec, bs_call_price, bump_test, embed_option, option_grid
from .diagnostics import cluster_order, dependence_report, top_by_firms
from .experiments import (
    SensitivityScenario,
    environment_probe,
    exact_benchmark,
    frontier_cloud,
    make_random_universe,
    reduced_instance,
    runtime_profile,
    sensitivity_sweep,
)
from .io import (
    RunConfig,
    export_artifacts,
    format_number,
    load_config,
    read_universe_csv,
)
from .metrics import ConstraintSet
from .solvers import InfeasibleError, SolverConfig, solve

EXIT_OK = 0
EXIT_ERROR = 1


class CLIError(Exception):
    """A user-facing failure: bad flags, missing inputs, impossible request."""


# ---------------------------------------------------------------------------
# small parsers for flag values
# ---------------------------------------------------------------------------


def parse_seeds(text: str) -> tuple[int, ...]:
    """Accept '1..10' (inclusive range) or '1,2,3' or a single integer."""
    text = text.strip()
    if ".." in text:
        lo_text, _, hi_text = text.partition("..")
        lo, hi = int(lo_text), int(hi_text)
        if hi < lo:
            raise CLIError(f"seed range {text!r} is empty")
        return tuple(range(lo, hi + 1))
    return tuple(int(part) for part in text.split(",") if part.strip())


def parse_float_list(text: str) -> tuple[float, ...]:
    values = tuple(float(part) for part in text.split(",") if part.strip())
    if not values:
        raise CLIError(f"expected a comma-separated list of numbers, got {text!r}")
    return values


def parse_band(text: str) -> tuple[float, float]:
    parts = parse_float_list(text)
    if len(parts) != 2:
        raise CLIError(f"beta band needs exactly two numbers lo,hi; got {text!r}")
    return parts[0], parts[1]


def parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise CLIError(f"expected true or false, got {text!r}")


GRID_KEYS = {"k": int, "cap": float, "rf_shift": float, "erp_shift": float}


def parse_grid(text: str) -> tuple[str, tuple]:
    """'k=6,8,10' -> ('k', (6, 8, 10)). Keys: k, cap, rf_shift, erp_shift."""
    key, sep, values_text = text.partition("=")
    key = key.strip()
    if not sep or key not in GRID_KEYS:
        raise CLIError(
            f"grid must look like k=6,8,10 with key in {sorted(GRID_KEYS)}; got {text!r}"
        )
    cast = GRID_KEYS[key]
    values = tuple(cast(part) for part in values_text.split(",") if part.strip())
    if not values:
        raise CLIError(f"grid {text!r} lists no values")
    return key, values


# ---------------------------------------------------------------------------
# shared resolution: config file, market, universe
# ---------------------------------------------------------------------------


def _load_config_arg(args) -> RunConfig | None:
    path = getattr(args, "config", None)
    return load_config(path) if path else None


def _resolve_market(args, config: RunConfig | None) -> MarketParams | None:
    """Flags override config; returns None if rf/erp are nowhere to be found."""
    base = config.market if config is not None else None
    rf = args.rf if getattr(args, "rf", None) is not None else (base.rf if base else None)
    erp = (
        args.erp
        if getattr(args, "erp", None) is not None
        else (base.erp if base else None)
    )
    sigma_m = (
        args.sigma_m
        if getattr(args, "sigma_m", None) is not None
        else (base.sigma_m if base else None)
    )
    if rf is None or erp is None:
        return None
    return MarketParams(rf=float(rf), erp=float(erp), sigma_m=sigma_m)


def _require_market(args, config: RunConfig | None) -> MarketParams:
    market = _resolve_market(args, config)
    if market is None:
        raise CLIError(
            "market parameters are required: pass --rf and --erp "
            "(and --sigma-m for covariance work) or point --config at a file"
        )
    return market


def _resolve_universe(args, config: RunConfig | None) -> Universe | None:
    data_path = getattr(args, "data", None) or (
        config.data_path if config is not None else None
    )
    if data_path is None:
        return None
    market = _require_market(args, config)
    units = getattr(args, "units", None) or (config.units if config else "decimal")
    return read_universe_csv(data_path, market, units=units)


def _require_universe(args, config: RunConfig | None) -> Universe:
    universe = _resolve_universe(args, config)
    if universe is None:
        raise CLIError(
            "an asset table is required: pass --data universe.csv "
            "or set data_path in the config"
        )
    return universe


def _constraints_from_args(args, config: RunConfig | None) -> ConstraintSet:
    base = config.constraints if config is not None else ConstraintSet(k=10)
    replacements = {}
    if getattr(args, "k", None) is not None:
        replacements["k"] = args.k
    if getattr(args, "cap", None) is not None:
        replacements["weight_cap"] = args.cap
    if getattr(args, "beta_band", None) is not None:
        replacements["beta_band"] = parse_band(args.beta_band)
    if getattr(args, "min_return", None) is not None:
        replacements["min_return"] = args.min_return
    return dataclasses.replace(base, **replacements) if replacements else base


def _solver_config_from_args(
    args, config: RunConfig | None, seed: int | None = None
) -> SolverConfig:
    constraints = _constraints_from_args(args, config)

    def pick(flag, fallback):
        value = getattr(args, flag, None)
        if value is not None:
            return value
        return getattr(config, fallback) if config is not None else None

    chosen_seed = seed
    if chosen_seed is None:
        chosen_seed = args.seed if getattr(args, "seed", None) is not None else None
    if chosen_seed is None:
        chosen_seed = config.seeds[0] if config is not None else 1

    kwargs = {
        "seed": int(chosen_seed),
        "constraints": constraints,
        "weighting": pick("weighting", "weighting") or "equal",
        "n_draws": pick("draws", "n_draws"),
        "population": pick("pop", "population"),
        "generations": pick("gens", "generations"),
        "objective": pick("objective", "objective") or "sharpe",
        "score": pick("score", "score") or "proxy",
    }
    reopt = pick("reopt_budget", "reopt_budget")
    if reopt is not None:
        kwargs["reopt_budget"] = int(reopt)
    lam = pick("risk_aversion", "risk_aversion")
    if lam is not None:
        kwargs["risk_aversion"] = float(lam)
    return SolverConfig(**kwargs)


def _emit_table(headers, rows, out_path=None) -> None:
    """Comma-delimited table to stdout, or to a file when a path is given."""

    def write_to(stream):
        writer = csv.writer(stream)
        writer.writerow(headers)
        for row in rows:
            writer.writerow(
                [format_number(c) if isinstance(c, float) else c for c in row]
            )

    if out_path:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            write_to(fh)
        print(f"wrote {out_path}")
    else:
        write_to(sys.stdout)


def _write_json_report(out_path, payload) -> None:
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out_path}")


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def cmd_calibrate(args) -> int:
    config = _load_config_arg(args)
    universe = _require_universe(args, config)
    print(f"assets: {universe.n}")
    mu = universe.mu
    print(
        f"expected returns: min {min(mu):.6f}  max {max(mu):.6f} "
        f"(rf={universe.market.rf}, erp={universe.market.erp})"
    )
    for note in universe.audit:
        print(f"audit: {note}")
    if universe.market.sigma_m is None:
        print("sigma_m not set: covariance model skipped")
        if args.out:
            raise CLIError("exporting matrices requires --sigma-m")
        return EXIT_OK
    fc = build_factor_covariance(universe)
    if fc.clipped_ids:
        print(f"residual variance clipped at zero for: {', '.join(fc.clipped_ids)}")
    dense = materialize_dense(fc)
    _, min_eig, _ = psd_gate(dense)
    print(f"covariance: {universe.n}x{universe.n}, smallest eigenvalue {min_eig:.3e}")
    if args.out:
        manifest = export_artifacts(universe, fc, (), args.out, config=config)
        print(f"wrote {len(manifest['files']) + 1} files to {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    config = _load_config_arg(args)
    universe = _require_universe(args, config)
    fc = build_factor_covariance(universe)
    method = args.method or (config.method if config else None)
    if not method:
        raise CLIError("--method is required (greedy, mc, ga, or exact)")
    solver_config = _solver_config_from_args(args, config)
    run = solve(method, universe, fc, solver_config)

    if args.json:
        print(run.canonical_json())
    else:
        ev = run.best_eval
        print(
            f"method={run.method} weighting={solver_config.normalized_weighting()} "
            f"seed={solver_config.seed}"
        )
        print(
            f"best sharpe {ev.sharpe:.6f}  mu {ev.mu_p:.6f}  sigma {ev.sigma_p:.6f}  "
            f"beta {ev.beta_p:.4f}"
        )
        holdings = ", ".join(
            f"{universe.ids[i]}={w:.4f}"
            for i, w in zip(run.best_portfolio.support, run.best_portfolio.weights)
        )
        print(f"holdings: {holdings}")
        skipped = f" (skipped {run.n_skipped})" if run.n_skipped else ""
        print(f"evaluations: {run.evaluations}{skipped}")
        print(f"wall time: {run.wall_time:.4f} s  backend: {run.backend}")
    if args.out:
        manifest = export_artifacts(universe, fc, (run,), args.out, config=config)
        print(f"wrote {len(manifest['files']) + 1} files to {args.out}")
    return EXIT_OK


def cmd_frontier(args) -> int:
    config = _load_config_arg(args)
    universe = _require_universe(args, config)
    fc = build_factor_covariance(universe)
    constraints = _constraints_from_args(args, config)
    seed = args.seed if args.seed is not None else 1
    sigmas, mus, sharpes = frontier_cloud(
        universe,
        fc,
        k=constraints.k,
        n_draws=args.draws if args.draws is not None else 2000,
        seed=seed,
        weighting=args.weighting or "dirichlet",
    )
    _emit_table(
        ["sigma", "mu", "sharpe"],
        [(float(s), float(m), float(sh)) for s, m, sh in zip(sigmas, mus, sharpes)],
        args.out,
    )
    return EXIT_OK


def cmd_diagnose(args) -> int:
    config = _load_config_arg(args)
    universe = _require_universe(args, config)
    fc = build_factor_covariance(universe)
    subset = None
    if args.top_by_firms is not None:
        subset = top_by_firms(universe, args.top_by_firms)

    if args.report == "dependence":
        use_fc = fc if subset is None else fc.restrict(subset)
        report = dependence_report(use_fc)
        payload = report.as_record()
        if subset is not None:
            payload["subset_ids"] = [universe.ids[i] for i in subset]
        text = json.dumps(payload, indent=2, sort_keys=True)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
            print(f"wrote {args.out}")
        else:
            print(text)
        return EXIT_OK

    # cluster ordering
    rho = correlation_from_covariance(materialize_dense(fc))
    order = cluster_order(rho, subset=subset)
    rows = [(rank, universe.ids[i]) for rank, i in enumerate(order.order)]
    _emit_table(["rank", "id"], rows, args.out)
    return EXIT_OK


def _underlying_record(args, universe: Universe | None) -> AssetRecord:
    if universe is not None and args.underlying:
        return universe.assets[universe.index_of(args.underlying)]
    if args.vol is None:
        raise CLIError(
            "underlying volatility is unknown: pass --data with --underlying, "
            "or give --vol explicitly"
        )
    ident = args.underlying or "underlying"
    beta = args.beta if args.beta is not None else 1.0
    return AssetRecord(id=ident, name=ident, firms=0, beta=beta, sigma=args.vol)


def _option_spec(args, underlying: AssetRecord, rate: float) -> OptionSpec:
    vol = args.vol if args.vol is not None else underlying.sigma
    return OptionSpec(
        underlying_id=underlying.id,
        s0=args.s0,
        strike=args.strike if args.strike is not None else args.s0,
        maturity=args.t,
        rate=rate,
        vol=vol,
    )


def cmd_option(args) -> int:
    config = _load_config_arg(args)
    universe = _resolve_universe(args, config)
    market = _resolve_market(args, config)
    underlying = _underlying_record(args, universe)
    if args.rate is not None:
        rate = args.rate
    elif market is not None:
        rate = market.rf
    else:
        raise CLIError("a discount rate is required: pass --rate or --rf")

    if args.action == "price":
        spec = _option_spec(args, underlying, rate)
        diag = bs_call_price(spec)
        _emit_table(
            ["s0", "strike", "maturity", "rate", "vol", "price", "d1", "d2", "delta", "leverage"],
            [
                (
                    spec.s0,
                    spec.strike,
                    spec.maturity,
                    spec.rate,
                    spec.vol,
                    diag.price,
                    diag.d1,
                    diag.d2,
                    diag.delta,
                    diag.leverage,
                )
            ],
            args.out,
        )
        return EXIT_OK

    if args.action == "embed":
        if market is None:
            raise CLIError("embedding needs --rf and --erp (or a config with market)")
        emb = embed_option(
            _option_spec(args, underlying, rate),
            underlying,
            market,
            counts_toward_k=args.count_in_k,
        )
        diag = emb.diagnostics
        _emit_table(
            [
                "underlying",
                "price",
                "delta",
                "leverage",
                "beta_opt",
                "sigma_opt",
                "mu_opt",
                "resid_var",
                "counts_toward_k",
            ],
            [
                (
                    underlying.id,
                    diag.price,
                    diag.delta,
                    emb.leverage,
                    emb.beta_opt,
                    emb.sigma_opt,
                    emb.mu_opt,
                    "" if emb.resid_var is None else emb.resid_var,
                    str(emb.counts_toward_k).lower(),
                )
            ],
            args.out,
        )
        return EXIT_OK

    if args.action == "grid":
        if market is None:
            raise CLIError("the grid needs --rf and --erp (or a config with market)")
        rows = option_grid(
            _option_spec(args, underlying, rate),
            list(args.moneyness),
            list(args.maturities),
            underlying,
            market,
        )
        _emit_table(
            [
                "moneyness",
                "maturity",
                "strike",
                "price",
                "delta",
                "leverage",
                "beta_opt",
                "sigma_opt",
                "mu_opt",
            ],
            [
                (
                    row.moneyness,
                    row.maturity,
                    row.strike,
                    row.diagnostics.price,
                    row.diagnostics.delta,
                    row.embedding.leverage,
                    row.embedding.beta_opt,
                    row.embedding.sigma_opt,
                    row.embedding.mu_opt,
                )
                for row in rows
            ],
            args.out,
        )
        return EXIT_OK

    # bump
    result = bump_test(_option_spec(args, underlying, rate), bump=args.bump)
    _emit_table(
        [
            "s0",
            "strike",
            "maturity",
            "bump",
            "price",
            "delta",
            "c_repriced_up",
            "c_approx_up",
            "relerr_up",
            "c_repriced_dn",
            "c_approx_dn",
            "relerr_dn",
        ],
        [
            (
                args.s0,
                args.strike if args.strike is not None else args.s0,
                args.t,
                result.bump,
                result.c0,
                result.delta,
                result.c_repriced_up,
                result.c_approx_up,
                result.relerr_up,
                result.c_repriced_dn,
                result.c_approx_dn,
                result.relerr_dn,
            )
        ],
        args.out,
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config_arg(args)
    universe = _require_universe(args, config)
    fc = build_factor_covariance(universe)
    key, values = parse_grid(args.grid)
    scenarios = tuple(
        SensitivityScenario(name=f"{key}={value:g}", **{key: value}) for value in values
    )
    seeds = parse_seeds(args.seeds)
    method = args.method or (config.method if config else "mc")
    base_config = _solver_config_from_args(args, config, seed=seeds[0])
    result = sensitivity_sweep(universe, fc, scenarios, method, base_config, seeds)

    _emit_table(
        ["scenario", "best", "best_mean", "best_std", "median", "q05", "q95"],
        [
            (
                o.scenario.name,
                o.distribution.best,
                o.distribution.best_mean,
                o.distribution.best_std,
                o.distribution.median,
                o.distribution.q05,
                o.distribution.q95,
            )
            for o in result.outcomes
        ],
        None,
    )
    print()
    _emit_table(
        ["overlap"] + list(result.overlap_labels),
        [
            (label,) + tuple(float(v) for v in row)
            for label, row in zip(result.overlap_labels, result.overlap_matrix)
        ],
        None,
    )
    if args.out:
        payload = {
            "parameters": {
                "command": "sweep",
                "grid": args.grid,
                "method": method,
                "seeds": list(seeds),
                "solver_config": base_config.to_dict(),
                "market": {
                    "rf": universe.market.rf,
                    "erp": universe.market.erp,
                    "sigma_m": universe.market.sigma_m,
                },
                "toolkit_version": __version__,
            },
            "result": result.as_record(),
        }
        _write_json_report(args.out, payload)
    return EXIT_OK


def _synthetic_or_reduced(args, config) -> tuple[Universe, str]:
    """Benchmark instances: a reduced slice of --data, else a seeded synthetic."""
    universe = _resolve_universe(args, config)
    if universe is not None:
        if args.n > universe.n:
            raise CLIError(
                f"--n {args.n} exceeds the {universe.n} assets in the data table"
            )
        return universe, f"first {args.n} assets of the input table"
    market = _resolve_market(args, config)
    kwargs = {"n": args.n, "seed": args.universe_seed}
    if market is not None:
        kwargs.update(rf=market.rf, erp=market.erp)
        if market.sigma_m is not None:
            kwargs["sigma_m"] = market.sigma_m
    return (
        make_random_universe(**kwargs),
        f"synthetic universe (n={args.n}, seed={args.universe_seed})",
    )


def cmd_benchmark(args) -> int:
    config = _load_config_arg(args)
    universe, source = _synthetic_or_reduced(args, config)
    fc = build_factor_covariance(universe)
    if args.n < universe.n:
        universe, fc = reduced_instance(universe, fc, args.n)

    seed = args.seed if args.seed is not None else 1
    constraints = ConstraintSet(k=args.k)
    heuristics = {
        "greedy": ("greedy", SolverConfig(seed=seed, constraints=constraints)),
        f"mc-{args.draws}": (
            "mc",
            SolverConfig(seed=seed, constraints=constraints, n_draws=args.draws),
        ),
        f"ga-{args.pop}x{args.gens}": (
            "ga",
            SolverConfig(
                seed=seed,
                constraints=constraints,
                population=args.pop,
                generations=args.gens,
            ),
        ),
    }
    table = exact_benchmark(universe, fc, args.k, heuristics)
    print(f"instance: {source}")
    print(
        f"exact optimum over {table.subsets_visited} subsets: "
        f"sharpe {table.exact_sharpe:.6f}"
    )
    _emit_table(
        ["label", "method", "best_sharpe", "gap_percent"],
        [(r.label, r.method, r.best_sharpe, r.gap_percent) for r in table.rows],
        None,
    )
    if args.out:
        payload = {
            "parameters": {
                "command": "benchmark",
                "n": args.n,
                "k": args.k,
                "seed": seed,
                "universe_seed": args.universe_seed,
                "draws": args.draws,
                "population": args.pop,
                "generations": args.gens,
                "instance": source,
                "toolkit_version": __version__,
            },
            "result": table.as_record(),
        }
        _write_json_report(args.out, payload)
    return EXIT_OK


def cmd_profile(args) -> int:
    config = _load_config_arg(args)
    universe, source = _synthetic_or_reduced(args, config)
    fc = build_factor_covariance(universe)
    if args.n < universe.n:
        universe, fc = reduced_instance(universe, fc, args.n)

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise CLIError("--methods lists no methods")
    constraints = ConstraintSet(k=args.k)
    method_configs = {}
    for method in methods:
        if method == "mc":
            cfg = SolverConfig(constraints=constraints, n_draws=args.draws)
        elif method == "ga":
            cfg = SolverConfig(
                constraints=constraints, population=args.pop, generations=args.gens
            )
        else:
            cfg = SolverConfig(constraints=constraints)
        method_configs[method] = cfg
    seeds = parse_seeds(args.seeds)
    report = runtime_profile(universe, fc, method_configs, seeds)
    print(f"instance: {source}")
    env = report.environment
    print(f"environment: {env['python']} on {env['platform']} ({env['kernel_backend']})")
    _emit_table(
        ["method", "runtime_mean", "runtime_std", "evaluations_mean", "best_mean"],
        [
            (r.method, r.runtime_mean, r.runtime_std, r.evaluations_mean, r.best_mean)
            for r in report.rows
        ],
        None,
    )
    if args.out:
        payload = {
            "parameters": {
                "command": "profile",
                "methods": methods,
                "n": args.n,
                "k": args.k,
                "seeds": list(seeds),
                "draws": args.draws,
                "population": args.pop,
                "generations": args.gens,
                "instance": source,
                "toolkit_version": __version__,
            },
            "result": report.as_record(),
        }
        _write_json_report(args.out, payload)
    return EXIT_OK


def cmd_export(args) -> int:
    config = _load_config_arg(args)
    if not args.out:
        raise CLIError("export needs --out to name the bundle directory")
    universe = _require_universe(args, config)
    fc = build_factor_covariance(universe)
    runs = []
    method = args.method or (config.method if config else None)
    if method:
        seeds = parse_seeds(args.seeds) if args.seeds else (
            config.seeds if config else (1,)
        )
        for seed in seeds:
            solver_config = _solver_config_from_args(args, config, seed=seed)
            runs.append(solve(method, universe, fc, solver_config))
    manifest = export_artifacts(universe, fc, tuple(runs), args.out, config=config)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def _add_market_flags(parser) -> None:
    parser.add_argument("--rf", type=float, help="risk-free rate, decimal")
    parser.add_argument("--erp", type=float, help="equity risk premium, decimal")
    parser.add_argument(
        "--sigma-m", dest="sigma_m", type=float, help="market volatility, decimal"
    )


def _add_data_flags(parser) -> None:
    parser.add_argument("--data", help="asset table CSV (id,name,firms,beta,sigma)")
    parser.add_argument(
        "--units",
        choices=("decimal", "percent"),
        help="units of sigma/rf/erp in the inputs (default decimal)",
    )
    _add_market_flags(parser)


def _add_common_flags(parser) -> None:
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--out", help="output path (directory or file, per command)")


def _add_solver_flags(parser) -> None:
    parser.add_argument("--k", type=int, help="number of assets to hold")
    parser.add_argument("--cap", type=float, help="per-asset weight cap")
    parser.add_argument(
        "--beta-band", dest="beta_band", help="portfolio beta bounds, e.g. 0.8,1.2"
    )
    parser.add_argument(
        "--min-return", dest="min_return", type=float, help="portfolio return floor"
    )
    parser.add_argument(
        "--weighting",
        choices=("equal", "equal_weight", "dirichlet", "reopt", "reoptimized"),
        help="within-subset weighting scheme",
    )
    parser.add_argument("--draws", type=int, help="Monte Carlo subset draws")
    parser.add_argument("--pop", type=int, help="GA population size")
    parser.add_argument("--gens", type=int, help="GA generations")
    parser.add_argument(
        "--reopt-budget",
        dest="reopt_budget",
        type=int,
        help="weight-refinement draws after subset search",
    )
    parser.add_argument(
        "--objective",
        choices=("sharpe", "scalarized"),
        help="fitness: sharpe ratio or return-minus-lambda-variance",
    )
    parser.add_argument(
        "--risk-aversion",
        dest="risk_aversion",
        type=float,
        help="lambda for the scalarized objective",
    )
    parser.add_argument(
        "--score",
        choices=("proxy", "mu_over_sigma"),
        help="greedy ranking score",
    )


def _add_option_flags(parser, include_action: bool) -> None:
    if include_action:
        parser.add_argument(
            "action",
            choices=("price", "embed", "grid", "bump"),
            help="what to compute",
        )
    parser.add_argument("--underlying", help="asset id of the underlying")
    parser.add_argument("--s0", type=float, default=100.0, help="spot price")
    parser.add_argument("--strike", type=float, help="strike (default: at the money)")
    parser.add_argument("--t", type=float, default=0.5, help="maturity in years")
    parser.add_argument("--vol", type=float, help="underlying volatility, decimal")
    parser.add_argument("--rate", type=float, help="discount rate (default: rf)")
    parser.add_argument("--beta", type=float, help="underlying beta when no --data")
    parser.add_argument(
        "--count-in-k",
        dest="count_in_k",
        type=parse_bool,
        default=True,
        metavar="true|false",
        help="whether the option consumes a cardinality slot",
    )
    parser.add_argument(
        "--moneyness",
        type=parse_float_list,
        default=(0.9, 1.0, 1.1),
        help="grid of K/S0 ratios, e.g. 0.9,1.0,1.1",
    )
    parser.add_argument(
        "--maturities",
        type=parse_float_list,
        default=(0.25, 0.5, 1.0),
        help="grid of maturities in years",
    )
    parser.add_argument(
        "--bump", type=float, default=0.01, help="relative spot bump for the delta test"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardfolio",
        description="Sparse index-model portfolio selection toolkit",
    )
    parser.add_argument("--version", action="version", version=f"cardfolio {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="load a universe and report the risk model")
    _add_data_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("solve", help="run one subset-selection method")
    _add_data_flags(p)
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--method", choices=("greedy", "mc", "ga", "exact"))
    p.add_argument(
        "--json", action="store_true", help="print the canonical run record as JSON"
    )
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser(
        "frontier", help="sample random sparse portfolios as a risk/return cloud"
    )
    _add_data_flags(p)
    _add_common_flags(p)
    p.add_argument("--k", type=int, help="portfolio cardinality")
    p.add_argument("--draws", type=int, help="number of sampled portfolios")
    p.add_argument("--weighting", choices=("equal", "dirichlet"))
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("diagnose", help="dependence summary or correlation ordering")
    _add_data_flags(p)
    _add_common_flags(p)
    p.add_argument("--report", choices=("dependence", "cluster"), default="dependence")
    p.add_argument(
        "--top-by-firms",
        dest="top_by_firms",
        type=int,
        help="restrict to the m assets with the most member firms",
    )
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("option", help="price and embed a call overlay")
    _add_data_flags(p)
    _add_common_flags(p)
    _add_option_flags(p, include_action=True)
    p.set_defaults(func=cmd_option)

    p = sub.add_parser("bump", help="delta-approximation error test (option bump)")
    _add_data_flags(p)
    _add_common_flags(p)
    _add_option_flags(p, include_action=False)
    p.set_defaults(func=cmd_option, action="bump")

    p = sub.add_parser("sweep", help="re-solve across a parameter grid")
    _add_data_flags(p)
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--grid", required=True, help="e.g. k=6,8,10,12,14")
    p.add_argument("--seeds", default="1..10", help="e.g. 1..10 or 1,2,3")
    p.add_argument("--method", choices=("greedy", "mc", "ga", "exact"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser(
        "benchmark", help="exact optimum vs heuristics on a small instance"
    )
    _add_data_flags(p)
    _add_common_flags(p)
    p.add_argument("--n", type=int, default=20, help="instance size")
    p.add_argument("--k", type=int, default=6, help="portfolio cardinality")
    p.add_argument(
        "--universe-seed",
        dest="universe_seed",
        type=int,
        default=7,
        help="seed for the synthetic instance when no --data is given",
    )
    p.add_argument("--draws", type=int, default=2000, help="Monte Carlo draws")
    p.add_argument("--pop", type=int, default=30, help="GA population")
    p.add_argument("--gens", type=int, default=30, help="GA generations")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("profile", help="wall-time comparison across methods")
    _add_data_flags(p)
    _add_common_flags(p)
    p.add_argument("--methods", default="greedy,mc,ga", help="comma-separated methods")
    p.add_argument("--n", type=int, default=20, help="instance size")
    p.add_argument("--k", type=int, default=6, help="portfolio cardinality")
    p.add_argument("--seeds", default="1..3", help="e.g. 1..3")
    p.add_argument(
        "--universe-seed",
        dest="universe_seed",
        type=int,
        default=7,
        help="seed for the synthetic instance when no --data is given",
    )
    p.add_argument("--draws", type=int, default=2000, help="Monte Carlo draws")
    p.add_argument("--pop", type=int, default=20, help="GA population")
    p.add_argument("--gens", type=int, default=20, help="GA generations")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("export", help="write the full artifact bundle")
    _add_data_flags(p)
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--method", choices=("greedy", "mc", "ga", "exact"))
    p.add_argument("--seeds", help="run seeds to include, e.g. 1..5")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"cardfolio: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError, ArithmeticError, InfeasibleError) as exc:
        print(f"cardfolio: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"cardfolio: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
