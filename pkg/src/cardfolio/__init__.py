"""Cardinality-constrained mean-variance portfolio toolkit.

Calibrates a CAPM/single-index universe, searches K-sparse max-Sharpe
portfolios by greedy ranking, Monte Carlo sampling, a genetic algorithm, or
exact enumeration, re-optimizes weights on a fixed support, embeds European
call overlays as synthetic assets, and reports seed-logged distributional
and dependence diagnostics.
"""

__version__ = "0.1.0"

from cardfolio.calibration import (
    AssetRecord,
    FactorCovariance,
    MarketParams,
    Universe,
    build_factor_covariance,
    correlation_from_covariance,
    ingest_universe,
    materialize_dense,
    psd_gate,
)
from cardfolio.derivatives import (
    OptionSpec,
    augment_universe,
    bs_call_price,
    bump_test,
    embed_option,
    option_grid,
)
from cardfolio.diagnostics import cluster_order, dependence_report, top_by_firms
from cardfolio.experiments import (
    exact_benchmark,
    frontier_cloud,
    make_random_universe,
    run_campaign,
    sensitivity_sweep,
)
from cardfolio.io import (
    RunConfig,
    export_artifacts,
    load_config,
    read_universe_csv,
    save_config,
    write_universe_csv,
)
from cardfolio.metrics import (
    ConstraintSet,
    Portfolio,
    PortfolioEvaluation,
    evaluate,
    risk_contributions,
    verify_decision,
)
from cardfolio.solvers import (
    InfeasibleError,
    SolverConfig,
    SolverRun,
    reoptimize_weights,
    solve,
    with_seed,
)

__all__ = [
    "AssetRecord",
    "ConstraintSet",
    "FactorCovariance",
    "InfeasibleError",
    "MarketParams",
    "OptionSpec",
    "Portfolio",
    "PortfolioEvaluation",
    "RunConfig",
    "SolverConfig",
    "SolverRun",
    "Universe",
    "__version__",
    "augment_universe",
    "bs_call_price",
    "build_factor_covariance",
    "bump_test",
    "cluster_order",
    "correlation_from_covariance",
    "dependence_report",
    "embed_option",
    "evaluate",
    "exact_benchmark",
    "export_artifacts",
    "frontier_cloud",
    "ingest_universe",
    "load_config",
    "make_random_universe",
    "materialize_dense",
    "option_grid",
    "psd_gate",
    "read_universe_csv",
    "reoptimize_weights",
    "risk_contributions",
    "run_campaign",
    "save_config",
    "sensitivity_sweep",
    "solve",
    "top_by_firms",
    "verify_decision",
    "with_seed",
]
