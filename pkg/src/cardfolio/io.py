"""File formats shared across the toolchain.

Three concerns live here: the universe table (CSV in, CSV out), run
configuration files (strict JSON), and the artifact bundle that a finished
run exports (matrices, run records, running-best curves, hash manifest).

Numeric cells are written with repr(), which emits the shortest string that
round-trips the exact float (17 significant digits when needed). Files are
always in decimal units; percent is an ingest-time convenience only.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .calibration import (
    FactorCovariance,
    MarketParams,
    Universe,
    build_factor_covariance,
    correlation_from_covariance,
    ingest_universe,
    materialize_dense,
)
from .metrics import ConstraintSet
from .solvers import METHODS, REOPT_BUDGET_DEFAULT, SolverConfig, SolverRun

UNIVERSE_COLUMNS = ("id", "name", "firms", "beta", "sigma")

MANIFEST_NAME = "manifest.json"
HASH_ALGORITHM = "sha256"


def format_number(value) -> str:
    """Shortest decimal string that parses back to the exact same float."""
    return repr(float(value))


# ---------------------------------------------------------------------------
# universe tables
# ---------------------------------------------------------------------------


def read_universe_csv(path, market: MarketParams, units: str = "decimal") -> Universe:
    """Load an asset table from a CSV file with columns id,name,firms,beta,sigma.

    Column order does not matter and extra columns are ignored with a logged
    warning. Empty cells in optional columns (name, firms) fall back to the
    same defaults as programmatic ingestion.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: file is empty, expected a header row")
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in ("id", "beta", "sigma") if c not in header]
        if missing:
            raise ValueError(
                f"{path}: missing required columns {missing}; "
                f"expected header with {', '.join(UNIVERSE_COLUMNS)}"
            )
        rows = []
        for raw in reader:
            row = {}
            for key, value in raw.items():
                if key is None:
                    raise ValueError(f"{path}: row has more cells than the header")
                key = key.strip()
                if isinstance(value, str):
                    value = value.strip()
                if value in (None, ""):
                    continue  # let ingest defaults fill optional cells
                row[key] = value
            if row:
                rows.append(row)
    return ingest_universe(rows, market, units=units)


def write_universe_csv(path, universe: Universe) -> None:
    """Write the asset table back out, decimal units, full float precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(UNIVERSE_COLUMNS)
        for asset in universe.assets:
            writer.writerow(
                [
                    asset.id,
                    asset.name,
                    asset.firms,
                    format_number(asset.beta),
                    format_number(asset.sigma),
                ]
            )


def write_matrix_csv(path, matrix: np.ndarray, ids) -> None:
    """Write a square matrix with asset ids as both header row and column."""
    matrix = np.asarray(matrix, dtype=float)
    ids = list(ids)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got shape {matrix.shape}")
    if matrix.shape[0] != len(ids):
        raise ValueError(
            f"matrix has {matrix.shape[0]} rows but {len(ids)} ids were given"
        )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + ids)
        for asset_id, row in zip(ids, matrix):
            writer.writerow([asset_id] + [format_number(v) for v in row])


def read_matrix_csv(path):
    """Inverse of write_matrix_csv. Returns (ids, matrix)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        ids = header[1:]
        rows = []
        row_ids = []
        for row in reader:
            if not row:
                continue
            row_ids.append(row[0])
            rows.append([float(cell) for cell in row[1:]])
    if row_ids != ids:
        raise ValueError(f"{path}: row labels do not match the header labels")
    matrix = np.array(rows, dtype=float)
    if matrix.shape != (len(ids), len(ids)):
        raise ValueError(f"{path}: expected a {len(ids)}x{len(ids)} body")
    return ids, matrix


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to re-execute a run from a file.

    The JSON form nests market and constraint parameters under their own
    keys; everything else is flat. Unknown keys anywhere are rejected so a
    typo like "n_draw" fails loudly instead of silently running defaults.
    """

    market: MarketParams
    data_path: str | None = None
    units: str = "decimal"
    method: str = "mc"
    seeds: tuple[int, ...] = (1,)
    constraints: ConstraintSet = field(default_factory=lambda: ConstraintSet(k=10))
    weighting: str = "equal"
    n_draws: int | None = None
    population: int | None = None
    generations: int | None = None
    reopt_budget: int = REOPT_BUDGET_DEFAULT
    objective: str = "sharpe"
    risk_aversion: float = 1.0
    score: str = "proxy"
    output_dir: str | None = None

    def validate(self) -> list[str]:
        errors = self.market.validate()
        # full constraint validation needs the universe size; check what we can
        if self.constraints.k < 1:
            errors.append(f"k must be at least 1, got {self.constraints.k}")
        band = self.constraints.beta_band
        if band is not None and band[0] > band[1]:
            errors.append(f"beta band is inverted: {band}")
        if self.units not in ("decimal", "percent"):
            errors.append(f"units must be 'decimal' or 'percent', got {self.units!r}")
        if self.method not in METHODS:
            errors.append(
                f"unknown method {self.method!r}; expected one of {sorted(METHODS)}"
            )
        if not self.seeds:
            errors.append("seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            errors.append("seeds must be distinct")
        return errors

    def solver_config(self, seed: int | None = None) -> SolverConfig:
        """Materialize the per-run solver settings for one seed."""
        return SolverConfig(
            seed=self.seeds[0] if seed is None else int(seed),
            constraints=self.constraints,
            weighting=self.weighting,
            n_draws=self.n_draws,
            population=self.population,
            generations=self.generations,
            reopt_budget=self.reopt_budget,
            objective=self.objective,
            risk_aversion=self.risk_aversion,
            score=self.score,
        )

    def to_dict(self) -> dict:
        return {
            "market": {
                "rf": self.market.rf,
                "erp": self.market.erp,
                "sigma_m": self.market.sigma_m,
            },
            "data_path": self.data_path,
            "units": self.units,
            "method": self.method,
            "seeds": list(self.seeds),
            "constraints": {
                "k": self.constraints.k,
                "weight_cap": list(self.constraints.weight_cap)
                if isinstance(self.constraints.weight_cap, tuple)
                else self.constraints.weight_cap,
                "beta_band": None
                if self.constraints.beta_band is None
                else list(self.constraints.beta_band),
                "min_return": self.constraints.min_return,
                "exempt_indices": list(self.constraints.exempt_indices),
                "exempt_cap": self.constraints.exempt_cap,
            },
            "weighting": self.weighting,
            "n_draws": self.n_draws,
            "population": self.population,
            "generations": self.generations,
            "reopt_budget": self.reopt_budget,
            "objective": self.objective,
            "risk_aversion": self.risk_aversion,
            "score": self.score,
            "output_dir": self.output_dir,
        }


def _reject_unknown(mapping: dict, allowed, context: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ValueError(
            f"unknown {context} key(s) {unknown}; allowed keys are {sorted(allowed)}"
        )


def config_from_dict(data: dict) -> RunConfig:
    """Strict deserialization: every unknown key is an error."""
    if not isinstance(data, dict):
        raise ValueError(f"config root must be an object, got {type(data).__name__}")
    top_allowed = {
        "market",
        "data_path",
        "units",
        "method",
        "seeds",
        "constraints",
        "weighting",
        "n_draws",
        "population",
        "generations",
        "reopt_budget",
        "objective",
        "risk_aversion",
        "score",
        "output_dir",
    }
    _reject_unknown(data, top_allowed, "config")

    market_raw = data.get("market")
    if not isinstance(market_raw, dict):
        raise ValueError("config must contain a 'market' object with rf and erp")
    _reject_unknown(market_raw, {"rf", "erp", "sigma_m"}, "market")
    if "rf" not in market_raw or "erp" not in market_raw:
        raise ValueError("market config requires both 'rf' and 'erp'")
    sigma_m = market_raw.get("sigma_m")
    market = MarketParams(
        rf=float(market_raw["rf"]),
        erp=float(market_raw["erp"]),
        sigma_m=None if sigma_m is None else float(sigma_m),
    )

    cons_raw = data.get("constraints", {})
    if not isinstance(cons_raw, dict):
        raise ValueError("'constraints' must be an object")
    _reject_unknown(
        cons_raw,
        {"k", "weight_cap", "beta_band", "min_return", "exempt_indices", "exempt_cap"},
        "constraints",
    )
    band = cons_raw.get("beta_band")
    cap_raw = cons_raw.get("weight_cap")
    if cap_raw is None:
        weight_cap = None
    elif isinstance(cap_raw, (list, tuple)):
        weight_cap = tuple(float(c) for c in cap_raw)
    else:
        weight_cap = float(cap_raw)
    constraints = ConstraintSet(
        k=int(cons_raw.get("k", 10)),
        weight_cap=weight_cap,
        beta_band=None if band is None else (float(band[0]), float(band[1])),
        min_return=None
        if cons_raw.get("min_return") is None
        else float(cons_raw["min_return"]),
        exempt_indices=tuple(int(i) for i in cons_raw.get("exempt_indices", ())),
        exempt_cap=None
        if cons_raw.get("exempt_cap") is None
        else float(cons_raw["exempt_cap"]),
    )

    seeds_raw = data.get("seeds", [1])
    if isinstance(seeds_raw, (int, float)):
        seeds_raw = [seeds_raw]
    seeds = tuple(int(s) for s in seeds_raw)

    def opt_int(key):
        value = data.get(key)
        return None if value is None else int(value)

    config = RunConfig(
        market=market,
        data_path=data.get("data_path"),
        units=str(data.get("units", "decimal")),
        method=str(data.get("method", "mc")),
        seeds=seeds,
        constraints=constraints,
        weighting=str(data.get("weighting", "equal")),
        n_draws=opt_int("n_draws"),
        population=opt_int("population"),
        generations=opt_int("generations"),
        reopt_budget=int(data.get("reopt_budget", REOPT_BUDGET_DEFAULT)),
        objective=str(data.get("objective", "sharpe")),
        risk_aversion=float(data.get("risk_aversion", 1.0)),
        score=str(data.get("score", "proxy")),
        output_dir=data.get("output_dir"),
    )
    errors = config.validate()
    if errors:
        raise ValueError("; ".join(errors))
    return config


def load_config(path) -> RunConfig:
    """Read and validate a JSON run configuration."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)


def save_config(config: RunConfig, path) -> None:
    """Write a config so that load_config(path) == config."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# artifact export
# ---------------------------------------------------------------------------


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _run_basename(run: SolverRun) -> str:
    return f"run-{run.method}-seed{run.config.seed}"


def export_artifacts(
    universe: Universe,
    fc: FactorCovariance | None = None,
    runs: tuple[SolverRun, ...] = (),
    output_dir: str = ".",
    config: RunConfig | None = None,
) -> dict:
    """Write the full artifact bundle for a calibrated universe and its runs.

    Files written: inputs.csv (asset table), sigma.csv and rho.csv
    (covariance and correlation matrices with id headers, when sigma_m is
    available), one run-<method>-seed<seed>.json per run plus its
    running_best curve as CSV, optionally config.json, and manifest.json
    mapping every other file to its sha256 digest.

    Run records are written in canonical form (timing excluded), so
    re-running the same configuration and re-exporting yields
    byte-identical files and therefore identical manifest hashes.
    """
    os.makedirs(output_dir, exist_ok=True)
    written: list[str] = []

    def target(name: str) -> str:
        written.append(name)
        return os.path.join(output_dir, name)

    write_universe_csv(target("inputs.csv"), universe)

    if fc is None and universe.market.sigma_m is not None:
        fc = build_factor_covariance(universe)
    if fc is not None:
        dense = materialize_dense(fc)
        write_matrix_csv(target("sigma.csv"), dense, universe.ids)
        write_matrix_csv(
            target("rho.csv"), correlation_from_covariance(dense), universe.ids
        )

    seen_names: set[str] = set()
    for run in runs:
        base = _run_basename(run)
        if base in seen_names:
            raise ValueError(
                f"two runs map to the same artifact name {base!r}; "
                "give them distinct methods or seeds"
            )
        seen_names.add(base)
        with open(target(base + ".json"), "w", encoding="utf-8") as fh:
            fh.write(run.canonical_json())
            fh.write("\n")
        with open(
            target(f"running_best-{run.method}-seed{run.config.seed}.csv"),
            "w",
            newline="",
            encoding="utf-8",
        ) as fh:
            writer = csv.writer(fh)
            writer.writerow(["evaluations", "best_sharpe"])
            for evals, best in run.running_best:
                writer.writerow([evals, format_number(best)])

    if config is not None:
        save_config(config, target("config.json"))

    manifest = {
        "algorithm": HASH_ALGORITHM,
        "files": {
            name: _sha256_file(os.path.join(output_dir, name))
            for name in sorted(written)
        },
    }
    with open(os.path.join(output_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def verify_manifest(output_dir: str) -> list[str]:
    """Re-hash an exported bundle; returns a list of mismatch descriptions."""
    manifest_path = os.path.join(output_dir, MANIFEST_NAME)
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("algorithm") != HASH_ALGORITHM:
        return [f"unsupported hash algorithm {manifest.get('algorithm')!r}"]
    problems = []
    for name, expected in sorted(manifest.get("files", {}).items()):
        path = os.path.join(output_dir, name)
        if not os.path.exists(path):
            problems.append(f"{name}: listed in manifest but missing on disk")
            continue
        actual = _sha256_file(path)
        if actual != expected:
            problems.append(f"{name}: hash mismatch (expected {expected}, got {actual})")
    return problems


def universe_to_config(
    universe: Universe,
    data_path: str | None = None,
    **overrides,
) -> RunConfig:
    """Convenience: seed a RunConfig from an already-calibrated universe."""
    base = RunConfig(market=universe.market, data_path=data_path)
    return dataclasses.replace(base, **overrides) if overrides else base
