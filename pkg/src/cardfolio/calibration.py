"""Universe calibration: CAPM expected returns and the single-index covariance.

Expected returns come from the CAPM identity mu_i = rf + beta_i * erp. The
covariance model is a single-index factorization: off-diagonal entries are
beta_i * beta_j * var_m, and the diagonal is matched to each asset's total
variance sigma_i**2 by backing out a nonnegative residual variance. All rates
and volatilities are annualized decimals (0.0397, never 3.97).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import Decimal
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)

# Construction-bug threshold: a single-index matrix is PSD by structure, so an
# eigenvalue this negative cannot be roundoff.
PSD_HARD_FLOOR = -1e-6
PSD_TOLERANCE = -1e-10


@dataclass(frozen=True)
class AssetRecord:
    """One investable asset: identity plus its levered beta and volatility."""

    id: str
    name: str
    firms: int
    beta: float
    sigma: float

    def validate(self) -> list[str]:
        errors = []
        if not self.id:
            errors.append("asset id must be nonempty")
        if self.sigma <= 0:
            errors.append(f"asset {self.id!r}: sigma must be positive, got {self.sigma}")
        if self.firms < 0:
            errors.append(f"asset {self.id!r}: firms must be nonnegative, got {self.firms}")
        return errors


@dataclass(frozen=True)
class MarketParams:
    """Annualized market-level inputs, all decimal fractions.

    sigma_m is optional because some workflows (pure CAPM screening, option
    pricing) never touch the covariance model. Anything that builds Sigma
    requires it and fails loudly when it is missing; defaulting it silently
    would fabricate the dependence structure.
    """

    rf: float
    erp: float
    sigma_m: float | None = None

    def validate(self) -> list[str]:
        errors = []
        if self.erp <= 0:
            errors.append(f"erp must be positive, got {self.erp}")
        if self.sigma_m is not None and self.sigma_m <= 0:
            errors.append(f"sigma_m must be positive when set, got {self.sigma_m}")
        for label, value in (("rf", self.rf), ("erp", self.erp), ("sigma_m", self.sigma_m)):
            if value is not None and value > 5.0:
                errors.append(
                    f"{label}={value} looks like a percent value passed as a decimal"
                )
        return errors

    def require_sigma_m(self) -> float:
        if self.sigma_m is None:
            raise ValueError(
                "sigma_m is required to build the covariance model; "
                "pass --sigma-m or set market.sigma_m in the config"
            )
        return self.sigma_m


@dataclass(frozen=True)
class Universe:
    """Calibrated asset set with CAPM expected returns, in fixed order."""

    assets: tuple[AssetRecord, ...]
    market: MarketParams
    audit: tuple[str, ...] = ()

    @cached_property
    def n(self) -> int:
        return len(self.assets)

    @cached_property
    def beta(self) -> np.ndarray:
        return np.array([a.beta for a in self.assets], dtype=float)

    @cached_property
    def sigma(self) -> np.ndarray:
        return np.array([a.sigma for a in self.assets], dtype=float)

    @cached_property
    def mu(self) -> np.ndarray:
        """Per-asset expected return: rf + beta * erp."""
        return self.market.rf + self.beta * self.market.erp

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.assets)

    def index_of(self, asset_id: str) -> int:
        try:
            return self.ids.index(asset_id)
        except ValueError:
            raise KeyError(f"asset id {asset_id!r} not in universe") from None

    def validate(self) -> list[str]:
        errors = self.market.validate()
        seen: set[str] = set()
        for a in self.assets:
            errors.extend(a.validate())
            if a.id in seen:
                errors.append(f"duplicate asset id {a.id!r}")
            seen.add(a.id)
        if not self.assets:
            errors.append("universe must contain at least one asset")
        return errors


@dataclass(frozen=True)
class FactorCovariance:
    """Single-index covariance in factor form.

    Stores the beta vector, market variance and per-asset residual variances
    rather than the dense matrix; quadratic forms and matrix-vector products
    are O(n) in this representation.
    """

    beta: np.ndarray
    var_m: float
    resid_var: np.ndarray
    clipped_ids: tuple[str, ...] = field(default=(), compare=False)

    @cached_property
    def n(self) -> int:
        return int(self.beta.shape[0])

    @cached_property
    def total_var(self) -> np.ndarray:
        """Diagonal of the materialized matrix: beta_i**2 var_m + resid_i."""
        return self.beta * self.beta * self.var_m + self.resid_var

    def quadratic_form(self, weights: np.ndarray) -> float:
        """w' Sigma w = (beta'w)**2 var_m + sum w_i**2 resid_i, O(n)."""
        bw = float(np.dot(self.beta, weights))
        return bw * bw * self.var_m + float(np.dot(weights * weights, self.resid_var))

    def matvec(self, weights: np.ndarray) -> np.ndarray:
        """(Sigma w)_i = beta_i var_m (beta'w) + resid_i w_i, O(n)."""
        bw = float(np.dot(self.beta, weights))
        return self.beta * (self.var_m * bw) + self.resid_var * weights

    def restrict(self, indices) -> "FactorCovariance":
        """Sub-model on the given asset indices (order preserved)."""
        idx = np.asarray(indices, dtype=int)
        return FactorCovariance(
            beta=self.beta[idx].copy(),
            var_m=self.var_m,
            resid_var=self.resid_var[idx].copy(),
        )


def percent_to_decimal(value: float) -> float:
    """Divide by 100 in decimal arithmetic.

    Binary division by 100 can land one ulp away from the pre-divided
    literal (3.97/100 != 0.0397 bit-for-bit); shifting the decimal point in
    base 10 reproduces exactly the float a user would have written directly.
    """
    return float(Decimal(repr(float(value))) / 100)


def ingest_universe(rows, market: MarketParams, units: str = "decimal") -> Universe:
    """Build a calibrated Universe from tabular rows.

    ``rows`` is an iterable of mappings with keys id, name, firms, beta,
    sigma (extra keys are ignored with a warning). With units="percent",
    sigma and the market rf/erp/sigma_m are divided by 100; beta is
    dimensionless either way. Every conversion is recorded in the returned
    universe's audit trail.
    """
    if units not in ("decimal", "percent"):
        raise ValueError(f"units must be 'decimal' or 'percent', got {units!r}")

    rows = list(rows)
    if not rows:
        raise ValueError("input table is empty")

    audit: list[str] = [f"units flag: {units}"]
    known = {"id", "name", "firms", "beta", "sigma"}
    extra = set(rows[0]) - known
    if extra:
        msg = f"ignoring unknown columns: {sorted(extra)}"
        logger.warning(msg)
        audit.append(msg)

    if units == "percent":
        audit.append("sigma, rf, erp, sigma_m divided by 100 (percent -> decimal)")
        market = MarketParams(
            rf=percent_to_decimal(market.rf),
            erp=percent_to_decimal(market.erp),
            sigma_m=None if market.sigma_m is None else percent_to_decimal(market.sigma_m),
        )
        convert = percent_to_decimal
    else:
        convert = float

    assets = []
    seen: set[str] = set()
    for row in rows:
        rec = AssetRecord(
            id=str(row["id"]),
            name=str(row.get("name", row["id"])),
            firms=int(row.get("firms", 0)),
            beta=float(row["beta"]),
            sigma=convert(row["sigma"]),
        )
        if rec.id in seen:
            raise ValueError(f"duplicate asset id {rec.id!r} in input table")
        seen.add(rec.id)
        errors = rec.validate()
        if errors:
            raise ValueError("; ".join(errors))
        if units == "decimal" and rec.sigma > 5.0:
            msg = f"asset {rec.id!r}: sigma={rec.sigma} with units=decimal looks like a percent value"
            logger.warning(msg)
            audit.append(msg)
        assets.append(rec)

    market_errors = market.validate()
    likely_percent = [e for e in market_errors if "looks like a percent" in e]
    hard = [e for e in market_errors if e not in likely_percent]
    if hard:
        raise ValueError("; ".join(hard))
    for msg in likely_percent:
        logger.warning(msg)
        audit.append(msg)

    universe = Universe(assets=tuple(assets), market=market, audit=tuple(audit))
    for msg in audit:
        logger.info("units audit: %s", msg)
    return universe


def build_factor_covariance(universe: Universe) -> FactorCovariance:
    """Single-index covariance for the universe.

    Residual variances are max(0, sigma_i**2 - beta_i**2 var_m); the max
    clip keeps the diagonal nonnegative when an asset's systematic variance
    alone exceeds its total variance. Clips are logged per asset id, not
    raised: they are expected numerical-noise handling, and the clipped
    diagonal becomes beta_i**2 var_m instead of sigma_i**2.
    """
    sigma_m = universe.market.require_sigma_m()
    var_m = sigma_m * sigma_m
    beta = universe.beta
    raw = universe.sigma**2 - beta**2 * var_m
    clipped = raw < 0.0
    resid = np.where(clipped, 0.0, raw)
    clipped_ids = tuple(universe.ids[i] for i in np.nonzero(clipped)[0])
    for asset_id in clipped_ids:
        logger.warning(
            "residual variance clipped to 0 for asset %r "
            "(systematic variance exceeds total variance)",
            asset_id,
        )
    return FactorCovariance(
        beta=beta.copy(), var_m=var_m, resid_var=resid, clipped_ids=clipped_ids
    )


def materialize_dense(fc: FactorCovariance) -> np.ndarray:
    """Dense Sigma = var_m * beta beta' + diag(resid_var)."""
    dense = fc.var_m * np.outer(fc.beta, fc.beta)
    dense[np.diag_indices(fc.n)] += fc.resid_var
    return dense


def correlation_from_covariance(cov: np.ndarray) -> np.ndarray:
    """Normalize a covariance matrix to a correlation matrix."""
    diag = np.diag(cov)
    bad = np.nonzero(diag <= 0.0)[0]
    if bad.size:
        raise ValueError(
            f"cannot normalize: nonpositive variance at asset index {int(bad[0])}"
        )
    scale = 1.0 / np.sqrt(diag)
    rho = cov * np.outer(scale, scale)
    np.fill_diagonal(rho, 1.0)
    return rho


def psd_gate(cov: np.ndarray, epsilon_policy: float | str = "auto"):
    """Validate positive semidefiniteness up to numerical tolerance.

    Returns (cov_out, min_eig_before, jitter_applied). No jitter is added
    when the smallest eigenvalue is already >= -1e-10 (cov_out is then the
    same object). Mild negativity down to -1e-6 is repaired with diagonal
    jitter; anything below that is a construction bug and raises.

    epsilon_policy: "auto" picks the smallest jitter that clears the
    tolerance; a float applies that fixed epsilon.
    """
    sym_gap = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    if sym_gap > 1e-12:
        raise ValueError(f"matrix is not symmetric (max asymmetry {sym_gap:.3e})")

    min_eig = float(np.linalg.eigvalsh(cov)[0])
    if min_eig >= PSD_TOLERANCE:
        return cov, min_eig, 0.0
    if min_eig < PSD_HARD_FLOOR:
        raise ValueError(
            f"covariance min eigenvalue {min_eig:.6e} is below the hard floor "
            f"{PSD_HARD_FLOOR:.0e}; this indicates a construction bug, not roundoff"
        )
    if epsilon_policy == "auto":
        jitter = -min_eig + 1e-12
    else:
        jitter = float(epsilon_policy)
        if jitter + min_eig < PSD_TOLERANCE:
            raise ValueError(
                f"fixed jitter {jitter:.3e} cannot lift min eigenvalue {min_eig:.3e} "
                f"above the tolerance {PSD_TOLERANCE:.0e}"
            )
    logger.warning("applying diagonal jitter %.3e (min eigenvalue was %.3e)", jitter, min_eig)
    out = cov + jitter * np.eye(cov.shape[0])
    return out, min_eig, jitter
