"""European call overlays as synthetic assets.

Prices a call, linearizes it around the current spot via its delta, and
maps the contract into the same beta/volatility coordinates the rest of
the toolkit uses. The linearization treats one currency unit invested in
the option as L = delta * s0 / price units of underlying exposure, so the
synthetic asset is the underlying scaled by L in both systematic and total
risk, with the expected return backed out from the market line.

The delta-only mapping ignores curvature; bump_test quantifies exactly how
much that costs for a given contract and move size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from cardfolio.calibration import (
    AssetRecord,
    FactorCovariance,
    MarketParams,
    Universe,
)
from cardfolio.metrics import ConstraintSet

_SQRT2 = math.sqrt(2.0)


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the error function (full double accuracy)."""
    return 0.5 * (1.0 + math.erf(x / _SQRT2))


@dataclass(frozen=True)
class OptionSpec:
    """European call contract terms.

    vol is the pricing volatility; by convention it defaults to the
    underlying's annual sigma unless the caller overrides it with a
    distinct implied vol.
    """

    underlying_id: str
    s0: float
    strike: float
    maturity: float
    rate: float
    vol: float

    def validate(self) -> list[str]:
        errors = []
        if self.s0 <= 0:
            errors.append(f"s0 must be positive, got {self.s0}")
        if self.strike <= 0:
            errors.append(f"strike must be positive, got {self.strike}")
        if self.maturity <= 0:
            errors.append(f"maturity must be positive, got {self.maturity}")
        if self.vol <= 0:
            errors.append(f"vol must be positive, got {self.vol}")
        return errors


@dataclass(frozen=True)
class OptionDiagnostics:
    """Pricing outputs: premium, d1/d2, delta, and implied leverage."""

    price: float
    d1: float
    d2: float
    delta: float
    leverage: float


@dataclass(frozen=True)
class OptionEmbedding:
    """The option expressed as a one-line synthetic asset.

    beta_opt = L * beta of the underlying, sigma_opt = L * sigma, and
    mu_opt sits back on the market line at the amplified beta. resid_var
    is backed out so total variance matches sigma_opt squared; it is None
    when the market's sigma_m is unknown (pricing-only workflows).
    """

    underlying_id: str
    beta_opt: float
    sigma_opt: float
    mu_opt: float
    leverage: float
    resid_var: float | None
    counts_toward_k: bool = True
    diagnostics: OptionDiagnostics | None = None


def bs_call_price(spec: OptionSpec) -> OptionDiagnostics:
    """Price a European call and report its delta and leverage."""
    errors = spec.validate()
    if errors:
        raise ValueError("invalid option spec: " + "; ".join(errors))
    sqrt_t = math.sqrt(spec.maturity)
    d1 = (math.log(spec.s0 / spec.strike)
          + (spec.rate + spec.vol * spec.vol / 2.0) * spec.maturity) / (spec.vol * sqrt_t)
    d2 = d1 - spec.vol * sqrt_t
    delta = norm_cdf(d1)
    price = spec.s0 * delta - spec.strike * math.exp(-spec.rate * spec.maturity) * norm_cdf(d2)
    if price <= 0.0:
        raise ArithmeticError(
            f"call price {price} is not positive; pricing invariant broken"
        )
    return OptionDiagnostics(
        price=price, d1=d1, d2=d2, delta=delta, leverage=delta * spec.s0 / price
    )


def embed_with_leverage(
    leverage: float,
    underlying: AssetRecord,
    market: MarketParams,
    counts_toward_k: bool = True,
    diagnostics: OptionDiagnostics | None = None,
) -> OptionEmbedding:
    """Scale the underlying's coordinates by a leverage factor.

    Exposed separately so the identity case (leverage 1 reproduces the
    underlying) is testable without constructing a contract that happens
    to price at unit leverage.
    """
    beta_opt = leverage * underlying.beta
    sigma_opt = leverage * underlying.sigma
    mu_opt = market.rf + beta_opt * market.erp
    resid_var = None
    if market.sigma_m is not None:
        var_m = market.sigma_m * market.sigma_m
        resid_var = max(0.0, sigma_opt * sigma_opt - beta_opt * beta_opt * var_m)
    return OptionEmbedding(
        underlying_id=underlying.id,
        beta_opt=beta_opt,
        sigma_opt=sigma_opt,
        mu_opt=mu_opt,
        leverage=leverage,
        resid_var=resid_var,
        counts_toward_k=counts_toward_k,
        diagnostics=diagnostics,
    )


def embed_option(
    spec: OptionSpec,
    underlying: AssetRecord,
    market: MarketParams,
    counts_toward_k: bool = True,
) -> OptionEmbedding:
    """Price the contract and express it as a synthetic asset."""
    diag = bs_call_price(spec)
    return embed_with_leverage(diag.leverage, underlying, market,
                               counts_toward_k=counts_toward_k, diagnostics=diag)


@dataclass(frozen=True)
class AugmentedUniverse:
    """Universe plus one synthetic option asset, with cardinality wiring."""

    universe: Universe
    fc: FactorCovariance
    option_index: int
    counts_toward_k: bool
    overlay_cap: float | None

    def constraints_for(self, base: ConstraintSet) -> ConstraintSet:
        """Adapt a constraint set to the augmented indexing.

        When the option counts toward K the base constraints apply as-is.
        In overlay mode the option is exempt from the cardinality count
        but capped at the explicit overlay cap.
        """
        if self.counts_toward_k:
            return base
        return replace(
            base,
            exempt_indices=base.exempt_indices + (self.option_index,),
            exempt_cap=self.overlay_cap,
        )


def augment_universe(
    universe: Universe,
    fc: FactorCovariance,
    embedding: OptionEmbedding,
    option_id: str | None = None,
    overlay_cap: float | None = None,
) -> AugmentedUniverse:
    """Append the synthetic option asset to the universe and covariance.

    The option correlates with every existing asset through the market
    factor only: Cov(i, option) = beta_i * beta_opt * var_m. Its own
    variance is sigma_opt squared (split into systematic plus backed-out
    residual). Restricting the result to the original assets returns the
    input covariance bit-for-bit.
    """
    if embedding.resid_var is None:
        raise ValueError(
            "embedding has no residual variance (market sigma_m was unknown); "
            "re-embed with sigma_m set before augmenting"
        )
    if not embedding.counts_toward_k and overlay_cap is None:
        raise ValueError(
            "overlay mode (counts_toward_k=False) requires an explicit "
            "overlay_cap; an uncapped overlay could absorb the whole portfolio "
            "outside the cardinality budget"
        )
    if option_id is None:
        option_id = f"CALL:{embedding.underlying_id}"
    if any(a.id == option_id for a in universe.assets):
        raise ValueError(f"asset id {option_id!r} already exists in the universe")
    record = AssetRecord(
        id=option_id,
        name=f"call overlay on {embedding.underlying_id}",
        firms=0,
        beta=embedding.beta_opt,
        sigma=embedding.sigma_opt,
    )
    audit_note = (
        f"augmented with synthetic asset {option_id!r}: "
        f"leverage={embedding.leverage:.6g}, beta_opt={embedding.beta_opt:.6g}, "
        f"sigma_opt={embedding.sigma_opt:.6g}, "
        f"counts_toward_k={embedding.counts_toward_k}"
    )
    universe2 = Universe(
        assets=universe.assets + (record,),
        market=universe.market,
        audit=universe.audit + (audit_note,),
    )
    fc2 = FactorCovariance(
        beta=np.append(fc.beta, embedding.beta_opt),
        var_m=fc.var_m,
        resid_var=np.append(fc.resid_var, embedding.resid_var),
        clipped_ids=fc.clipped_ids,
    )
    return AugmentedUniverse(
        universe=universe2,
        fc=fc2,
        option_index=universe.n,
        counts_toward_k=embedding.counts_toward_k,
        overlay_cap=overlay_cap,
    )


@dataclass(frozen=True)
class GridRow:
    """One moneyness/maturity grid point with pricing and embedding."""

    moneyness: float
    maturity: float
    strike: float
    diagnostics: OptionDiagnostics
    embedding: OptionEmbedding


def option_grid(
    spec_base: OptionSpec,
    moneyness: list[float],
    maturities: list[float],
    underlying: AssetRecord,
    market: MarketParams,
) -> list[GridRow]:
    """Sweep strike (as a fraction of spot) and maturity.

    Rows are grouped by moneyness, then by maturity, matching the usual
    presentation of such grids.
    """
    if not moneyness or not maturities:
        raise ValueError("moneyness and maturities lists must be nonempty")
    rows = []
    for m in moneyness:
        for t in maturities:
            spec = replace(spec_base, strike=m * spec_base.s0, maturity=t)
            diag = bs_call_price(spec)
            emb = embed_with_leverage(diag.leverage, underlying, market,
                                      diagnostics=diag)
            rows.append(GridRow(moneyness=m, maturity=t, strike=spec.strike,
                                diagnostics=diag, embedding=emb))
    return rows


@dataclass(frozen=True)
class BumpResult:
    """Delta-approximation error for a symmetric relative spot move."""

    bump: float
    c0: float
    delta: float
    c_approx_up: float
    c_approx_dn: float
    c_repriced_up: float
    c_repriced_dn: float
    relerr_up: float
    relerr_dn: float


def bump_test(spec: OptionSpec, bump: float = 0.01) -> BumpResult:
    """Compare the delta-linear value change against full repricing.

    relerr = (C_approx - C_repriced) / C_repriced for each direction. For
    a call both errors are nonpositive: the payoff is convex in the spot,
    so the tangent line sits below the price curve on both sides.
    """
    if not abs(bump) < 0.5:
        raise ValueError(f"bump must satisfy |bump| < 0.5, got {bump}")
    diag = bs_call_price(spec)
    move = diag.delta * bump * spec.s0
    c_approx_up = diag.price + move
    c_approx_dn = diag.price - move
    c_up = bs_call_price(replace(spec, s0=spec.s0 * (1.0 + bump))).price
    c_dn = bs_call_price(replace(spec, s0=spec.s0 * (1.0 - bump))).price
    return BumpResult(
        bump=bump,
        c0=diag.price,
        delta=diag.delta,
        c_approx_up=c_approx_up,
        c_approx_dn=c_approx_dn,
        c_repriced_up=c_up,
        c_repriced_dn=c_dn,
        relerr_up=(c_approx_up - c_up) / c_up,
        relerr_dn=(c_approx_dn - c_dn) / c_dn,
    )
