"""Portfolio evaluation: moments, Sharpe, risk decomposition, feasibility.

Everything here is a pure function over immutable inputs. Variance is always
computed in factor form, (beta'w)**2 * var_m + sum(w_i**2 * resid_i), which
is O(n) and agrees with the dense quadratic form to 1e-10 relative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from cardfolio.calibration import AssetRecord, FactorCovariance, MarketParams, Universe

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class Portfolio:
    """Support set plus weights on the simplex (weights align with support)."""

    support: tuple[int, ...]
    weights: tuple[float, ...]

    @staticmethod
    def equal_weight(support) -> "Portfolio":
        support = tuple(int(i) for i in support)
        k = len(support)
        return Portfolio(support=support, weights=(1.0 / k,) * k)

    @cached_property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    @cached_property
    def support_array(self) -> np.ndarray:
        return np.array(self.support, dtype=int)

    def full_weights(self, n: int) -> np.ndarray:
        """Dense weight vector over all n assets (zeros off support)."""
        w = np.zeros(n)
        w[self.support_array] = self.weight_array
        return w

    def validate(self, n: int) -> list[str]:
        errors = []
        if len(self.support) != len(self.weights):
            errors.append("support and weights lengths differ")
        if len(set(self.support)) != len(self.support):
            errors.append("support indices must be distinct")
        if any(i < 0 or i >= n for i in self.support):
            errors.append(f"support index out of range for n={n}")
        if any(w < 0 for w in self.weights):
            errors.append("weights must be nonnegative")
        total = sum(self.weights)
        if abs(total - 1.0) > SIMPLEX_TOL:
            errors.append(f"weights sum to {total!r}, not 1")
        return errors


@dataclass(frozen=True)
class PortfolioEvaluation:
    """Annualized moments of one portfolio.

    variance is stored alongside sigma_p so downstream feasibility checks
    can compare the quadratic form exactly, without a sqrt round-trip.
    """

    mu_p: float
    sigma_p: float
    sharpe: float
    beta_p: float
    variance: float

    def as_record(self) -> dict:
        return {
            "mu_p": self.mu_p,
            "sigma_p": self.sigma_p,
            "sharpe": self.sharpe,
            "beta_p": self.beta_p,
            "variance": self.variance,
        }


@dataclass(frozen=True)
class ConstraintSet:
    """Feasible-set description for the K-sparse selection problem.

    weight_cap may be a scalar (uniform cap) or a per-asset array over the
    full universe. exempt_indices lists assets excluded from the cardinality
    count (overlay instruments held outside K); any exempt asset must carry
    an explicit exempt_cap so the overlay cannot silently absorb the
    portfolio.
    """

    k: int
    weight_cap: float | tuple[float, ...] | None = None
    beta_band: tuple[float, float] | None = None
    min_return: float | None = None
    exempt_indices: tuple[int, ...] = ()
    exempt_cap: float | None = None

    def cap_for(self, index: int) -> float | None:
        if index in self.exempt_indices:
            return self.exempt_cap
        if self.weight_cap is None:
            return None
        if isinstance(self.weight_cap, tuple):
            return self.weight_cap[index]
        return self.weight_cap

    def validate(self, n: int) -> list[str]:
        errors = []
        if not 1 <= self.k <= n:
            errors.append(f"k={self.k} outside [1, {n}]")
        if self.beta_band is not None and self.beta_band[0] > self.beta_band[1]:
            errors.append(f"beta band {self.beta_band} has lo > hi")
        if isinstance(self.weight_cap, tuple) and len(self.weight_cap) != n:
            errors.append(f"per-asset cap length {len(self.weight_cap)} != n={n}")
        if self.exempt_indices and self.exempt_cap is None:
            errors.append("exempt (overlay) assets require an explicit exempt_cap")
        errors.extend(self.structural_infeasibility(n))
        return errors

    def structural_infeasibility(self, n: int) -> list[str]:
        """Cap-vs-cardinality check: K capped assets must be able to hold 1."""
        if self.weight_cap is None:
            return []
        if isinstance(self.weight_cap, tuple):
            caps = sorted((c for c in self.weight_cap), reverse=True)
            reachable = sum(caps[: self.k])
        else:
            reachable = self.k * self.weight_cap
        if self.exempt_cap is not None and self.exempt_indices:
            reachable += self.exempt_cap * len(self.exempt_indices)
        if reachable < 1.0 - SIMPLEX_TOL:
            return [
                f"structurally infeasible: k={self.k} capped assets can hold at most "
                f"{reachable:.6g} < 1 of total weight"
            ]
        return []


def evaluate(portfolio: Portfolio, universe: Universe, fc: FactorCovariance) -> PortfolioEvaluation:
    """Moments and Sharpe of a portfolio under the calibrated model.

    A zero-volatility portfolio gets a signed-infinity Sharpe sentinel (0.0
    if its return equals rf) so distribution reports can filter degenerate
    cases instead of aborting.
    """
    idx = portfolio.support_array
    w = portfolio.weight_array
    mu_p = float(np.dot(w, universe.mu[idx]))
    beta_p = float(np.dot(w, fc.beta[idx]))
    variance = beta_p * beta_p * fc.var_m + float(np.dot(w * w, fc.resid_var[idx]))
    sigma_p = math.sqrt(variance) if variance > 0.0 else 0.0
    rf = universe.market.rf
    if sigma_p > 0.0:
        sharpe = (mu_p - rf) / sigma_p
    else:
        excess = mu_p - rf
        sharpe = 0.0 if excess == 0.0 else math.copysign(math.inf, excess)
        logger.warning(
            "degenerate riskless portfolio (sigma_p=0); sharpe sentinel %r", sharpe
        )
    return PortfolioEvaluation(
        mu_p=mu_p, sigma_p=sigma_p, sharpe=sharpe, beta_p=beta_p, variance=variance
    )


def capm_sharpe_proxy(asset: AssetRecord, market: MarketParams) -> float:
    """Screening score (beta * erp) / sigma.

    This is the CAPM-implied excess return per unit of total volatility; it
    ranks assets for greedy selection and is not a realized Sharpe ratio.
    """
    return asset.beta * market.erp / asset.sigma


def risk_contributions(portfolio: Portfolio, fc: FactorCovariance) -> np.ndarray:
    """Euler variance shares w_i (Sigma w)_i / (w' Sigma w), over the support."""
    idx = portfolio.support_array
    w = portfolio.weight_array
    sub = fc.restrict(idx)
    sigma_w = sub.matvec(w)
    total = float(np.dot(w, sigma_w))
    if total <= 0.0:
        raise ValueError("risk contributions undefined for a zero-variance portfolio")
    return w * sigma_w / total


def turnover(current: Portfolio, reference: Portfolio | None = None) -> float:
    """Half the L1 distance between weight vectors, over the union of supports.

    reference=None compares against equal weight on the current support,
    isolating the cost of moving away from the naive allocation.
    """
    if reference is None:
        reference = Portfolio.equal_weight(current.support)
    union = sorted(set(current.support) | set(reference.support))
    cur = dict(zip(current.support, current.weights))
    ref = dict(zip(reference.support, reference.weights))
    return 0.5 * sum(abs(cur.get(i, 0.0) - ref.get(i, 0.0)) for i in union)


def net_sharpe(
    portfolio: Portfolio,
    reference: Portfolio | None,
    cost_rate: float,
    universe: Universe,
    fc: FactorCovariance,
) -> PortfolioEvaluation:
    """Evaluation with expected return penalized by cost_rate * turnover.

    Volatility is unchanged; only the excess return (and hence Sharpe)
    shrinks with the rebalancing cost.
    """
    if cost_rate < 0:
        raise ValueError(f"cost_rate must be nonnegative, got {cost_rate}")
    base = evaluate(portfolio, universe, fc)
    mu_net = base.mu_p - cost_rate * turnover(portfolio, reference)
    if base.sigma_p > 0.0:
        sharpe = (mu_net - universe.market.rf) / base.sigma_p
    else:
        sharpe = base.sharpe
    return PortfolioEvaluation(
        mu_p=mu_net,
        sigma_p=base.sigma_p,
        sharpe=sharpe,
        beta_p=base.beta_p,
        variance=base.variance,
    )


def scalarized_objective(evaluation: PortfolioEvaluation, risk_aversion: float) -> float:
    """Alternative fitness: w'Sigma w - lambda * mu'w, to be minimized."""
    return evaluation.variance - risk_aversion * evaluation.mu_p


def verify_decision(
    portfolio: Portfolio,
    v_star: float,
    r_star: float,
    constraints: ConstraintSet,
    universe: Universe,
    fc: FactorCovariance,
) -> tuple[bool, list[str]]:
    """Polynomial-time feasibility certificate for the decision problem.

    Checks variance <= v_star, expected return >= r_star, the simplex
    constraints, the cardinality bound (exempt overlay assets do not count),
    and the optional weight cap and beta band. Every violation is collected
    and returned; violations are data, not errors.
    """
    violations = list(
        f"portfolio invalid: {e}" for e in portfolio.validate(universe.n)
    )
    ev = evaluate(portfolio, universe, fc)
    if ev.variance > v_star:
        violations.append(f"variance {ev.variance:.12g} exceeds bound {v_star:.12g}")
    if ev.mu_p < r_star:
        violations.append(f"expected return {ev.mu_p:.12g} below target {r_star:.12g}")
    counted = [i for i in portfolio.support if i not in constraints.exempt_indices]
    if len(counted) > constraints.k:
        violations.append(
            f"cardinality violation: {len(counted)} counted assets > k={constraints.k}"
        )
    for i, w in zip(portfolio.support, portfolio.weights):
        cap = constraints.cap_for(i)
        if cap is not None and w > cap + SIMPLEX_TOL:
            violations.append(f"weight cap violation: w[{i}]={w:.12g} > cap {cap:.12g}")
    if constraints.beta_band is not None:
        # 1e-12 absorbs accumulation-order differences between evaluation
        # paths for portfolios sitting exactly on the band boundary.
        lo, hi = constraints.beta_band
        if not lo - 1e-12 <= ev.beta_p <= hi + 1e-12:
            violations.append(
                f"beta band violation: beta_p={ev.beta_p:.12g} outside [{lo}, {hi}]"
            )
    return not violations, violations
