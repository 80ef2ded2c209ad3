"""Pure-Python reference kernels for the solver hot loops.

The compiled extension (_native) implements exactly these routines; the two
backends must produce bit-identical outputs for identical inputs. That
contract dictates the style here: explicit left-to-right accumulation loops
over plain floats, no numpy reductions (which reorder sums), and the shared
portable RNG for every draw. Keep the two files in lockstep — any change to
draw order, accumulation order, or branch structure must land in both.

Conventions shared by all kernels:
* caps is a full-length per-asset array (+inf where uncapped); a weight w on
  asset i is feasible iff w <= caps[i] + 1e-9.
* band_lo/band_hi bound portfolio beta, min_ret bounds expected return; pass
  -inf/+inf to disable.
* lam selects the fitness: NaN means Sharpe, otherwise lam*mu_p - variance
  (the scalarized mean-variance objective, maximized).
* infeasible/skipped evaluations log NaN; best tracking starts at -inf so
  NaN never wins.
* checkpoints record (evaluations_so_far, best_fitness) every stride
  evaluations and at the end, once a best exists.
"""

from __future__ import annotations

import math

from cardfolio.randomness import Xoshiro256

CAP_TOL = 1e-9

_NAN = float("nan")
_NEG_INF = float("-inf")


def _fitness(mu_p: float, var: float, rf: float, lam: float) -> float:
    if math.isnan(lam):
        if var > 0.0:
            return (mu_p - rf) / math.sqrt(var)
        excess = mu_p - rf
        if excess == 0.0:
            return 0.0
        return math.copysign(math.inf, excess)
    return lam * mu_p - var


def eval_equal_weight(support, mu, beta, resid, var_m, rf, lam=_NAN) -> float:
    """Fitness of the equal-weight portfolio on the given support."""
    k = len(support)
    w = 1.0 / k
    mu_p = 0.0
    beta_p = 0.0
    wsq = 0.0
    for j in range(k):
        i = support[j]
        mu_p += w * mu[i]
        beta_p += w * beta[i]
        wsq += w * w * resid[i]
    var = beta_p * beta_p * var_m + wsq
    return _fitness(mu_p, var, rf, lam)


def mc_search(
    n,
    k,
    n_draws,
    seed,
    mu,
    beta,
    resid,
    var_m,
    rf,
    dirichlet_weights,
    caps,
    band_lo,
    band_hi,
    min_ret,
    lam,
    max_retries,
    checkpoint_stride,
):
    """Monte Carlo search over uniform K-subsets with simplex weights.

    Each draw takes a Fisher-Yates partial shuffle for the subset, then up
    to max_retries weight draws (one when weights are equal) until the
    draw satisfies the cap/band/return constraints; failures log NaN and
    increment the skip counter. Returns a dict with the evaluation log,
    best subset/weights/fitness, skip count, and checkpoint curves.
    """
    rng = Xoshiro256(seed)
    mu = [float(x) for x in mu]
    beta = [float(x) for x in beta]
    resid = [float(x) for x in resid]
    caps = [float(x) for x in caps]

    idx = list(range(n))
    log = [_NAN] * n_draws
    best_fit = _NEG_INF
    best_subset: list[int] = []
    best_weights: list[float] = []
    n_skipped = 0
    cp_evals: list[int] = []
    cp_best: list[float] = []
    retries = max_retries if dirichlet_weights else 1

    for d in range(n_draws):
        rng.partial_shuffle(idx, k)
        subset = idx[:k]
        accepted = False
        fit = _NAN
        weights = None
        for _attempt in range(retries):
            if dirichlet_weights:
                draws = [rng.exponential() for _ in range(k)]
                total = 0.0
                for e in draws:
                    total += e
                weights = [e / total for e in draws]
            else:
                weights = [1.0 / k] * k
            ok = True
            for j in range(k):
                if weights[j] > caps[subset[j]] + CAP_TOL:
                    ok = False
                    break
            if not ok:
                continue
            mu_p = 0.0
            beta_p = 0.0
            wsq = 0.0
            for j in range(k):
                i = subset[j]
                wj = weights[j]
                mu_p += wj * mu[i]
                beta_p += wj * beta[i]
                wsq += wj * wj * resid[i]
            if beta_p < band_lo or beta_p > band_hi or mu_p < min_ret:
                continue
            var = beta_p * beta_p * var_m + wsq
            fit = _fitness(mu_p, var, rf, lam)
            accepted = True
            break
        if accepted:
            log[d] = fit
            if fit > best_fit:
                best_fit = fit
                pairs = sorted(zip(subset, weights))
                best_subset = [p[0] for p in pairs]
                best_weights = [p[1] for p in pairs]
        else:
            n_skipped += 1
        if ((d + 1) % checkpoint_stride == 0 or d == n_draws - 1) and best_fit > _NEG_INF:
            cp_evals.append(d + 1)
            cp_best.append(best_fit)

    return {
        "log": log,
        "best_fitness": best_fit,
        "best_subset": best_subset,
        "best_weights": best_weights,
        "n_skipped": n_skipped,
        "checkpoint_evals": cp_evals,
        "checkpoint_best": cp_best,
    }


def enumerate_search(
    n,
    k,
    mu,
    beta,
    resid,
    var_m,
    rf,
    caps,
    band_lo,
    band_hi,
    min_ret,
    lam,
    store_log,
    checkpoint_stride,
):
    """Exhaustive equal-weight scan of all C(n,k) subsets, lexicographic.

    Infeasible subsets count as visited but log NaN. Ties keep the first
    (lexicographically smallest) argmax. store_log=False drops the
    per-subset log to bound memory on large instances.
    """
    mu = [float(x) for x in mu]
    beta = [float(x) for x in beta]
    resid = [float(x) for x in resid]
    caps = [float(x) for x in caps]

    total = math.comb(n, k)
    log = [_NAN] * total if store_log else None
    best_fit = _NEG_INF
    best_subset: list[int] = []
    n_skipped = 0
    cp_evals: list[int] = []
    cp_best: list[float] = []

    subset = list(range(k))
    w = 1.0 / k
    count = 0
    while True:
        ok = True
        for j in range(k):
            if w > caps[subset[j]] + CAP_TOL:
                ok = False
                break
        if ok:
            mu_p = 0.0
            beta_p = 0.0
            wsq = 0.0
            for j in range(k):
                i = subset[j]
                mu_p += w * mu[i]
                beta_p += w * beta[i]
                wsq += w * w * resid[i]
            if beta_p < band_lo or beta_p > band_hi or mu_p < min_ret:
                ok = False
            else:
                var = beta_p * beta_p * var_m + wsq
                fit = _fitness(mu_p, var, rf, lam)
                if store_log:
                    log[count] = fit
                if fit > best_fit:
                    best_fit = fit
                    best_subset = subset.copy()
        if not ok:
            n_skipped += 1
        count += 1
        if (count % checkpoint_stride == 0 or count == total) and best_fit > _NEG_INF:
            cp_evals.append(count)
            cp_best.append(best_fit)
        # lexicographic successor
        j = k - 1
        while j >= 0 and subset[j] == j + n - k:
            j -= 1
        if j < 0:
            break
        subset[j] += 1
        for m in range(j + 1, k):
            subset[m] = subset[m - 1] + 1

    return {
        "log": log,
        "best_fitness": best_fit,
        "best_subset": best_subset,
        "best_weights": [w] * k,
        "count": count,
        "n_skipped": n_skipped,
        "checkpoint_evals": cp_evals,
        "checkpoint_best": cp_best,
    }


def dirichlet_reopt(
    support,
    w_init,
    budget,
    seed,
    mu,
    beta,
    resid,
    var_m,
    rf,
    caps,
    band_lo,
    band_hi,
    min_ret,
    lam,
    stages,
    conc_mult,
    alpha_floor,
):
    """Stochastic weight re-optimization on a fixed support.

    Dirichlet local search with an incumbent: the alpha vector concentrates
    around the stage incumbent (alpha = conc * w, floored), and conc grows
    by conc_mult per stage, narrowing the search. Entry 0 of the log is the
    evaluation of w_init itself, so the returned best never falls below the
    starting point. Infeasible draws consume budget and log NaN.
    """
    k = len(support)
    mu_s = [float(mu[i]) for i in support]
    beta_s = [float(beta[i]) for i in support]
    resid_s = [float(resid[i]) for i in support]
    caps_s = [float(caps[i]) for i in support]

    rng = Xoshiro256(seed)
    log = [_NAN] * (budget + 1)

    def eval_weights(weights):
        mu_p = 0.0
        beta_p = 0.0
        wsq = 0.0
        for j in range(k):
            wj = weights[j]
            mu_p += wj * mu_s[j]
            beta_p += wj * beta_s[j]
            wsq += wj * wj * resid_s[j]
        var = beta_p * beta_p * var_m + wsq
        return mu_p, beta_p, var

    w_inc = [float(x) for x in w_init]
    mu_p, beta_p, var = eval_weights(w_inc)
    best_fit = _fitness(mu_p, var, rf, lam)
    best_w = w_inc.copy()
    log[0] = best_fit

    base = budget // stages
    rem = budget - base * stages
    pos = 1
    conc = float(k)
    for s in range(stages):
        stage_draws = base + (1 if s < rem else 0)
        for _d in range(stage_draws):
            gammas = [0.0] * k
            for j in range(k):
                a = conc * w_inc[j]
                if a < alpha_floor:
                    a = alpha_floor
                gammas[j] = rng.gamma(a)
            total = 0.0
            for g in gammas:
                total += g
            if total > 0.0:
                weights = [g / total for g in gammas]
            else:
                weights = w_inc.copy()
            ok = True
            for j in range(k):
                if weights[j] > caps_s[j] + CAP_TOL:
                    ok = False
                    break
            if ok:
                mu_p, beta_p, var = eval_weights(weights)
                if beta_p < band_lo or beta_p > band_hi or mu_p < min_ret:
                    ok = False
                else:
                    fit = _fitness(mu_p, var, rf, lam)
                    log[pos] = fit
                    if fit > best_fit:
                        best_fit = fit
                        best_w = weights
            pos += 1
        w_inc = best_w.copy()
        conc = conc * conc_mult

    return {
        "log": log,
        "best_fitness": best_fit,
        "best_weights": best_w,
    }
