# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled solver kernels, bit-identical to the pure-Python reference.

This file mirrors pyref.py line for line where arithmetic happens: the same
portable RNG (splitmix64-seeded xoshiro256**), the same left-to-right
accumulation order, the same libm calls, the same branch structure. The
build uses -ffp-contract=off so the compiler cannot fuse multiply-adds into
differently-rounded FMAs. Do not "optimize" expression shapes here without
making the identical change in pyref.py.
"""

import math

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN, copysign, isnan, log, log1p, pow, sqrt
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef double CAP_TOL = 1e-9
cdef double UNIT53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# portable RNG (matches cardfolio.randomness exactly)

cdef struct XoState:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline uint64_t _rotl(uint64_t x, int r) nogil:
    return (x << r) | (x >> (64 - r))


cdef inline uint64_t _splitmix_next(uint64_t *state) nogil:
    cdef uint64_t x
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15
    x = state[0]
    x = (x ^ (x >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    x = (x ^ (x >> 27)) * <uint64_t>0x94D049BB133111EB
    return x ^ (x >> 31)


cdef void _seed(XoState *st, uint64_t seed) nogil:
    cdef uint64_t state = seed
    st.s0 = _splitmix_next(&state)
    st.s1 = _splitmix_next(&state)
    st.s2 = _splitmix_next(&state)
    st.s3 = _splitmix_next(&state)
    if (st.s0 | st.s1 | st.s2 | st.s3) == 0:
        st.s0 = 1


cdef inline uint64_t _next_u64(XoState *st) nogil:
    cdef uint64_t result = _rotl(st.s1 * <uint64_t>5, 7) * <uint64_t>9
    cdef uint64_t t = st.s1 << 17
    st.s2 ^= st.s0
    st.s3 ^= st.s1
    st.s1 ^= st.s2
    st.s0 ^= st.s3
    st.s2 ^= t
    st.s3 = _rotl(st.s3, 45)
    return result


cdef inline double _uniform(XoState *st) nogil:
    return <double>(_next_u64(st) >> 11) * UNIT53


cdef inline uint64_t _below(XoState *st, uint64_t bound) nogil:
    cdef uint64_t r = (<uint64_t>0 - bound) % bound
    cdef uint64_t u
    while True:
        u = _next_u64(st)
        if u >= r:
            return u % bound


cdef inline double _exponential(XoState *st) nogil:
    return -log1p(-_uniform(st))


cdef inline double _normal(XoState *st) nogil:
    cdef double u, v, s
    while True:
        u = 2.0 * _uniform(st) - 1.0
        v = 2.0 * _uniform(st) - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            return u * sqrt(-2.0 * log(s) / s)


cdef double _gamma(XoState *st, double shape) nogil:
    cdef double g, u, d, c, x, v
    if shape < 1.0:
        g = _gamma(st, shape + 1.0)
        u = _uniform(st)
        while u <= 0.0:
            u = _uniform(st)
        return g * pow(u, 1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / sqrt(9.0 * d)
    while True:
        x = _normal(st)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = _uniform(st)
        if u < 1.0 - 0.0331 * (x * x) * (x * x):
            return d * v
        if u > 0.0 and log(u) < 0.5 * x * x + d * (1.0 - v + log(v)):
            return d * v


cdef void _partial_shuffle(XoState *st, int64_t[::1] items, Py_ssize_t k) nogil:
    cdef Py_ssize_t n = items.shape[0]
    cdef Py_ssize_t i, j
    cdef int64_t tmp
    for i in range(k):
        j = i + <Py_ssize_t>_below(st, <uint64_t>(n - i))
        tmp = items[i]
        items[i] = items[j]
        items[j] = tmp


# ---------------------------------------------------------------------------
# shared evaluation pieces

cdef inline double _fitness(double mu_p, double var, double rf, double lam) nogil:
    cdef double excess
    if isnan(lam):
        if var > 0.0:
            return (mu_p - rf) / sqrt(var)
        excess = mu_p - rf
        if excess == 0.0:
            return 0.0
        return copysign(INFINITY, excess)
    return lam * mu_p - var


def eval_equal_weight(support, double[::1] mu, double[::1] beta, double[::1] resid,
                      double var_m, double rf, double lam=NAN):
    """Fitness of the equal-weight portfolio on the given support."""
    cdef int64_t[::1] sup = np.ascontiguousarray(support, dtype=np.int64)
    cdef Py_ssize_t k = sup.shape[0]
    cdef double w = 1.0 / <double>k
    cdef double mu_p = 0.0, beta_p = 0.0, wsq = 0.0, var
    cdef Py_ssize_t j
    cdef int64_t i
    for j in range(k):
        i = sup[j]
        mu_p += w * mu[i]
        beta_p += w * beta[i]
        wsq += w * w * resid[i]
    var = beta_p * beta_p * var_m + wsq
    return _fitness(mu_p, var, rf, lam)


cdef void _sort_pairs(int64_t *subset, double *weights, Py_ssize_t k) nogil:
    # insertion sort by asset index; indices are distinct
    cdef Py_ssize_t a, b
    cdef int64_t si
    cdef double wi
    for a in range(1, k):
        si = subset[a]
        wi = weights[a]
        b = a - 1
        while b >= 0 and subset[b] > si:
            subset[b + 1] = subset[b]
            weights[b + 1] = weights[b]
            b -= 1
        subset[b + 1] = si
        weights[b + 1] = wi


# ---------------------------------------------------------------------------
# kernels

def mc_search(Py_ssize_t n, Py_ssize_t k, Py_ssize_t n_draws, seed,
              double[::1] mu, double[::1] beta, double[::1] resid,
              double var_m, double rf, bint dirichlet_weights,
              double[::1] caps, double band_lo, double band_hi,
              double min_ret, double lam, int max_retries,
              Py_ssize_t checkpoint_stride):
    """Monte Carlo search over uniform K-subsets with simplex weights."""
    cdef XoState st
    _seed(&st, <uint64_t>(<object>seed & 0xFFFFFFFFFFFFFFFF))

    idx_arr = np.arange(n, dtype=np.int64)
    cdef int64_t[::1] idx = idx_arr
    log_arr = np.full(n_draws, np.nan)
    cdef double[::1] log = log_arr
    draws_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] draws = draws_arr
    weights_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] weights = weights_arr
    best_subset_arr = np.empty(k, dtype=np.int64)
    cdef int64_t[::1] best_subset = best_subset_arr
    best_weights_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] best_weights = best_weights_arr

    cdef double best_fit = -INFINITY
    cdef Py_ssize_t n_skipped = 0
    cp_evals = []
    cp_best = []
    cdef int retries = max_retries if dirichlet_weights else 1
    cdef Py_ssize_t d, j, attempt
    cdef int64_t i
    cdef bint accepted, ok, have_best = False
    cdef double fit, total, mu_p, beta_p, wsq, var, wj

    for d in range(n_draws):
        _partial_shuffle(&st, idx, k)
        accepted = False
        fit = NAN
        for attempt in range(retries):
            if dirichlet_weights:
                total = 0.0
                for j in range(k):
                    draws[j] = _exponential(&st)
                for j in range(k):
                    total += draws[j]
                for j in range(k):
                    weights[j] = draws[j] / total
            else:
                for j in range(k):
                    weights[j] = 1.0 / <double>k
            ok = True
            for j in range(k):
                if weights[j] > caps[idx[j]] + CAP_TOL:
                    ok = False
                    break
            if not ok:
                continue
            mu_p = 0.0
            beta_p = 0.0
            wsq = 0.0
            for j in range(k):
                i = idx[j]
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
                have_best = True
                for j in range(k):
                    best_subset[j] = idx[j]
                    best_weights[j] = weights[j]
                _sort_pairs(&best_subset[0], &best_weights[0], k)
        else:
            n_skipped += 1
        if ((d + 1) % checkpoint_stride == 0 or d == n_draws - 1) and best_fit > -INFINITY:
            cp_evals.append(d + 1)
            cp_best.append(best_fit)

    return {
        "log": log_arr,
        "best_fitness": best_fit,
        "best_subset": best_subset_arr.tolist() if have_best else [],
        "best_weights": best_weights_arr.tolist() if have_best else [],
        "n_skipped": n_skipped,
        "checkpoint_evals": cp_evals,
        "checkpoint_best": cp_best,
    }


def enumerate_search(Py_ssize_t n, Py_ssize_t k,
                     double[::1] mu, double[::1] beta, double[::1] resid,
                     double var_m, double rf, double[::1] caps,
                     double band_lo, double band_hi, double min_ret,
                     double lam, bint store_log, Py_ssize_t checkpoint_stride):
    """Exhaustive equal-weight scan of all C(n,k) subsets, lexicographic."""
    total_count = math.comb(n, k)
    cdef Py_ssize_t total = total_count
    # dummy 1-element buffer when the log is not kept; writes are guarded
    log_arr = np.full(total if store_log else 1, np.nan)
    cdef double[::1] log = log_arr
    subset_arr = np.arange(k, dtype=np.int64)
    cdef int64_t[::1] subset = subset_arr
    best_subset_arr = np.empty(k, dtype=np.int64)
    cdef int64_t[::1] best_subset = best_subset_arr

    cdef double best_fit = -INFINITY
    cdef Py_ssize_t n_skipped = 0, count = 0
    cp_evals = []
    cp_best = []
    cdef double w = 1.0 / <double>k
    cdef Py_ssize_t j, m
    cdef int64_t i
    cdef bint ok, have_best = False
    cdef double mu_p, beta_p, wsq, var, fit

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
                    have_best = True
                    for j in range(k):
                        best_subset[j] = subset[j]
        if not ok:
            n_skipped += 1
        count += 1
        if (count % checkpoint_stride == 0 or count == total) and best_fit > -INFINITY:
            cp_evals.append(count)
            cp_best.append(best_fit)
        j = k - 1
        while j >= 0 and subset[j] == j + n - k:
            j -= 1
        if j < 0:
            break
        subset[j] += 1
        for m in range(j + 1, k):
            subset[m] = subset[m - 1] + 1

    return {
        "log": log_arr if store_log else None,
        "best_fitness": best_fit,
        "best_subset": best_subset_arr.tolist() if have_best else [],
        "best_weights": [w] * k,
        "count": count,
        "n_skipped": n_skipped,
        "checkpoint_evals": cp_evals,
        "checkpoint_best": cp_best,
    }


def dirichlet_reopt(support, w_init, Py_ssize_t budget, seed,
                    double[::1] mu, double[::1] beta, double[::1] resid,
                    double var_m, double rf, double[::1] caps,
                    double band_lo, double band_hi, double min_ret,
                    double lam, int stages, double conc_mult, double alpha_floor):
    """Stochastic weight re-optimization on a fixed support."""
    cdef int64_t[::1] sup = np.ascontiguousarray(support, dtype=np.int64)
    cdef Py_ssize_t k = sup.shape[0]
    mu_s_arr = np.empty(k)
    beta_s_arr = np.empty(k)
    resid_s_arr = np.empty(k)
    caps_s_arr = np.empty(k)
    cdef double[::1] mu_s = mu_s_arr
    cdef double[::1] beta_s = beta_s_arr
    cdef double[::1] resid_s = resid_s_arr
    cdef double[::1] caps_s = caps_s_arr
    cdef Py_ssize_t j
    for j in range(k):
        mu_s[j] = mu[sup[j]]
        beta_s[j] = beta[sup[j]]
        resid_s[j] = resid[sup[j]]
        caps_s[j] = caps[sup[j]]

    cdef XoState st
    _seed(&st, <uint64_t>(<object>seed & 0xFFFFFFFFFFFFFFFF))

    log_arr = np.full(budget + 1, np.nan)
    cdef double[::1] log = log_arr
    w_inc_arr = np.ascontiguousarray(w_init, dtype=np.float64).copy()
    cdef double[::1] w_inc = w_inc_arr
    best_w_arr = w_inc_arr.copy()
    cdef double[::1] best_w = best_w_arr
    gammas_arr = np.empty(k)
    cdef double[::1] gammas = gammas_arr
    weights_arr = np.empty(k)
    cdef double[::1] weights = weights_arr

    cdef double mu_p = 0.0, beta_p = 0.0, wsq = 0.0, var, wj, fit, a, total
    for j in range(k):
        wj = w_inc[j]
        mu_p += wj * mu_s[j]
        beta_p += wj * beta_s[j]
        wsq += wj * wj * resid_s[j]
    var = beta_p * beta_p * var_m + wsq
    cdef double best_fit = _fitness(mu_p, var, rf, lam)
    log[0] = best_fit

    cdef Py_ssize_t base = budget // stages
    cdef Py_ssize_t rem = budget - base * stages
    cdef Py_ssize_t pos = 1
    cdef double conc = <double>k
    cdef Py_ssize_t s, d, stage_draws
    cdef bint ok

    for s in range(stages):
        stage_draws = base + (1 if s < rem else 0)
        for d in range(stage_draws):
            for j in range(k):
                a = conc * w_inc[j]
                if a < alpha_floor:
                    a = alpha_floor
                gammas[j] = _gamma(&st, a)
            total = 0.0
            for j in range(k):
                total += gammas[j]
            if total > 0.0:
                for j in range(k):
                    weights[j] = gammas[j] / total
            else:
                for j in range(k):
                    weights[j] = w_inc[j]
            ok = True
            for j in range(k):
                if weights[j] > caps_s[j] + CAP_TOL:
                    ok = False
                    break
            if ok:
                mu_p = 0.0
                beta_p = 0.0
                wsq = 0.0
                for j in range(k):
                    wj = weights[j]
                    mu_p += wj * mu_s[j]
                    beta_p += wj * beta_s[j]
                    wsq += wj * wj * resid_s[j]
                if beta_p < band_lo or beta_p > band_hi or mu_p < min_ret:
                    ok = False
                else:
                    var = beta_p * beta_p * var_m + wsq
                    fit = _fitness(mu_p, var, rf, lam)
                    log[pos] = fit
                    if fit > best_fit:
                        best_fit = fit
                        for j in range(k):
                            best_w[j] = weights[j]
            pos += 1
        for j in range(k):
            w_inc[j] = best_w[j]
        conc = conc * conc_mult

    return {
        "log": log_arr,
        "best_fitness": best_fit,
        "best_weights": best_w_arr.tolist(),
    }
