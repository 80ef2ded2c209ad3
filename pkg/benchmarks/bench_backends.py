"""Timing comparison between the compiled kernels and the pure-Python reference.

Both backends are called with identical inputs; results are checked for
bit-identity before any timing is reported, so a speedup claim can never
hide a numerical divergence. Times are best-of-N wall clock.

Usage:
    python benchmarks/bench_backends.py [--n 40] [--k 8] [--draws 20000]
                                        [--budget 4000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from cardfolio._kernels import get_backend
from cardfolio.calibration import build_factor_covariance
from cardfolio.experiments import make_random_universe

NAN = float("nan")
NEG_INF = float("-inf")
POS_INF = float("inf")


def best_of(repeats, fn):
    best = math.inf
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def identical(a, b) -> bool:
    """Bitwise comparison that treats NaN as equal to NaN."""
    if isinstance(a, dict):
        return set(a) == set(b) and all(identical(a[key], b[key]) for key in a)
    if isinstance(a, (list, tuple)):
        if b is None or len(a) != len(b):
            return False
        return all(identical(x, y) for x, y in zip(a, b))
    if a is None:
        return b is None
    if isinstance(a, float) and isinstance(b, float):
        if math.isnan(a) and math.isnan(b):
            return True
        return a == b and math.copysign(1.0, a) == math.copysign(1.0, b)
    return a == b


def normalize(result):
    """Kernel outputs as plain lists so native arrays compare with pyref lists."""
    out = {}
    for key, value in result.items():
        if hasattr(value, "tolist"):
            out[key] = value.tolist()
        elif isinstance(value, (list, tuple)):
            out[key] = [
                v.tolist() if hasattr(v, "tolist") else v for v in value
            ]
        else:
            out[key] = value
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=40, help="universe size")
    parser.add_argument("--k", type=int, default=8, help="subset size")
    parser.add_argument("--draws", type=int, default=20000, help="MC draws")
    parser.add_argument(
        "--enum-n", type=int, default=18, help="universe size for enumeration"
    )
    parser.add_argument(
        "--enum-k", type=int, default=6, help="subset size for enumeration"
    )
    parser.add_argument("--budget", type=int, default=4000, help="reopt draws")
    parser.add_argument("--repeats", type=int, default=3, help="best-of repeats")
    parser.add_argument("--seed", type=int, default=7, help="instance seed")
    args = parser.parse_args()

    try:
        native = get_backend("native")
    except ImportError:
        print("compiled extension is not built; nothing to compare")
        return 1
    python = get_backend("python")

    universe = make_random_universe(args.n, seed=args.seed)
    fc = build_factor_covariance(universe)
    mu = universe.mu
    beta = fc.beta
    resid = fc.resid_var
    caps = np.full(args.n, POS_INF)
    common = dict(var_m=fc.var_m, rf=universe.market.rf)

    small = make_random_universe(args.enum_n, seed=args.seed)
    small_fc = build_factor_covariance(small)
    small_caps = np.full(args.enum_n, POS_INF)

    support = list(range(args.k))
    w_init = [1.0 / args.k] * args.k

    cases = [
        (
            f"mc equal-weight ({args.draws} draws, n={args.n}, k={args.k})",
            lambda backend: backend.mc_search(
                args.n, args.k, args.draws, 1, mu, beta, resid,
                common["var_m"], common["rf"], 0, caps,
                NEG_INF, POS_INF, NEG_INF, NAN, 100,
                max(1, args.draws // 200),
            ),
        ),
        (
            f"mc dirichlet ({args.draws} draws, n={args.n}, k={args.k})",
            lambda backend: backend.mc_search(
                args.n, args.k, args.draws, 1, mu, beta, resid,
                common["var_m"], common["rf"], 1, caps,
                NEG_INF, POS_INF, NEG_INF, NAN, 100,
                max(1, args.draws // 200),
            ),
        ),
        (
            f"enumeration (C({args.enum_n},{args.enum_k})="
            f"{math.comb(args.enum_n, args.enum_k)} subsets)",
            lambda backend: backend.enumerate_search(
                args.enum_n, args.enum_k,
                small.mu, small_fc.beta, small_fc.resid_var,
                small_fc.var_m, small.market.rf, small_caps,
                NEG_INF, POS_INF, NEG_INF, NAN, True,
                max(1, math.comb(args.enum_n, args.enum_k) // 200),
            ),
        ),
        (
            f"weight refinement ({args.budget} draws, k={args.k})",
            lambda backend: backend.dirichlet_reopt(
                support, w_init, args.budget, 1, mu, beta, resid,
                common["var_m"], common["rf"], caps,
                NEG_INF, POS_INF, NEG_INF, NAN, 3, 4.0, 0.05,
            ),
        ),
    ]

    print(f"backend benchmark: best of {args.repeats} runs per case")
    print()
    header = f"{'case':58s} {'python':>10s} {'native':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, call in cases:
        t_py, r_py = best_of(args.repeats, lambda: call(python))
        t_nat, r_nat = best_of(args.repeats, lambda: call(native))
        if not identical(normalize(r_py), normalize(r_nat)):
            print(f"{label:58s} RESULTS DIVERGE between backends")
            return 1
        print(
            f"{label:58s} {t_py * 1e3:9.2f}ms {t_nat * 1e3:9.2f}ms "
            f"{t_py / t_nat:7.1f}x"
        )
    print()
    print("all results bit-identical across backends")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
