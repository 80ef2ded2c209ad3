"""Portable seeded random number generation.

Every stochastic routine in this package draws from xoshiro256** (Blackman &
Vigna), seeded through splitmix64. Both algorithms are fully specified by a
handful of 64-bit integer operations, so any implementation in any language
that follows the recipes below reproduces the exact same stream:

splitmix64 step (state z, 64-bit wrapping arithmetic):
    z += 0x9E3779B97F4A7C15
    x = z;  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB
    output  x ^ (x >> 31)

xoshiro256** seeding: the four state words are the first four splitmix64
outputs for the given 64-bit seed.

xoshiro256** step (state s0..s3, rotl = 64-bit left rotation):
    result = rotl(s1 * 5, 7) * 9
    t = s1 << 17
    s2 ^= s0;  s3 ^= s1;  s1 ^= s2;  s0 ^= s3
    s2 ^= t;   s3 = rotl(s3, 45)

Derived quantities are defined on top of the raw 64-bit stream, in the order
listed, consuming exactly the draws stated:

* uniform:      (next_u64 >> 11) * 2^-53, in [0, 1)
* below(n):     unbiased bounded integer in [0, n); rejection sampling with
                threshold r = (2^64 - n) mod n, accept u >= r, return u mod n
* exponential:  -log1p(-uniform), mean 1
* normal:       Marsaglia polar method; pairs (u, v) in (-1, 1)^2 are drawn
                until 0 < u^2 + v^2 < 1, the second coordinate is discarded
                (no caching, so consumption stays stream-deterministic)
* gamma(a>=1):  Marsaglia-Tsang squeeze method
* gamma(a<1):   gamma(a + 1) * uniform^(1/a) boost

The compiled kernel backend implements the identical recipes in C (compiled
with -ffp-contract=off), so solver runs are bit-for-bit reproducible across
backends as well as across platforms.
"""

from __future__ import annotations

from math import log, log1p, sqrt

MASK64 = 0xFFFFFFFFFFFFFFFF

GENERATOR_NAME = "xoshiro256** (splitmix64-seeded)"

# 2^-53: spacing of the 53-bit uniform grid
_U53 = 1.0 / 9007199254740992.0


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    x = state
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, (x ^ (x >> 31)) & MASK64


def derive_seed(seed: int, stream: int) -> int:
    """Deterministic per-stream sub-seed: the (stream+1)-th splitmix64 output.

    Solvers use stream 0 for subset search and stream 1 for the continuous
    re-optimization stage, so the two phases never share draws.
    """
    state = seed & MASK64
    out = 0
    for _ in range(stream + 1):
        state, out = splitmix64_next(state)
    return out


class Xoshiro256(object):
    """xoshiro256** stream seeded from a single 64-bit integer."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        state = seed & MASK64
        state, self.s0 = splitmix64_next(state)
        state, self.s1 = splitmix64_next(state)
        state, self.s2 = splitmix64_next(state)
        state, self.s3 = splitmix64_next(state)
        if not (self.s0 | self.s1 | self.s2 | self.s3):
            self.s0 = 1  # all-zero state is the one fixed point; never reachable via splitmix64

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        x = (s1 * 5) & MASK64
        result = (((x << 7) | (x >> 57)) & MASK64) * 9 & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) on the 53-bit grid."""
        return (self.next_u64() >> 11) * _U53

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound); bound >= 1."""
        r = ((1 << 64) - bound) % bound
        while True:
            u = self.next_u64()
            if u >= r:
                return u % bound

    def exponential(self) -> float:
        """Exponential with mean 1."""
        return -log1p(-self.uniform())

    def normal(self) -> float:
        """Standard normal via the Marsaglia polar method (no caching)."""
        while True:
            u = 2.0 * self.uniform() - 1.0
            v = 2.0 * self.uniform() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                return u * sqrt(-2.0 * log(s) / s)

    def gamma(self, shape: float) -> float:
        """Gamma variate with the given shape, scale 1 (Marsaglia-Tsang)."""
        if shape < 1.0:
            g = self.gamma(shape + 1.0)
            u = self.uniform()
            while u <= 0.0:
                u = self.uniform()
            return g * u ** (1.0 / shape)
        d = shape - 1.0 / 3.0
        c = 1.0 / sqrt(9.0 * d)
        while True:
            x = self.normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.uniform()
            if u < 1.0 - 0.0331 * (x * x) * (x * x):
                return d * v
            if u > 0.0 and log(u) < 0.5 * x * x + d * (1.0 - v + log(v)):
                return d * v

    def dirichlet_uniform(self, k: int) -> list[float]:
        """Uniform point on the k-simplex: k exponentials, normalized."""
        draws = [self.exponential() for _ in range(k)]
        total = sum(draws)
        return [d / total for d in draws]

    def dirichlet(self, alphas: list[float]) -> list[float]:
        """Dirichlet(alphas) point: independent gammas, normalized."""
        draws = [self.gamma(a) for a in alphas]
        total = sum(draws)
        if total <= 0.0:
            # all gammas underflowed; fall back to the concentration peak
            asum = sum(alphas)
            return [a / asum for a in alphas]
        return [d / total for d in draws]

    def partial_shuffle(self, items: list, k: int) -> None:
        """Fisher-Yates partial shuffle: after the call, items[:k] is a
        uniform k-sample without replacement."""
        n = len(items)
        for i in range(k):
            j = i + self.below(n - i)
            items[i], items[j] = items[j], items[i]
