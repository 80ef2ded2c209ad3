"""Dependence-structure diagnostics and cross-run stability metrics.

Summarizes how strongly the calibrated universe co-moves: off-diagonal
correlation statistics, eigenvalue concentration of the covariance, and a
deterministic hierarchical ordering that places correlated assets next to
each other (the data behind correlation heatmaps). Jaccard overlap
quantifies how stable selected supports are across runs or scenarios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cardfolio.calibration import (
    FactorCovariance,
    Universe,
    correlation_from_covariance,
    materialize_dense,
)

DEFAULT_SHARE_THRESHOLDS = (0.0, 0.5, 0.8)


@dataclass(frozen=True)
class DependenceReport:
    """Correlation and spectrum summary of a calibrated covariance."""

    n: int
    median_offdiag_rho: float
    share_above: dict[float, float]
    share_negative: float
    eig_share_top1: float
    eig_share_top5: float
    min_eig: float
    condition_proxy: float

    def as_record(self) -> dict:
        return {
            "n": self.n,
            "median_offdiag_rho": self.median_offdiag_rho,
            "share_above": {repr(k): v for k, v in self.share_above.items()},
            "share_negative": self.share_negative,
            "eig_share_top1": self.eig_share_top1,
            "eig_share_top5": self.eig_share_top5,
            "min_eig": self.min_eig,
            "condition_proxy": self.condition_proxy,
        }


def dependence_report(
    fc: FactorCovariance,
    share_thresholds: tuple[float, ...] = DEFAULT_SHARE_THRESHOLDS,
) -> DependenceReport:
    """Off-diagonal correlation statistics and eigenvalue concentration.

    The eigenvalue shares are taken against trace(Sigma); the sum of the
    eigenvalues must reproduce the trace to 1e-8 relative, otherwise the
    decomposition itself is suspect and the report fails loudly.
    """
    if fc.n < 2:
        raise ValueError(f"dependence report needs n >= 2 assets, got {fc.n}")
    dense = materialize_dense(fc)
    rho = correlation_from_covariance(dense)
    iu = np.triu_indices(fc.n, k=1)
    off = rho[iu]

    eigs = np.linalg.eigvalsh(dense)[::-1]
    trace = float(np.trace(dense))
    if abs(float(eigs.sum()) - trace) > 1e-8 * max(1.0, abs(trace)):
        raise ArithmeticError(
            f"eigenvalue sum {eigs.sum():.12g} does not reproduce the trace "
            f"{trace:.12g}; covariance decomposition is unreliable"
        )
    positive = eigs[eigs > 0.0]
    condition = float(eigs[0] / positive[-1]) if positive.size else float("inf")
    top5 = int(min(5, fc.n))
    return DependenceReport(
        n=fc.n,
        median_offdiag_rho=float(np.quantile(off, 0.5)),
        share_above={float(t): float(np.mean(off > t)) for t in share_thresholds},
        share_negative=float(np.mean(off < 0.0)),
        eig_share_top1=float(eigs[0] / trace),
        eig_share_top5=float(eigs[:top5].sum() / trace),
        min_eig=float(eigs[-1]),
        condition_proxy=condition,
    )


def jaccard_overlap(support_a, support_b) -> float:
    """Similarity of two selected index sets: |A and B| / |A or B|."""
    a, b = set(support_a), set(support_b)
    if not a or not b:
        raise ValueError("jaccard_overlap requires two nonempty supports")
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class ClusterOrder:
    """Leaf order from agglomerative clustering, with method metadata."""

    order: tuple[int, ...]
    linkage: str
    distance: str


def cluster_order(rho: np.ndarray, subset=None) -> ClusterOrder:
    """Average-linkage agglomerative ordering on distance 1 - rho.

    Returns a permutation of the (optionally filtered) asset indices in
    which correlated assets end up adjacent; this is the row/column order
    for figure-ready correlation submatrices. Fully deterministic: merge
    candidates tie-break on their position in the running cluster list, so
    an identity correlation matrix yields the original index order.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"rho must be square, got shape {rho.shape}")
    indices = list(range(rho.shape[0])) if subset is None else [int(i) for i in subset]
    if len(indices) != len(set(indices)):
        raise ValueError("subset contains duplicate indices")
    if not indices:
        raise ValueError("subset must be nonempty")
    if len(indices) == 1:
        return ClusterOrder(order=(indices[0],), linkage="average",
                            distance="one_minus_rho")

    dist = 1.0 - rho[np.ix_(indices, indices)]
    clusters: list[list[int]] = [[local] for local in range(len(indices))]
    while len(clusters) > 1:
        best = None
        for p in range(len(clusters)):
            for q in range(p + 1, len(clusters)):
                d = float(np.mean(dist[np.ix_(clusters[p], clusters[q])]))
                if best is None or d < best[0]:
                    best = (d, p, q)
        _, p, q = best
        clusters[p] = clusters[p] + clusters[q]
        del clusters[q]
    order = tuple(indices[local] for local in clusters[0])
    return ClusterOrder(order=order, linkage="average", distance="one_minus_rho")


def top_by_firms(universe: Universe, m: int) -> list[int]:
    """Indices of the m assets with the largest firm counts.

    Ties break toward the earlier input position, and the returned indices
    preserve input order (a filter, not a ranking).
    """
    if not 1 <= m <= universe.n:
        raise ValueError(f"m={m} outside [1, {universe.n}]")
    ranked = sorted(range(universe.n),
                    key=lambda i: (-universe.assets[i].firms, i))
    return sorted(ranked[:m])
