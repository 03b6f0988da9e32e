"""Gaussian cluster summaries, Jensen-Shannon divergence and most-stable-scale voting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DomainError, Partition, PointSet


@dataclass(frozen=True, eq=False)
class GaussianSummary:
    """Normal law N(mean, cov) fitted to the members of one cluster."""

    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def same_as(self, other: "GaussianSummary") -> bool:
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)


def regularization(cov: np.ndarray) -> float:
    """Ridge added to every covariance: max(1e-9, 1e-6 * mean diagonal)."""
    return max(1e-9, 1e-6 * float(np.mean(np.diag(cov))))


def summarize_clusters(
    data: PointSet, partition: Partition, domain: int | None = None, regularize: bool = True
) -> list[GaussianSummary]:
    """Mean and population covariance of each cluster, restricted to one domain.

    ``domain=None`` summarizes the full space. Summaries are returned in label
    order. With ``regularize`` the ridge from :func:`regularization` is added,
    which makes singleton and constant clusters positive definite.
    """
    x = data.points if domain is None else data.domain(domain)
    labels = partition.labels
    if labels.shape[0] != x.shape[0]:
        raise DomainError("partition does not cover the data")
    k = partition.cluster_count
    dim = x.shape[1]
    counts = np.bincount(labels, minlength=k)
    means = np.stack([np.bincount(labels, weights=x[:, a], minlength=k) for a in range(dim)], axis=1)
    means /= counts[:, None]
    centered = x - means[labels]
    covs = np.empty((k, dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            s = np.bincount(labels, weights=centered[:, a] * centered[:, b], minlength=k) / counts
            covs[:, a, b] = s
            covs[:, b, a] = s
    out = []
    for u in range(k):
        cov = covs[u]
        if regularize:
            cov = cov + regularization(cov) * np.eye(dim)
        out.append(GaussianSummary(means[u], cov, int(counts[u])))
    return out


def js_divergence(summaries: Sequence[GaussianSummary]) -> float:
    """Jensen-Shannon divergence between r normal laws.

    ``0.5 * log(|mean cov| / geometric mean of |cov_j|)
    + 0.5 * sum_j (mu_j - mu_bar)^T (sum_j cov_j)^-1 (mu_j - mu_bar)``.

    Note the quadratic form uses the inverse of the *sum* of covariances.
    """
    r = len(summaries)
    if r < 2:
        raise DomainError("need at least two distributions")
    dim = summaries[0].dim
    if any(s.dim != dim for s in summaries):
        raise DomainError("all summaries must share one dimension")
    first = summaries[0]
    if all(first.same_as(s) for s in summaries[1:]):
        return 0.0
    covs = np.stack([s.cov for s in summaries])
    means = np.stack([s.mean for s in summaries])
    cov_sum = covs.sum(axis=0)
    sign, logdet_mean = np.linalg.slogdet(cov_sum / r)
    signs, logdets = np.linalg.slogdet(covs)
    if sign <= 0 or np.any(signs <= 0):
        raise np.linalg.LinAlgError("covariances must be positive definite")
    log_term = 0.5 * (logdet_mean - logdets.mean())
    dev = means - means.mean(axis=0)
    sol = np.linalg.solve(cov_sum, dev.T)
    quad = 0.5 * float(np.sum(dev.T * sol))
    return float(log_term + quad)


@dataclass
class ScaleTable:
    """Partitions and per-cluster summaries (in one domain) for B ordered scales."""

    partitions: list[Partition]
    summaries: list[list[GaussianSummary]]
    domain: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.partitions) < 3:
            raise DomainError("stability voting needs at least three scales")
        if len(self.summaries) != len(self.partitions):
            raise DomainError("one summary list per scale is required")
        for part, summ in zip(self.partitions, self.summaries):
            if part.cluster_count != len(summ):
                raise DomainError("every cluster id must map to a summary")

    @classmethod
    def build(cls, data: PointSet, partitions: list[Partition], domain: int | None = None) -> "ScaleTable":
        return cls(partitions, [summarize_clusters(data, p, domain) for p in partitions], domain)

    @property
    def n_scales(self) -> int:
        return len(self.partitions)

    def point_distribution(self, i: int, b: int) -> GaussianSummary:
        return self.summaries[b][self.partitions[b].labels[i]]

    def triple_js(self, b: int, clusters: tuple[int, int, int]) -> float:
        """JS of the clusters (at scales b-1, b, b+1) a point belongs to."""
        key = (b, clusters)
        val = self._cache.get(key)
        if val is None:
            val = js_divergence([self.summaries[b + off][u] for off, u in zip((-1, 0, 1), clusters)])
            self._cache[key] = val
        return val

    def js_profile(self, i: int) -> np.ndarray:
        """JS value at every interior scale (0-based 1..B-2) for point i."""
        labels = [p.labels[i] for p in self.partitions]
        return np.array(
            [self.triple_js(b, (labels[b - 1], labels[b], labels[b + 1])) for b in range(1, self.n_scales - 1)]
        )


def best_scale_for_point(i: int, table: ScaleTable) -> int:
    """0-based interior scale with the smallest three-scale JS; ties go to the smallest."""
    return int(np.argmin(table.js_profile(i))) + 1


def best_scales(table: ScaleTable) -> tuple[np.ndarray, np.ndarray]:
    """Vote every point at once; returns (0-based best scale, JS at that scale)."""
    labels = np.stack([p.labels for p in table.partitions], axis=1)
    # points sharing a label history across all scales vote identically
    uniq, inverse = np.unique(labels, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    best = np.empty(uniq.shape[0], dtype=np.int64)
    best_js = np.empty(uniq.shape[0])
    for row, hist in enumerate(uniq):
        prof = np.array(
            [table.triple_js(b, (hist[b - 1], hist[b], hist[b + 1])) for b in range(1, table.n_scales - 1)]
        )
        k = int(np.argmin(prof))
        best[row] = k + 1
        best_js[row] = prof[k]
    return best[inverse], best_js[inverse]
