"""Seeded Gaussian-mixture point clouds and label-agreement scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import DomainError


@dataclass(frozen=True)
class Component:
    mean: tuple[float, ...]
    cov: np.ndarray
    count: int

    @classmethod
    def from_dict(cls, spec: dict) -> "Component":
        mean = np.atleast_1d(np.asarray(spec["mean"], dtype=np.float64))
        d = mean.size
        if "cov" in spec:
            cov = np.atleast_2d(np.asarray(spec["cov"], dtype=np.float64))
        elif "std" in spec:
            std = np.broadcast_to(np.asarray(spec["std"], dtype=np.float64), (d,))
            cov = np.diag(std**2)
        else:
            raise DomainError("component needs 'cov' or 'std'")
        if cov.shape != (d, d):
            raise DomainError(f"covariance shape {cov.shape} does not match mean of size {d}")
        if not np.allclose(cov, cov.T) or np.any(np.linalg.eigvalsh(cov) < 0):
            raise DomainError("covariance must be symmetric positive semidefinite")
        count = int(spec.get("count", 0))
        if count < 1:
            raise DomainError(f"component count must be >= 1, got {count}")
        return cls(tuple(mean.tolist()), cov, count)


def sample_mixture(components: Sequence[Component], seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` points from each component; returns (points, true labels)."""
    if not components:
        raise DomainError("mixture needs at least one component")
    d = len(components[0].mean)
    if any(len(c.mean) != d for c in components):
        raise DomainError("all components must share one dimension")
    rng = np.random.default_rng(seed)
    pts, labels = [], []
    for k, comp in enumerate(components):
        pts.append(rng.multivariate_normal(comp.mean, comp.cov, size=comp.count, method="eigh"))
        labels.append(np.full(comp.count, k))
    return np.vstack(pts), np.concatenate(labels)


def label_accuracy(truth, predicted) -> float:
    """Fraction of points agreeing after the best one-to-one label matching."""
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    t_vals, t_idx = np.unique(truth, return_inverse=True)
    p_vals, p_idx = np.unique(predicted, return_inverse=True)
    table = np.zeros((t_vals.size, p_vals.size), dtype=np.int64)
    np.add.at(table, (t_idx, p_idx), 1)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum()) / truth.size
