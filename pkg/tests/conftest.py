"""Shared fixtures and independent oracles.

The oracles here are deliberately naive (pure Python loops, ``math``) so they
share no code path with the vectorized implementation.
"""

import math

import numpy as np
import pytest

from modeseek import FeatureSpaceLayout, PointSet


def naive_gaussian_kde(points, diags, x):
    """(1/n) sum_i (2 pi)^(-d/2) |H_i|^(-1/2) exp(-0.5 sum_k (x_k - p_ik)^2 / h_ik)."""
    n = len(points)
    d = len(x)
    total = 0.0
    for p, h in zip(points, diags):
        q = 0.0
        det = 1.0
        for k in range(d):
            q += (x[k] - p[k]) ** 2 / h[k]
            det *= h[k]
        total += math.exp(-0.5 * q) / math.sqrt(det)
    return total * (2 * math.pi) ** (-d / 2) / n


def naive_ms_vector(points, diags, x, det_weight):
    """Weighted mean minus x; weights exp(-D^2/2), optionally times |H_i|^(-1/2)."""
    d = len(x)
    num = [0.0] * d
    den = 0.0
    for p, h in zip(points, diags):
        q = sum((x[k] - p[k]) ** 2 / h[k] for k in range(d))
        w = math.exp(-0.5 * q)
        if det_weight:
            w /= math.sqrt(math.prod(h))
        den += w
        for k in range(d):
            num[k] += w * p[k]
    return [num[k] / den - x[k] for k in range(d)]


def two_blobs(seed=0, n_each=20, sep=20.0, jitter=0.1, dim=2):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, jitter, (n_each, dim))
    b = rng.normal(0.0, jitter, (n_each, dim))
    b[:, 0] += sep
    truth = np.repeat([0, 1], n_each)
    return PointSet(np.vstack([a, b])), truth


def mixture(seed, centers, std, n_each):
    rng = np.random.default_rng(seed)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    pts = np.vstack([rng.normal(c, std, (n_each, centers.shape[1])) for c in centers])
    return pts, np.repeat(np.arange(len(centers)), n_each)


def anisotropic_two_domain(seed=0, n_each=50):
    """Four blobs in 2-D: separation 6 (std 0.5) along x, 60 (std 5) along y."""
    rng = np.random.default_rng(seed)
    pts = []
    for cx in (0.0, 6.0):
        for cy in (0.0, 60.0):
            pts.append(np.column_stack([rng.normal(cx, 0.5, n_each), rng.normal(cy, 5.0, n_each)]))
    return PointSet(np.vstack(pts), FeatureSpaceLayout((1, 1)))


# sqrt-bandwidths 0.25, 0.5, ..., 64 (doubling); squared into diagonal entries
ANISO_SCALES = (2.0 ** np.arange(-2, 7)) ** 2


@pytest.fixture
def blobs():
    return two_blobs()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
