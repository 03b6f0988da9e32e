"""Kernel profiles and the fixed, sample-point and balloon density estimators.

All estimators accept a single evaluation point of shape ``(d,)`` (returning a
float) or a batch of shape ``(m, d)`` (returning an array of length m).
"""

from __future__ import annotations

import enum
import math
from typing import Callable

import numpy as np

from .core import BandwidthMatrix, DomainError, PointSet, bandwidth_array


class Kernel(enum.Enum):
    GAUSSIAN = "gaussian"
    EPANECHNIKOV = "epanechnikov"

    def profile(self, t):
        """Profile k(t), with K(x) = c_k * k(|x|^2)."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0):
            raise DomainError("profile argument must be >= 0")
        if self is Kernel.GAUSSIAN:
            out = np.exp(-0.5 * t)
        else:
            out = np.where(t <= 1.0, 1.0 - t, 0.0)
        return float(out) if out.ndim == 0 else out

    def g(self, t):
        """g(t) = -k'(t). For the Gaussian profile this is +k(t)/2."""
        if self is not Kernel.GAUSSIAN:
            raise DomainError("g is only defined here for the Gaussian profile")
        return 0.5 * np.asarray(self.profile(t))

    def normalization(self, d: int) -> float:
        """c_k making K integrate to one in R^d."""
        if self is Kernel.GAUSSIAN:
            return (2.0 * math.pi) ** (-d / 2.0)
        # unit-ball volume V_d; integral of (1 - |x|^2) over the ball is 2 V_d / (d + 2)
        unit_ball = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
        return (d + 2.0) / (2.0 * unit_ball)


def profile_eval(kernel: Kernel, t):
    return kernel.profile(t)


def _eval_points(x, d: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != d:
        raise DomainError(f"evaluation point dimension {x2.shape[-1]} != data dimension {d}")
    return x2, single


def _mahalanobis_rows(x: np.ndarray, data: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """(m, n) matrix of squared Mahalanobis distances; diag is (d,) or (n, d)."""
    diff = x[:, None, :] - data[None, :, :]
    return np.sum(diff * diff / diag, axis=-1)


def kde_fixed(data: PointSet, H: BandwidthMatrix, x, kernel: Kernel = Kernel.GAUSSIAN):
    """Fixed-bandwidth estimate c_k / (n |H|^1/2) * sum_i k(D^2(x, x_i, H))."""
    pts = data.points
    n, d = pts.shape
    if H.dim != d:
        raise DomainError(f"bandwidth dimension {H.dim} != data dimension {d}")
    xs, single = _eval_points(x, d)
    d2 = _mahalanobis_rows(xs, pts, H.diag)
    vals = kernel.normalization(d) / (n * H.sqrt_det) * np.sum(kernel.profile(d2), axis=1)
    return float(vals[0]) if single else vals


def kde_sample_point(data: PointSet, bandwidths, x, kernel: Kernel = Kernel.GAUSSIAN):
    """Sample-point estimate: each data point carries its own bandwidth H(x_i)."""
    pts = data.points
    n, d = pts.shape
    diag = bandwidth_array(bandwidths, n, d)
    xs, single = _eval_points(x, d)
    d2 = _mahalanobis_rows(xs, pts, diag)
    inv_sqrt_det = 1.0 / np.prod(np.sqrt(diag), axis=1)
    vals = kernel.normalization(d) / n * (kernel.profile(d2) @ inv_sqrt_det)
    return float(vals[0]) if single else vals


def kde_balloon(data: PointSet, H_at_x: BandwidthMatrix, x, kernel: Kernel = Kernel.GAUSSIAN):
    """Balloon estimate with the bandwidth attached to the estimation point.

    For one estimation point this is the fixed estimator evaluated with H(x).
    """
    return kde_fixed(data, H_at_x, x, kernel)


def empirical_mse(estimator: Callable, true_density: Callable, eval_points) -> float:
    """Mean over ``eval_points`` of (estimate - truth)^2.

    Both callables take one evaluation point and return a float.
    """
    pts = [np.asarray(p, dtype=np.float64) for p in eval_points]
    if not pts:
        raise DomainError("eval_points must be non-empty")
    errs = [(float(estimator(p)) - float(true_density(p))) ** 2 for p in pts]
    return float(np.mean(errs))
