"""Mean shift vectors, mode seeking and partitioning.

Three variants share one batched trajectory engine:

* ``FIXED``: one global bandwidth.
* ``SAMPLE_POINT``: each data point carries its own bandwidth; weights are
  scaled by ``|H(x_i)|^-1/2``.
* ``PSEUDO_BALLOON``: each trajectory uses the bandwidth of its starting
  point, held constant until convergence.

Only the Gaussian kernel is used for mode seeking.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    BandwidthMatrix,
    DomainError,
    Partition,
    PointSet,
    Trajectory,
    bandwidth_array,
)

# relative slack allowed in the monotone-ascent check
ASCENT_RTOL = 1e-12
# target sizes (elements) of trajectory-by-data and mode-by-mode blocks
_BLOCK_ELEMENTS = 1 << 17
_GROUP_BLOCK_ELEMENTS = 1 << 20


class Variant(enum.Enum):
    FIXED = "fixed"
    SAMPLE_POINT = "sample-point"
    PSEUDO_BALLOON = "balloon"


class IsolatedPointError(ArithmeticError):
    """All kernel weights underflowed: the point has no neighbors at this bandwidth."""


@dataclass(frozen=True)
class MeanShiftConfig:
    eps: float = 1e-6
    max_iters: int = 500
    variant: Variant = Variant.FIXED

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise DomainError(f"convergence eps must be > 0, got {self.eps}")
        if int(self.max_iters) < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")


# ---------------------------------------------------------------------------
# single-point mean shift vectors (direct formulas)
# ---------------------------------------------------------------------------


def _weighted_shift(x: np.ndarray, pts: np.ndarray, weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if total == 0.0:
        raise IsolatedPointError("all kernel weights underflowed to zero")
    return (weights @ pts) / total - x


def _check_point(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise DomainError(f"point shape {x.shape} != ({d},)")
    return x


def ms_vector_fixed(x, data: PointSet, H: BandwidthMatrix) -> np.ndarray:
    """Gaussian mean shift vector with a fixed bandwidth."""
    pts = data.points
    x = _check_point(x, pts.shape[1])
    diff = pts - x
    d2 = np.sum(diff * diff / H.diag, axis=1)
    return _weighted_shift(x, pts, np.exp(-0.5 * d2))


def ms_vector_sample_point(x, data: PointSet, bandwidths) -> np.ndarray:
    """Mean shift vector of the sample-point estimator."""
    pts = data.points
    n, d = pts.shape
    diag = bandwidth_array(bandwidths, n, d)
    x = _check_point(x, d)
    diff = pts - x
    d2 = np.sum(diff * diff / diag, axis=1)
    weights = np.exp(-0.5 * d2) / np.prod(np.sqrt(diag), axis=1)
    return _weighted_shift(x, pts, weights)


def ms_vector_balloon(x, data: PointSet, H_fixed_for_trajectory: BandwidthMatrix) -> np.ndarray:
    """Pseudo-balloon mean shift vector.

    The bandwidth is the one of the trajectory's starting point; with it held
    constant the vector coincides with the fixed-bandwidth one.
    """
    return ms_vector_fixed(x, data, H_fixed_for_trajectory)


# ---------------------------------------------------------------------------
# batched trajectory engine
# ---------------------------------------------------------------------------


@dataclass
class FilterResult:
    modes: np.ndarray
    converged: np.ndarray
    isolated: np.ndarray
    iterations: np.ndarray
    ascent_violations: np.ndarray
    trajectories: list | None = None


def _all_rows_equal(arr: np.ndarray) -> bool:
    return bool(np.all(arr == arr[0]))


def run_trajectories(
    starts: np.ndarray,
    data: PointSet,
    config: MeanShiftConfig,
    traj_h: np.ndarray | None = None,
    data_h: np.ndarray | None = None,
    record: bool = False,
) -> FilterResult:
    """Run Gaussian mean shift from every row of ``starts``.

    Exactly one of ``traj_h`` (one bandwidth per trajectory, fixed and
    pseudo-balloon variants) or ``data_h`` (one bandwidth per data point,
    sample-point variant) must be given, as arrays of diagonals.

    The exponent -D^2/2 is evaluated through the expansion
    ``y^2/h - 2 y x/h + x^2/h`` on centered data so each sweep is a pair of
    matrix products.
    """
    pts = data.points
    n, d = pts.shape
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    m = starts.shape[0]
    if starts.shape[1] != d:
        raise DomainError(f"start dimension {starts.shape[1]} != data dimension {d}")
    if (traj_h is None) == (data_h is None):
        raise ValueError("give exactly one of traj_h or data_h")
    if data_h is not None:
        data_h = bandwidth_array(data_h, n, d)
        if _all_rows_equal(data_h):
            # constant per-point bandwidth: the |H|^-1/2 factor cancels
            traj_h, data_h = np.broadcast_to(data_h[0], (m, d)), None
    else:
        traj_h = bandwidth_array(traj_h, m, d)

    c_k = (2.0 * math.pi) ** (-d / 2.0)
    center = pts.mean(axis=0)
    xc = pts - center
    x_aug = np.hstack([xc, np.ones((n, 1))])

    if data_h is None:
        design = np.hstack([xc, xc * xc, np.ones((n, 1))]).T  # (2d + 1, n)
        inv_h = 1.0 / traj_h
        density_scale = c_k / (n * np.prod(np.sqrt(traj_h), axis=1))
    else:
        inv_dh = 1.0 / data_h
        inv_sqrt_det = 1.0 / np.prod(np.sqrt(data_h), axis=1)
        ref = inv_sqrt_det.max()
        offset = -0.5 * np.sum(xc * xc * inv_dh, axis=1) + np.log(inv_sqrt_det / ref)
        design = np.hstack([-0.5 * inv_dh, xc * inv_dh, offset[:, None]]).T  # (2d + 1, n)
        density_scale = np.full(m, c_k * ref / n)

    y = starts - center
    active = np.ones(m, dtype=bool)
    converged = np.zeros(m, dtype=bool)
    isolated = np.zeros(m, dtype=bool)
    iterations = np.zeros(m, dtype=np.int64)
    violations = np.zeros(m, dtype=np.int64)
    last_density = np.full(m, -np.inf)
    steps_log = [[starts[t].copy()] for t in range(m)] if record else None
    dens_log = [[] for _ in range(m)] if record else None
    block = max(1, _BLOCK_ELEMENTS // n)

    def sweep(idx):
        """Weighted sums at the current positions of trajectories ``idx``."""
        yb = y[idx]
        if data_h is None:
            ih = inv_h[idx]
            row_const = -0.5 * np.sum(yb * yb * ih, axis=1, keepdims=True)
            expo = np.hstack([yb * ih, -0.5 * ih, row_const]) @ design
        else:
            expo = np.hstack([yb * yb, yb, np.ones((yb.shape[0], 1))]) @ design
        np.exp(expo, out=expo)
        return expo @ x_aug

    for _ in range(config.max_iters):
        idx_all = np.flatnonzero(active)
        if idx_all.size == 0:
            break
        for s in range(0, idx_all.size, block):
            idx = idx_all[s:s + block]
            sums = sweep(idx)
            total = sums[:, d]
            dens = density_scale[idx] * total
            bad = dens < last_density[idx] - ASCENT_RTOL * np.abs(last_density[idx])
            violations[idx[bad]] += 1
            last_density[idx] = dens

            lonely = total == 0.0
            safe_total = np.where(lonely, 1.0, total)
            new_y = np.where(lonely[:, None], y[idx], sums[:, :d] / safe_total[:, None])
            step = np.sqrt(np.sum((new_y - y[idx]) ** 2, axis=1))
            y[idx] = new_y
            iterations[idx] += ~lonely
            done = (step < config.eps) | lonely
            converged[idx[done]] = True
            isolated[idx[lonely]] = True
            active[idx[done]] = False
            if record:
                for k, t in enumerate(idx):
                    dens_log[t].append(dens[k])
                    if not lonely[k]:
                        steps_log[t].append(new_y[k] + center)

    modes = y + center
    trajectories = None
    if record:
        # density at the final point of every trajectory that moved
        need = np.array([len(steps_log[t]) > len(dens_log[t]) for t in range(m)], dtype=bool)
        idx_need = np.flatnonzero(need)
        for s in range(0, idx_need.size, block):
            idx = idx_need[s:s + block]
            dens = density_scale[idx] * sweep(idx)[:, d]
            for k, t in enumerate(idx):
                if dens[k] < last_density[t] - ASCENT_RTOL * abs(last_density[t]):
                    violations[t] += 1
                dens_log[t].append(dens[k])
        trajectories = [
            Trajectory(
                steps=np.array(steps_log[t]),
                densities=np.array(dens_log[t]),
                converged=bool(converged[t]),
                isolated=bool(isolated[t]),
            )
            for t in range(m)
        ]
    return FilterResult(modes, converged, isolated, iterations, violations, trajectories)


def filter_point(x0, data: PointSet, bandwidth, config: MeanShiftConfig | None = None) -> Trajectory:
    """Mean shift filtering (mode seeking) from one starting point.

    ``bandwidth`` depends on ``config.variant``: a single matrix for FIXED,
    the starting point's matrix for PSEUDO_BALLOON, and a per-data-point list
    (or ``(n, d)`` array) for SAMPLE_POINT.
    """
    config = config or MeanShiftConfig()
    x0 = _check_point(x0, data.dim)
    if config.variant is Variant.SAMPLE_POINT:
        res = run_trajectories(x0[None], data, config, data_h=bandwidth, record=True)
    else:
        if not isinstance(bandwidth, BandwidthMatrix):
            bandwidth = BandwidthMatrix(bandwidth)
        res = run_trajectories(x0[None], data, config, traj_h=bandwidth.diag[None], record=True)
    return res.trajectories[0]


# ---------------------------------------------------------------------------
# mode grouping and partitioning
# ---------------------------------------------------------------------------


def dense_labels(keys) -> np.ndarray:
    """Relabel arbitrary keys to 0..k-1 in first-seen order."""
    _, first, inverse = np.unique(np.asarray(keys), return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse.reshape(-1)]


def _merge_components(rep: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Union the sets containing a[t] and b[t] for every edge t.

    ``rep[i]`` is the smallest index of i's set; the merged sets keep that
    convention.
    """
    n = rep.size
    a, b = rep[a], rep[b]
    keep = a != b
    if not keep.any():
        return rep
    a, b = a[keep], b[keep]
    graph = coo_matrix((np.ones(a.size, dtype=np.int8), (a, b)), shape=(n, n))
    n_comp, comp = connected_components(graph, directed=False)
    smallest = np.full(n_comp, n, dtype=np.int64)
    np.minimum.at(smallest, comp, np.arange(n))
    return smallest[comp][rep]


def group_modes(modes, per_mode_h) -> np.ndarray:
    """Connected components of modes under the per-axis proximity rule.

    Modes i and j are linked when ``|z_i,k - z_j,k| <= sqrt(min(H_i,kk, H_j,kk))``
    for every coordinate k; groups are the transitive closure of the links,
    numbered in first-seen order. Links are collected a block of rows at a
    time and merged into a disjoint-set representative array.
    """
    modes = np.atleast_2d(np.asarray(modes, dtype=np.float64))
    n, d = modes.shape
    radius = np.sqrt(bandwidth_array(per_mode_h, n, d))
    # sort along the axis that separates modes best; a link needs
    # |dz| <= own radius on that axis, which bounds the columns per block
    axis = int(np.argmax(np.ptp(modes, axis=0) / radius.mean(axis=0)))
    order = np.argsort(modes[:, axis], kind="stable")
    z, r = modes[order], radius[order]
    key = z[:, axis]
    rep = np.arange(n)
    block = max(1, _GROUP_BLOCK_ELEMENTS // n)
    for s in range(0, n, block):
        e = min(n, s + block)
        hi = int(np.searchsorted(key, np.max(key[s:e] + r[s:e, axis]), side="right"))
        # upper triangle only: row i is compared with columns i+1..hi-1
        links = np.ones((e - s, hi - s), dtype=bool)
        for k in range(d):
            links &= np.abs(z[s:e, k, None] - z[s:hi, k]) <= np.minimum(r[s:e, k, None], r[s:hi, k])
        ii, jj = np.nonzero(np.triu(links, 1))
        if ii.size:
            rep = _merge_components(rep, order[ii + s], order[jj + s])
    return dense_labels(rep)


def _partition(data: PointSet, config: MeanShiftConfig, traj_h=None, data_h=None, group_h=None) -> Partition:
    res = run_trajectories(data.points, data, config, traj_h=traj_h, data_h=data_h)
    labels = group_modes(res.modes, group_h)
    return Partition(
        labels=labels,
        modes=res.modes,
        converged=res.converged,
        iterations=res.iterations,
        ascent_violations=res.ascent_violations,
        isolated=res.isolated,
    )


def partition_fixed(data: PointSet, H: BandwidthMatrix, config: MeanShiftConfig | None = None) -> Partition:
    config = config or MeanShiftConfig()
    if H.dim != data.dim:
        raise DomainError(f"bandwidth dimension {H.dim} != data dimension {data.dim}")
    h = np.broadcast_to(H.diag, (data.n, data.dim))
    return _partition(data, config, traj_h=h, group_h=h)


def partition_pseudo_balloon(data: PointSet, per_point_H, config: MeanShiftConfig | None = None) -> Partition:
    config = config or MeanShiftConfig()
    h = bandwidth_array(per_point_H, data.n, data.dim)
    return _partition(data, config, traj_h=h, group_h=h)


def partition_sample_point(data: PointSet, per_point_H, config: MeanShiftConfig | None = None) -> Partition:
    config = config or MeanShiftConfig()
    h = bandwidth_array(per_point_H, data.n, data.dim)
    return _partition(data, config, data_h=h, group_h=h)


def partition(data: PointSet, bandwidth, variant: Variant, config: MeanShiftConfig | None = None) -> Partition:
    """Dispatch to the partitioner for ``variant``."""
    if variant is Variant.FIXED:
        if not isinstance(bandwidth, BandwidthMatrix):
            bandwidth = BandwidthMatrix(bandwidth)
        return partition_fixed(data, bandwidth, config)
    if variant is Variant.SAMPLE_POINT:
        return partition_sample_point(data, bandwidth, config)
    return partition_pseudo_balloon(data, bandwidth, config)
