"""Foundational types: feature-space layout, point storage, diagonal bandwidths."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when an input violates a mathematical precondition."""


class LayoutMismatchError(DomainError):
    """Raised when per-domain inputs do not match the feature-space layout."""


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureSpaceLayout:
    """Partition of a d-dimensional space into P independent domains.

    Domain ``rho`` (0-based) occupies the contiguous coordinate slice
    ``[sum(dims[:rho]), sum(dims[:rho + 1]))``.
    """

    domain_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(v) for v in self.domain_dims)
        if len(dims) == 0:
            raise DomainError("layout needs at least one domain")
        if any(v < 1 for v in dims):
            raise DomainError(f"domain dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "domain_dims", dims)

    @classmethod
    def single(cls, dim: int) -> "FeatureSpaceLayout":
        return cls((dim,))

    @property
    def total_dim(self) -> int:
        return sum(self.domain_dims)

    @property
    def n_domains(self) -> int:
        return len(self.domain_dims)

    def slice(self, rho: int) -> slice:
        if not 0 <= rho < self.n_domains:
            raise LayoutMismatchError(f"domain index {rho} outside [0, {self.n_domains})")
        start = sum(self.domain_dims[:rho])
        return slice(start, start + self.domain_dims[rho])

    @property
    def slices(self) -> list[slice]:
        return [self.slice(rho) for rho in range(self.n_domains)]


@dataclass(frozen=True, eq=False)
class PointSet:
    """n points of dimension d, stored as a read-only float64 array."""

    points: np.ndarray
    layout: FeatureSpaceLayout = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DomainError(f"expected an (n, d) array with n >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DomainError("points must be finite")
        layout = self.layout if self.layout is not None else FeatureSpaceLayout.single(pts.shape[1])
        if layout.total_dim != pts.shape[1]:
            raise LayoutMismatchError(
                f"layout total_dim {layout.total_dim} != point dimension {pts.shape[1]}"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "layout", layout)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    def domain(self, rho: int) -> np.ndarray:
        return self.points[:, self.layout.slice(rho)]


@dataclass(frozen=True, eq=False)
class BandwidthMatrix:
    """Diagonal positive-definite bandwidth H, stored by its diagonal."""

    diag: np.ndarray

    def __post_init__(self):
        diag = np.atleast_1d(np.array(self.diag, dtype=np.float64))
        if diag.ndim != 1:
            raise DomainError("bandwidth diagonal must be a vector")
        if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
            raise DomainError(f"bandwidth entries must be finite and > 0, got {diag}")
        diag.setflags(write=False)
        object.__setattr__(self, "diag", diag)

    @classmethod
    def isotropic(cls, value: float, dim: int) -> "BandwidthMatrix":
        return cls(np.full(dim, float(value)))

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    @property
    def sqrt_det(self) -> float:
        """|H|^(1/2) as the product of square roots of the diagonal."""
        return float(np.prod(np.sqrt(self.diag)))

    def block(self, layout: FeatureSpaceLayout, rho: int) -> np.ndarray:
        return self.diag[layout.slice(rho)]

    def scaled(self, factor: float) -> "BandwidthMatrix":
        return BandwidthMatrix(self.diag * factor)

    def __eq__(self, other):
        if not isinstance(other, BandwidthMatrix):
            return NotImplemented
        return np.array_equal(self.diag, other.diag)

    def __hash__(self):
        return hash(self.diag.tobytes())

    def __repr__(self):
        return f"BandwidthMatrix(diag={self.diag.tolist()})"


@dataclass
class Trajectory:
    """Points visited by one mean shift run and the density at each of them."""

    steps: np.ndarray
    densities: np.ndarray
    converged: bool = True
    isolated: bool = False

    @property
    def mode(self) -> np.ndarray:
        return self.steps[-1]

    @property
    def iterations(self) -> int:
        return len(self.steps) - 1


@dataclass(eq=False)
class Partition:
    """Cluster assignment of each point and the converged mode it reached."""

    labels: np.ndarray
    modes: np.ndarray
    converged: np.ndarray = None
    iterations: np.ndarray = None
    ascent_violations: np.ndarray = None
    isolated: np.ndarray = None
    cluster_count: int = field(init=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.modes = np.asarray(self.modes, dtype=np.float64)
        n = self.labels.shape[0]
        if self.converged is None:
            self.converged = np.ones(n, dtype=bool)
        if self.iterations is None:
            self.iterations = np.zeros(n, dtype=np.int64)
        if self.ascent_violations is None:
            self.ascent_violations = np.zeros(n, dtype=np.int64)
        if self.isolated is None:
            self.isolated = np.zeros(n, dtype=bool)
        self.cluster_count = int(self.labels.max()) + 1 if n else 0

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def groups(self) -> set[frozenset[int]]:
        """Clusters as a set of frozensets of point indices (label-agnostic)."""
        out: dict[int, list[int]] = {}
        for i, lab in enumerate(self.labels.tolist()):
            out.setdefault(lab, []).append(i)
        return {frozenset(v) for v in out.values()}

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


def compose_bandwidth(blocks: Sequence[Sequence[float]], layout: FeatureSpaceLayout) -> BandwidthMatrix:
    """Concatenate per-domain diagonal blocks into one bandwidth matrix."""
    if len(blocks) != layout.n_domains:
        raise LayoutMismatchError(f"expected {layout.n_domains} blocks, got {len(blocks)}")
    parts = []
    for rho, (block, dim) in enumerate(zip(blocks, layout.domain_dims)):
        arr = np.atleast_1d(np.asarray(block, dtype=np.float64))
        if arr.shape != (dim,):
            raise LayoutMismatchError(f"block {rho} has shape {arr.shape}, expected ({dim},)")
        parts.append(arr)
    return BandwidthMatrix(np.concatenate(parts))


def mahalanobis_sq(x, y, H: BandwidthMatrix) -> float:
    """Squared Mahalanobis distance (x - y)^T H^-1 (x - y) for diagonal H."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.shape != H.diag.shape:
        raise DomainError(f"shape mismatch: x {x.shape}, y {y.shape}, H {H.diag.shape}")
    diff = x - y
    return float(np.sum(diff * diff / H.diag))


def bandwidth_array(bandwidths, n: int, d: int) -> np.ndarray:
    """Normalize a per-point bandwidth list (or (n, d) array) to a float array.

    Accepts a sequence of :class:`BandwidthMatrix`, an ``(n, d)`` array of
    diagonals, or a single matrix to broadcast.
    """
    if isinstance(bandwidths, BandwidthMatrix):
        arr = np.broadcast_to(bandwidths.diag, (n, d))
    elif isinstance(bandwidths, np.ndarray):
        arr = bandwidths.astype(np.float64, copy=False)
    else:
        arr = np.array([h.diag if isinstance(h, BandwidthMatrix) else h for h in bandwidths], dtype=np.float64)
    if arr.shape != (n, d):
        raise DomainError(f"expected {n} bandwidths of dimension {d}, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("bandwidth entries must be finite and > 0")
    return arr
