"""Per-point bandwidth selection by cluster stability across scales.

``select_iterative`` processes the feature-space domains one after another.
While domain rho is scanned over its predefined scales, domains already
processed use each point's selected block and the remaining domains use the
mean of their predefined blocks. This needs ``sum_rho B_rho`` partition runs
instead of ``prod_rho B_rho``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BandwidthMatrix, DomainError, FeatureSpaceLayout, LayoutMismatchError, Partition, PointSet
from .meanshift import MeanShiftConfig, Variant, partition_pseudo_balloon, partition_sample_point
from .stability import ScaleTable, best_scales


def sqrt_scales(lo: float, hi: float, count: int) -> np.ndarray:
    """``count`` bandwidth values whose square roots are equally spaced in [lo, hi]."""
    if count < 3:
        raise DomainError(f"need at least 3 scales, got {count}")
    if not 0 < lo < hi:
        raise DomainError(f"need 0 < min < max, got {lo}, {hi}")
    return np.linspace(lo, hi, count) ** 2


@dataclass(frozen=True, eq=False)
class BandwidthRange:
    """Ordered predefined diagonal blocks for each domain.

    ``scales[rho]`` is a ``(B_rho, d_rho)`` array, strictly increasing down
    the rows in every entry.
    """

    layout: FeatureSpaceLayout
    scales: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.scales) != self.layout.n_domains:
            raise LayoutMismatchError(f"expected {self.layout.n_domains} scale lists, got {len(self.scales)}")
        fixed = []
        for rho, (blocks, dim) in enumerate(zip(self.scales, self.layout.domain_dims)):
            arr = np.array(blocks, dtype=np.float64)
            if arr.ndim == 1:
                arr = np.repeat(arr[:, None], dim, axis=1)
            if arr.ndim != 2 or arr.shape[1] != dim:
                raise LayoutMismatchError(f"domain {rho}: blocks have shape {arr.shape}, expected (B, {dim})")
            if arr.shape[0] < 3:
                raise DomainError(f"domain {rho}: need at least 3 scales, got {arr.shape[0]}")
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise DomainError(f"domain {rho}: bandwidths must be finite and > 0")
            if np.any(np.diff(arr, axis=0) <= 0):
                raise DomainError(f"domain {rho}: scales must be strictly increasing")
            arr.setflags(write=False)
            fixed.append(arr)
        object.__setattr__(self, "scales", tuple(fixed))

    @classmethod
    def from_sqrt(cls, layout: FeatureSpaceLayout, specs: Sequence[tuple[float, float, int]]) -> "BandwidthRange":
        """Build from one ``(min, max, count)`` sqrt-bandwidth triple per domain."""
        if len(specs) != layout.n_domains:
            raise LayoutMismatchError(f"expected {layout.n_domains} range specs, got {len(specs)}")
        return cls(layout, tuple(sqrt_scales(*spec) for spec in specs))

    def counts(self) -> list[int]:
        return [s.shape[0] for s in self.scales]


def temporary_bandwidth(blocks) -> np.ndarray:
    """Entry-wise arithmetic mean of a domain's predefined blocks."""
    arr = np.asarray(blocks, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr.mean(axis=0)


@dataclass
class RunCounter:
    partition_runs: int = 0

    def increment(self, k: int = 1) -> None:
        self.partition_runs += k


@dataclass(eq=False)
class BandwidthAssignment:
    """Selected bandwidth of every point, per domain and composed.

    ``scale_index[i, rho]`` is the 0-based index of the predefined block
    chosen for point i in domain rho, ``composed[i]`` the full diagonal.
    """

    layout: FeatureSpaceLayout
    scale_index: np.ndarray
    composed: np.ndarray
    js: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.composed.shape[0]

    def block(self, i: int, rho: int) -> np.ndarray:
        return self.composed[i, self.layout.slice(rho)]

    def matrices(self) -> list[BandwidthMatrix]:
        return [BandwidthMatrix(row) for row in self.composed]

    def histograms(self) -> list[dict[int, int]]:
        """Count of points per selected scale index, one dict per domain."""
        out = []
        for rho in range(self.layout.n_domains):
            vals, cnts = np.unique(self.scale_index[:, rho], return_counts=True)
            out.append({int(v): int(c) for v, c in zip(vals, cnts)})
        return out


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("MODESEEK_THREADS", "1") or 1)
    return max(1, workers)


def _run_scales(data, per_scale_h, config, counter, workers) -> list[Partition]:
    """Pseudo-balloon partition at every scale; output order matches input order."""
    def run(h):
        return partition_pseudo_balloon(data, h, config)

    if workers > 1 and len(per_scale_h) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, per_scale_h))
    else:
        parts = [run(h) for h in per_scale_h]
    counter.increment(len(parts))
    return parts


def _pass_diagnostics(parts: list[Partition]) -> dict:
    return {
        "clusters_per_scale": [p.cluster_count for p in parts],
        "nonconverged_per_scale": [int((~p.converged).sum()) for p in parts],
        "isolated_per_scale": [int(p.isolated.sum()) for p in parts],
        "ascent_violations": int(sum(int(p.ascent_violations.sum()) for p in parts)),
    }


def select_iterative(
    data: PointSet,
    bw_range: BandwidthRange,
    domain_order: Sequence[int] | None = None,
    config: MeanShiftConfig | None = None,
    workers: int | None = None,
) -> tuple[BandwidthAssignment, RunCounter]:
    """Select a bandwidth block per point for each domain in turn."""
    config = config or MeanShiftConfig(variant=Variant.PSEUDO_BALLOON)
    layout = data.layout
    if bw_range.layout != layout:
        raise LayoutMismatchError("bandwidth range layout differs from the data layout")
    P = layout.n_domains
    order = list(range(P)) if domain_order is None else [int(r) for r in domain_order]
    if sorted(order) != list(range(P)):
        raise DomainError(f"domain order {order} is not a permutation of 0..{P - 1}")
    workers = _worker_count(workers)

    n = data.n
    composed = np.empty((n, layout.total_dim))
    for rho in range(P):
        composed[:, layout.slice(rho)] = temporary_bandwidth(bw_range.scales[rho])
    scale_index = np.full((n, P), -1, dtype=np.int64)
    js = np.full((n, P), np.nan)
    counter = RunCounter()
    passes = []

    for rho in order:
        sl = layout.slice(rho)
        per_scale = []
        for block in bw_range.scales[rho]:
            h = composed.copy()
            h[:, sl] = block
            per_scale.append(h)
        parts = _run_scales(data, per_scale, config, counter, workers)
        table = ScaleTable.build(data, parts, rho)
        best, best_js = best_scales(table)
        scale_index[:, rho] = best
        js[:, rho] = best_js
        composed[:, sl] = bw_range.scales[rho][best]
        passes.append({"domain": rho, **_pass_diagnostics(parts)})

    assignment = BandwidthAssignment(layout, scale_index, composed, js, {"mode": "iterative", "passes": passes})
    return assignment, counter


def select_joint(
    data: PointSet,
    full_space_scales: Sequence[BandwidthMatrix],
    config: MeanShiftConfig | None = None,
    workers: int | None = None,
) -> tuple[BandwidthAssignment, RunCounter]:
    """Single-pass selection treating the whole space as one domain.

    Every point gets one scale index shared by all of its domains.
    """
    config = config or MeanShiftConfig(variant=Variant.PSEUDO_BALLOON)
    if len(full_space_scales) < 3:
        raise DomainError(f"need at least 3 scales, got {len(full_space_scales)}")
    mats = [h if isinstance(h, BandwidthMatrix) else BandwidthMatrix(h) for h in full_space_scales]
    if any(h.dim != data.dim for h in mats):
        raise DomainError("scale dimension differs from the data dimension")
    counter = RunCounter()
    n = data.n
    per_scale = [np.broadcast_to(h.diag, (n, data.dim)) for h in mats]
    parts = _run_scales(data, per_scale, config, counter, _worker_count(workers))
    table = ScaleTable.build(data, parts, None)
    best, best_js = best_scales(table)
    diag = np.stack([h.diag for h in mats])
    P = data.layout.n_domains
    assignment = BandwidthAssignment(
        data.layout,
        np.repeat(best[:, None], P, axis=1),
        diag[best],
        np.repeat(best_js[:, None], P, axis=1),
        {"mode": "joint", "passes": [{"domain": None, **_pass_diagnostics(parts)}]},
    )
    return assignment, counter


def joint_scales(bw_range: BandwidthRange) -> list[BandwidthMatrix]:
    """Full-space scales built from the b-th block of every domain."""
    counts = set(bw_range.counts())
    if len(counts) != 1:
        raise DomainError(f"joint selection needs the same scale count in every domain, got {bw_range.counts()}")
    B = counts.pop()
    return [BandwidthMatrix(np.concatenate([s[b] for s in bw_range.scales])) for b in range(B)]


def final_partition(
    data: PointSet,
    assignment: BandwidthAssignment,
    variant: Variant = Variant.PSEUDO_BALLOON,
    config: MeanShiftConfig | None = None,
) -> Partition:
    """Partition the data once more with the selected per-point bandwidths."""
    if assignment.n != data.n:
        raise DomainError(f"assignment covers {assignment.n} points, data has {data.n}")
    if variant is Variant.SAMPLE_POINT:
        return partition_sample_point(data, assignment.composed, config)
    if variant is Variant.PSEUDO_BALLOON:
        return partition_pseudo_balloon(data, assignment.composed, config)
    raise DomainError(f"final partition needs a variable-bandwidth variant, got {variant}")
