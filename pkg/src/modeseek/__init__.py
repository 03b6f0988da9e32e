"""Mean shift clustering with per-domain adaptive bandwidth selection."""

from .core import (
    BandwidthMatrix,
    DomainError,
    FeatureSpaceLayout,
    LayoutMismatchError,
    Partition,
    PointSet,
    Trajectory,
    compose_bandwidth,
    mahalanobis_sq,
)
from .kernels import Kernel, empirical_mse, kde_balloon, kde_fixed, kde_sample_point, profile_eval
from .meanshift import (
    IsolatedPointError,
    MeanShiftConfig,
    Variant,
    filter_point,
    group_modes,
    ms_vector_balloon,
    ms_vector_fixed,
    ms_vector_sample_point,
    partition_fixed,
    partition_pseudo_balloon,
    partition_sample_point,
)
from .selection import (
    BandwidthAssignment,
    BandwidthRange,
    RunCounter,
    final_partition,
    select_iterative,
    select_joint,
    temporary_bandwidth,
)
from .stability import GaussianSummary, ScaleTable, best_scale_for_point, js_divergence, summarize_clusters

__version__ = "0.1.0"
