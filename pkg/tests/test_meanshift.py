import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_ms_vector, two_blobs
from modeseek import (
    BandwidthMatrix,
    DomainError,
    IsolatedPointError,
    MeanShiftConfig,
    PointSet,
    Variant,
    filter_point,
    group_modes,
    kde_fixed,
    ms_vector_balloon,
    ms_vector_fixed,
    ms_vector_sample_point,
    partition_fixed,
    partition_pseudo_balloon,
    partition_sample_point,
)
from modeseek.meanshift import dense_labels, partition, run_trajectories

H1 = BandwidthMatrix([1.0])


def naive_groups(modes, radii):
    """Transitive closure of the per-axis link rule by repeated flood fill."""
    n = len(modes)
    label = [-1] * n
    nxt = 0
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = nxt
        stack = [s]
        while stack:
            i = stack.pop()
            for j in range(n):
                if label[j] < 0 and all(
                    abs(modes[i][k] - modes[j][k]) <= min(radii[i][k], radii[j][k]) for k in range(len(modes[i]))
                ):
                    label[j] = nxt
                    stack.append(j)
        nxt += 1
    return label


class TestConfig:
    def test_defaults(self):
        cfg = MeanShiftConfig()
        assert (cfg.eps, cfg.max_iters, cfg.variant) == (1e-6, 500, Variant.FIXED)

    @pytest.mark.parametrize("kwargs", [{"eps": 0.0}, {"eps": -1.0}, {"max_iters": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            MeanShiftConfig(**kwargs)


class TestVectors:
    def test_single_point_attracts(self):
        data = PointSet([[3.0, -1.0]])
        np.testing.assert_allclose(ms_vector_fixed([0.5, 0.5], data, BandwidthMatrix([2.0, 2.0])), [2.5, -1.5])

    def test_symmetry(self):
        data = PointSet([[-1.0], [1.0]])
        assert ms_vector_fixed([0.0], data, BandwidthMatrix([3.0]))[0] == 0.0
        assert ms_vector_sample_point([0.0], data, [H1, H1])[0] == 0.0
        assert ms_vector_balloon([0.0], data, H1)[0] == 0.0

    def test_two_term_fixed(self):
        data = PointSet([[0.0], [2.0]])
        w0, w1 = math.exp(-0.125), math.exp(-1.125)
        expected = 2 * w1 / (w0 + w1) - 0.5
        m = ms_vector_fixed([0.5], data, H1)[0]
        assert m == pytest.approx(expected, rel=1e-14)
        # frozen from an independent evaluation of the same weighted mean
        assert m == pytest.approx(0.03788284273999021, rel=1e-12)
        assert ms_vector_balloon([0.5], data, H1)[0] == m

    def test_two_term_sample_point(self):
        data = PointSet([[-1.0], [1.0]])
        a, b = math.exp(-0.5), 0.5 * math.exp(-0.125)
        m = ms_vector_sample_point([0.0], data, [H1, BandwidthMatrix([4.0])])[0]
        assert m == pytest.approx((-a + b) / (a + b), rel=1e-14)
        assert m == pytest.approx(-0.157745279214254, rel=1e-12)

    def test_sample_point_reduces_to_fixed(self):
        rng = np.random.default_rng(3)
        data = PointSet(rng.normal(size=(15, 3)))
        H = BandwidthMatrix([0.5, 1.0, 2.0])
        x = rng.normal(size=3)
        np.testing.assert_allclose(ms_vector_sample_point(x, data, [H] * 15), ms_vector_fixed(x, data, H), rtol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_match_naive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(1, 30)), int(rng.integers(1, 5))
        pts = rng.normal(0, 2, (n, d))
        h = rng.uniform(0.5, 4.0, (n, d))
        x = rng.normal(0, 1, d)
        data = PointSet(pts)
        np.testing.assert_allclose(
            ms_vector_fixed(x, data, BandwidthMatrix(h[0])),
            naive_ms_vector(pts.tolist(), [h[0].tolist()] * n, x.tolist(), False),
            rtol=1e-10, atol=1e-12,
        )
        np.testing.assert_allclose(
            ms_vector_sample_point(x, data, h),
            naive_ms_vector(pts.tolist(), h.tolist(), x.tolist(), True),
            rtol=1e-10, atol=1e-12,
        )

    def test_isolated_point(self):
        with pytest.raises(IsolatedPointError):
            ms_vector_fixed([1e6], PointSet([[0.0]]), H1)


class TestFilterPoint:
    def test_single_attractor_one_step(self):
        traj = filter_point([7.0, -2.0], PointSet([[1.0, 1.0]]), BandwidthMatrix([1.0, 1.0]))
        # one step lands on the point, the next has zero length
        np.testing.assert_array_equal(traj.steps[1], [1.0, 1.0])
        np.testing.assert_array_equal(traj.mode, [1.0, 1.0])
        assert traj.converged

    def test_bimodal_against_grid_argmax(self):
        rng = np.random.default_rng(11)
        pts = np.concatenate([-5 + rng.uniform(-0.1, 0.1, 50), 5 + rng.uniform(-0.1, 0.1, 50)])[:, None]
        data = PointSet(pts)
        grid = np.arange(-8.0, 8.0 + 5e-4, 0.001)
        dens = kde_fixed(data, H1, grid[:, None])
        left = grid < 0
        oracle = grid[left][np.argmax(dens[left])]
        traj = filter_point([-4.0], data, H1)
        assert traj.converged
        assert abs(traj.mode[0] - oracle) < 2e-3
        assert abs(traj.mode[0] + 5.0) < 0.2

    def test_fixed_point_at_symmetric_mode(self):
        traj = filter_point([0.0], PointSet([[-1.0], [1.0]]), BandwidthMatrix([4.0]))
        assert traj.iterations == 0 or np.linalg.norm(traj.steps[1] - traj.steps[0]) < 1e-6
        assert traj.mode[0] == 0.0

    def test_densities_recorded_and_ascending(self):
        rng = np.random.default_rng(0)
        data = PointSet(rng.normal(size=(40, 2)))
        traj = filter_point([2.5, 2.5], data, BandwidthMatrix([0.5, 0.5]))
        assert len(traj.densities) == len(traj.steps)
        np.testing.assert_allclose(traj.densities, kde_fixed(data, BandwidthMatrix([0.5, 0.5]), traj.steps), rtol=1e-10)
        assert np.all(np.diff(traj.densities) >= -1e-12 * traj.densities[:-1])

    def test_max_iters_flag(self):
        rng = np.random.default_rng(0)
        data = PointSet(rng.normal(size=(40, 1)))
        traj = filter_point([3.0], data, H1, MeanShiftConfig(eps=1e-12, max_iters=2))
        assert not traj.converged
        assert traj.iterations == 2

    def test_isolated_start_stays(self):
        traj = filter_point([1e6], PointSet([[0.0]]), H1)
        assert traj.isolated
        assert traj.mode[0] == 1e6

    def test_sample_point_variant(self):
        data = PointSet([[-1.0], [1.0]])
        traj = filter_point([0.3], data, [H1, BandwidthMatrix([4.0])], MeanShiftConfig(variant=Variant.SAMPLE_POINT))
        assert traj.converged
        assert np.all(np.diff(traj.densities) >= -1e-12 * traj.densities[:-1])


class TestGroupModes:
    def test_examples(self):
        H4 = BandwidthMatrix([4.0])
        assert group_modes([[1.0], [1.0], [1.0]], H4).tolist() == [0, 0, 0]
        assert group_modes([[0.0], [5.0]], H4).tolist() == [0, 1]
        assert group_modes([[0.0], [1.5], [3.0]], H4).tolist() == [0, 0, 0]

    def test_min_of_radii(self):
        # |dz| = 2: within sqrt(9) but not within sqrt(1)
        assert group_modes([[0.0], [2.0]], [BandwidthMatrix([9.0]), BandwidthMatrix([1.0])]).tolist() == [0, 1]

    def test_every_axis_must_link(self):
        assert group_modes([[0.0, 0.0], [0.5, 3.0]], BandwidthMatrix([1.0, 1.0])).tolist() == [0, 1]

    def test_first_seen_labels(self):
        assert group_modes([[10.0], [0.0], [10.1], [0.2]], H1).tolist() == [0, 1, 0, 1]

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(1, 3))
    def test_matches_flood_fill_oracle(self, seed, n, d):
        rng = np.random.default_rng(seed)
        modes = np.round(rng.uniform(0, 6, (n, d)), 1)
        h = rng.choice([0.25, 1.0, 2.25], size=(n, d))
        got = group_modes(modes, h).tolist()
        assert got == naive_groups(modes.tolist(), np.sqrt(h).tolist())

    def test_block_boundaries(self, monkeypatch):
        import modeseek.meanshift as ms

        rng = np.random.default_rng(5)
        modes = rng.uniform(0, 30, (300, 2))
        expected = group_modes(modes, BandwidthMatrix([1.0, 1.0]))
        monkeypatch.setattr(ms, "_GROUP_BLOCK_ELEMENTS", 300 * 7)
        np.testing.assert_array_equal(group_modes(modes, BandwidthMatrix([1.0, 1.0])), expected)

    def test_dense_labels(self):
        assert dense_labels([7, 3, 7, 9, 3]).tolist() == [0, 1, 0, 2, 1]


class TestPartitions:
    def test_two_blobs(self, blobs):
        data, truth = blobs
        p = partition_fixed(data, BandwidthMatrix([1.0, 1.0]))
        assert p.cluster_count == 2
        np.testing.assert_array_equal(p.labels, truth)
        assert p.converged.all()

    def test_single_point(self):
        for part in (
            partition_fixed(PointSet([[2.0, 3.0]]), BandwidthMatrix([1.0, 1.0])),
            partition_pseudo_balloon(PointSet([[2.0, 3.0]]), [BandwidthMatrix([1.0, 1.0])]),
            partition_sample_point(PointSet([[2.0, 3.0]]), [BandwidthMatrix([1.0, 1.0])]),
        ):
            assert part.cluster_count == 1
            np.testing.assert_array_equal(part.modes[0], [2.0, 3.0])

    def test_huge_bandwidth_one_cluster(self):
        data = PointSet(np.random.default_rng(0).uniform(0, 100, (60, 2)))
        assert partition_fixed(data, BandwidthMatrix([1e6, 1e6])).cluster_count == 1

    def test_mixed_bandwidths_two_blobs(self, blobs):
        data, truth = blobs
        h = np.where(truth[:, None] == 0, 1.0, 2.0) * np.ones((data.n, 2))
        for part in (partition_pseudo_balloon(data, h), partition_sample_point(data, h)):
            assert part.cluster_count == 2
            np.testing.assert_array_equal(part.labels, truth)

    def test_reduction_chain(self, blobs):
        data, _ = blobs
        H = BandwidthMatrix([1.5, 1.5])
        fixed = partition_fixed(data, H)
        for part in (partition_pseudo_balloon(data, [H] * data.n), partition_sample_point(data, [H] * data.n)):
            np.testing.assert_array_equal(part.labels, fixed.labels)
            np.testing.assert_array_equal(part.modes, fixed.modes)

    def test_dispatch(self, blobs):
        data, _ = blobs
        H = BandwidthMatrix([1.0, 1.0])
        np.testing.assert_array_equal(partition(data, H, Variant.FIXED).labels, partition_fixed(data, H).labels)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        pts = np.vstack([rng.normal(c, 0.3, (10, 2)) for c in ((0, 0), (6, 0), (0, 6))])
        H = BandwidthMatrix([1.0, 1.0])
        perm = rng.permutation(len(pts))
        a = partition_fixed(PointSet(pts), H)
        b = partition_fixed(PointSet(pts[perm]), H)
        mapped = {frozenset(int(perm[i]) for i in g) for g in b.groups()}
        assert mapped == a.groups()

    def test_block_size_does_not_change_result(self, monkeypatch):
        import modeseek.meanshift as ms

        rng = np.random.default_rng(2)
        data = PointSet(rng.normal(size=(120, 3)))
        h = rng.uniform(0.2, 1.0, (120, 3))
        ref = partition_pseudo_balloon(data, h)
        monkeypatch.setattr(ms, "_BLOCK_ELEMENTS", 120 * 7)
        other = partition_pseudo_balloon(data, h)
        np.testing.assert_array_equal(ref.labels, other.labels)
        np.testing.assert_allclose(ref.modes, other.modes, rtol=0, atol=1e-12)


class TestEngine:
    def test_recorded_trajectories_match_modes(self):
        rng = np.random.default_rng(4)
        data = PointSet(rng.normal(size=(30, 2)))
        h = rng.uniform(0.3, 1.0, (30, 2))
        cfg = MeanShiftConfig()
        plain = run_trajectories(data.points, data, cfg, traj_h=h)
        rec = run_trajectories(data.points, data, cfg, traj_h=h, record=True)
        np.testing.assert_array_equal(plain.modes, rec.modes)
        for t, traj in enumerate(rec.trajectories):
            np.testing.assert_array_equal(traj.mode, plain.modes[t])
            assert traj.iterations == plain.iterations[t]

    def test_needs_exactly_one_bandwidth_kind(self):
        data = PointSet([[0.0]])
        with pytest.raises(ValueError):
            run_trajectories(data.points, data, MeanShiftConfig())

    def test_steps_follow_direct_vectors(self):
        rng = np.random.default_rng(9)
        data = PointSet(rng.normal(size=(25, 2)))
        h = rng.uniform(0.3, 2.0, (25, 2))
        traj = filter_point([0.4, -0.2], data, h, MeanShiftConfig(variant=Variant.SAMPLE_POINT))
        for a, b in zip(traj.steps[:-1], traj.steps[1:]):
            np.testing.assert_allclose(b, a + ms_vector_sample_point(a, data, h), rtol=1e-9, atol=1e-12)
