import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flyact.detect import InterestPoint
from flyact.exceptions import DegenerateBin, LowContrast, SupportOutOfBounds, VolumeTooSmall
from flyact.sift3d import (
    SIFT3D,
    DescriptorConfig,
    GradientVolume,
    bin_solid_angles,
    compute_descriptor,
    describe_keypoints,
    gradients_3d,
    normalize_descriptor,
    raw_histogram,
    solid_angle_weight,
    voxel_polar,
)
from flyact.video_io import FrameVolume

from .oracles import descriptor_histogram_bruteforce

# Eight integer gradient directions of equal length 65, one per 45-degree azimuth bin.
LATTICE = [(60, 25), (25, 60), (-25, 60), (-60, 25), (-60, -25), (-25, -60), (25, -60), (60, -25)]


def _pt(x, y, t):
    return InterestPoint(x, y, t, 1.5, 1.0)


def _lattice_field(k, Lt):
    La = np.array([LATTICE[i % 8][0] for i in k.ravel()], float).reshape(k.shape)
    Lb = np.array([LATTICE[i % 8][1] for i in k.ravel()], float).reshape(k.shape)
    return GradientVolume(La, Lb, Lt)


class TestGradients:
    def test_constant(self):
        g = gradients_3d(FrameVolume(np.full((5, 6, 7), 0.3)))
        assert not np.any(g.La) and not np.any(g.Lb) and not np.any(g.Lt)

    def test_x_ramp(self):
        W = 10
        data = np.broadcast_to(np.arange(W) / W, (5, 6, W)).copy()
        g = gradients_3d(FrameVolume(data))
        np.testing.assert_allclose(g.La, 1 / W, atol=1e-15)
        assert not np.any(g.Lb) and not np.any(g.Lt)

    def test_central_and_one_sided(self):
        data = np.random.default_rng(0).uniform(size=(4, 5, 6))
        g = gradients_3d(data)
        assert g.La[2, 2, 3] == (data[2, 2, 4] - data[2, 2, 2]) / 2
        assert g.La[2, 2, 0] == data[2, 2, 1] - data[2, 2, 0]
        assert g.Lt[3, 1, 1] == data[3, 1, 1] - data[2, 1, 1]

    def test_two_frames(self):
        with pytest.raises(VolumeTooSmall):
            gradients_3d(FrameVolume(np.zeros((2, 8, 8))))


class TestVoxelPolar:
    def test_345(self):
        m, th, ph = voxel_polar(3, 4, 0)
        assert m == 5.0 and th == pytest.approx(0.9272952180016122, abs=1e-15) and ph == 0.0

    def test_pure_temporal(self):
        m, _, ph = voxel_polar(0, 0, 1)
        assert m == 1.0 and ph == pytest.approx(np.pi / 2, abs=1e-15)

    def test_zero(self):
        assert voxel_polar(0, 0, 0) == (0.0, 0.0, 0.0)

    def test_azimuth_range(self):
        assert voxel_polar(-1.0, -0.0, 0)[1] == np.pi
        assert voxel_polar(-1.0, 0.0, 0)[1] == np.pi

    @settings(max_examples=50, deadline=None)
    @given(st.tuples(*[st.floats(-1e3, 1e3)] * 3))
    def test_ranges(self, g):
        m, th, ph = voxel_polar(*g)
        assert m >= 0 and -np.pi < th <= np.pi and -np.pi / 2 <= ph <= np.pi / 2


class TestSolidAngle:
    def test_equatorial(self):
        w = solid_angle_weight(0.0, np.pi / 10, np.pi / 4)
        assert w == pytest.approx((np.pi / 4) * np.sin(np.pi / 10), abs=1e-15)
        assert w == pytest.approx(0.2427, abs=1e-4)

    def test_polar_cap_smaller(self):
        cap = solid_angle_weight(np.pi / 2 - np.pi / 10, np.pi / 10, np.pi / 4)
        assert 0 < cap < solid_angle_weight(0.0, np.pi / 10, np.pi / 4)

    def test_sphere_total(self):
        cfg = DescriptorConfig()
        assert cfg.theta_bins * bin_solid_angles(cfg).sum() == pytest.approx(4 * np.pi, abs=1e-9)

    @pytest.mark.parametrize("args", [(0.0, 0.0, 1.0), (0.0, 0.1, 0.0), (1.5, 0.2, 0.5), (-1.8, 0.1, 0.5)])
    def test_degenerate(self, args):
        with pytest.raises(DegenerateBin):
            solid_angle_weight(*args)


class TestDescriptor:
    def test_matches_bruteforce(self, textured_volume):
        cfg = DescriptorConfig()
        g = gradients_3d(textured_volume)
        p = _pt(11, 12, 9)
        fast = raw_histogram(g, p, cfg)
        slow = descriptor_histogram_bruteforce(g.La, g.Lb, g.Lt, p, 2, 4, 8, 10, 4.0)
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=0)

    def test_length_and_norm(self, textured_volume):
        g = gradients_3d(textured_volume)
        d = compute_descriptor(textured_volume, g, _pt(11, 12, 9))
        assert d.shape == (640,)
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-9)
        raw = raw_histogram(g, _pt(11, 12, 9), DescriptorConfig())
        clamped = np.minimum(raw / np.linalg.norm(raw), 0.2)
        np.testing.assert_allclose(d, clamped / np.linalg.norm(clamped), atol=1e-15)
        assert np.all(d >= 0)

    @pytest.mark.parametrize("grid,size,tb,pb", [(1, 4, 4, 3), (3, 2, 6, 5), (2, 3, 8, 10)])
    def test_dimension(self, textured_volume, grid, size, tb, pb):
        cfg = DescriptorConfig(grid, size, tb, pb, 3.0)
        d = compute_descriptor(None, gradients_3d(textured_volume), _pt(11, 12, 9), cfg)
        assert d.shape == (grid ** 3 * tb * pb,)

    def test_constant_region_low_contrast(self):
        vol = FrameVolume(np.full((12, 12, 12), 0.5))
        with pytest.raises(LowContrast):
            compute_descriptor(vol, gradients_3d(vol), _pt(6, 6, 6))

    def test_out_of_bounds(self, textured_volume):
        with pytest.raises(SupportOutOfBounds):
            compute_descriptor(textured_volume, gradients_3d(textured_volume), _pt(2, 12, 9))

    def test_contrast_doubling(self):
        data = np.random.default_rng(3).uniform(0.05, 0.45, size=(16, 16, 16))
        p = _pt(8, 8, 8)
        a = compute_descriptor(None, gradients_3d(data), p)
        b = compute_descriptor(None, gradients_3d(np.clip(2 * data, 0, 1)), p)
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_gaussian_weight_at_centre(self):
        cfg = DescriptorConfig()
        shape = (10, 10, 10)
        p = _pt(5, 5, 5)
        solid = bin_solid_angles(cfg)
        prev = None
        for dx in range(0, 3):
            La = np.zeros(shape)
            La[5, 5, 5 + dx] = 1.0
            h = raw_histogram(GradientVolume(La, np.zeros(shape), np.zeros(shape)), p, cfg)
            value = h.sum() * solid[5]  # phi = 0 falls in elevation bin 5
            if dx == 0:
                assert value == 1.0
            else:
                assert value == pytest.approx(math.exp(-dx * dx / 32.0), abs=1e-15)
                assert value < prev
            prev = value

    def test_normalize_clamps(self):
        h = np.zeros(10)
        h[0], h[1] = 10.0, 1.0
        d = normalize_descriptor(h)
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-15)
        assert d[0] / d[1] == pytest.approx(0.2 / (1 / math.sqrt(101)), rel=1e-12)


class TestAzimuthShift:
    def test_lattice_rotation_permutes_bins(self):
        rng = np.random.default_rng(11)
        shape = (12, 12, 12)
        k = rng.integers(0, 8, size=shape)
        Lt = rng.normal(scale=40.0, size=shape)
        cfg = DescriptorConfig()
        p = _pt(6, 6, 6)
        h0 = raw_histogram(_lattice_field(k, Lt), p, cfg).reshape(2, 2, 2, 10, 8)
        h1 = raw_histogram(_lattice_field(k + 1, Lt), p, cfg).reshape(2, 2, 2, 10, 8)
        assert np.array_equal(np.roll(h0, 1, axis=-1), h1)
        assert np.array_equal(np.sort(h0, axis=None), np.sort(h1, axis=None))

    def test_quarter_turn_with_four_bins(self):
        rng = np.random.default_rng(12)
        shape = (12, 12, 12)
        La, Lb, Lt = rng.normal(size=(3,) + shape)
        cfg = DescriptorConfig(theta_bins=4)
        p = _pt(6, 6, 6)
        h0 = raw_histogram(GradientVolume(La, Lb, Lt), p, cfg).reshape(2, 2, 2, 10, 4)
        h1 = raw_histogram(GradientVolume(-Lb, La, Lt), p, cfg).reshape(2, 2, 2, 10, 4)
        np.testing.assert_allclose(np.roll(h0, 1, axis=-1), h1, rtol=1e-12, atol=0)


class TestDescribeKeypoints:
    def test_empty(self, textured_volume):
        assert describe_keypoints(textured_volume, []) == []

    def test_interior_point(self, textured_volume):
        out = describe_keypoints(textured_volume, [_pt(11, 12, 9)])
        assert len(out) == 1 and out[0][1].shape == (640,)

    def test_drops_and_keeps_order(self, textured_volume):
        pts = [_pt(0, 0, 0), _pt(12, 12, 10), _pt(11, 12, 9), _pt(23, 23, 19)]
        out = describe_keypoints(textured_volume, pts)
        assert [p for p, _ in out] == [pts[1], pts[2]]

    def test_estimator(self, textured_volume):
        est = SIFT3D(theta_bins=4).fit()
        assert est.config.dimension == 320
        assert len(est.describe(textured_volume, [_pt(11, 12, 9)])[0][1]) == 320
