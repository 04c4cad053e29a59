import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from srdetail.gradients import (
    GradientConfig,
    GradientField,
    compute_gradients,
    cosine_match,
    nearest_rank,
    percentile_filter,
)


def field_with_magnitudes(mags):
    """Field whose pixel magnitudes are exactly ``mags`` (all along x)."""
    gx = np.asarray(mags, dtype=float).reshape(1, -1)
    return GradientField(gx, np.zeros_like(gx), np.ones(gx.shape, bool))


class TestComputeGradients:
    def test_constant(self):
        g = compute_gradients(np.full((6, 7), 0.3))
        assert np.all(g.gx == 0) and np.all(g.gy == 0) and g.valid.all()

    def test_step_edge(self):
        c = 4
        img = np.zeros((5, 9))
        img[:, c:] = 1.0
        g = compute_gradients(img)
        expected = np.zeros(9)
        expected[[c - 1, c]] = 0.5
        for row in g.gx:
            np.testing.assert_array_equal(row, expected)
        assert np.all(g.gy == 0)

    def test_ramp(self):
        h, w = 6, 8
        yy, xx = np.mgrid[:h, :w]
        g = compute_gradients((xx + yy) / (w + h))
        inner = (slice(1, -1), slice(1, -1))
        # central difference of a ramp with slope s is 0.5 * (2 s) = s
        slope = 1.0 / (w + h)
        np.testing.assert_allclose(g.gx[inner], slope, rtol=1e-12)
        np.testing.assert_allclose(g.gy[inner], slope, rtol=1e-12)

    def test_border_replicates(self):
        img = np.array([[0.0, 0.2, 0.6], [0.0, 0.2, 0.6], [0.0, 0.2, 0.6]])
        g = compute_gradients(img)
        np.testing.assert_allclose(g.gx[0], [0.1, 0.3, 0.2])

    def test_rejects_small_and_color(self):
        with pytest.raises(ValueError):
            compute_gradients(np.zeros((2, 5)))
        with pytest.raises(ValueError):
            compute_gradients(np.zeros((5, 5, 3)))

    @settings(max_examples=40)
    @given(arrays(np.float64, (6, 7), elements=st.floats(0, 1)), st.floats(0, 1), st.floats(0, 1))
    def test_linear(self, img, a, b):
        scaled = a * img + b * (1 - a)  # keeps intensities within [0, 1]
        g, gs = compute_gradients(img), compute_gradients(scaled)
        np.testing.assert_allclose(gs.gx, a * g.gx, atol=1e-12)
        np.testing.assert_allclose(gs.gy, a * g.gy, atol=1e-12)

    @given(arrays(np.float64, (5, 6), elements=st.floats(0, 1)))
    def test_magnitude_bound(self, img):
        g = compute_gradients(img)
        assert np.all(np.abs(g.gx) <= 0.5) and np.all(np.abs(g.gy) <= 0.5)
        assert np.all(g.magnitude <= math.sqrt(0.5) + 1e-15)

    @given(arrays(np.float64, (6, 6), elements=st.floats(0, 1)))
    def test_edge_duplication_keeps_interior(self, img):
        dup = np.concatenate([img, img[:, -1:]], axis=1)
        g, gd = compute_gradients(img), compute_gradients(dup)
        np.testing.assert_array_equal(g.gx, gd.gx[:, :6])
        np.testing.assert_array_equal(g.gy, gd.gy[:, :6])


class TestPercentileFilter:
    def test_evenly_spaced(self):
        f = percentile_filter(field_with_magnitudes(0.001 * np.arange(1, 101)))
        assert f.valid_count == 85
        assert f.valid[0, :85].all() and not f.valid[0, 85:].any()

    def test_identical_magnitudes(self):
        f = percentile_filter(field_with_magnitudes(np.full(50, 0.2)))
        assert f.valid_count == 50

    def test_constant_frame_empties(self):
        f = percentile_filter(compute_gradients(np.full((5, 5), 0.4)))
        assert f.valid_count == 0

    def test_requires_valid_pixels(self):
        g = field_with_magnitudes([0.1, 0.2])
        with pytest.raises(ValueError):
            percentile_filter(g.with_valid(np.zeros((1, 2), bool)))

    def test_components_untouched(self):
        g = compute_gradients(np.random.default_rng(0).uniform(size=(8, 8)))
        f = percentile_filter(g)
        assert np.array_equal(f.gx, g.gx) and np.array_equal(f.gy, g.gy)

    def test_zero_dropped_before_percentile(self):
        f = percentile_filter(field_with_magnitudes([0, 0, 0, 0, 0.1, 0.2, 0.3, 0.4]),
                              GradientConfig(percentile_q=0.5))
        # percentile over the four nonzero values is 0.2
        assert f.valid.tolist() == [[False] * 4 + [True, True, False, False]]

    def test_drop_below(self):
        cfg = GradientConfig(filter_direction="drop-below")
        f = percentile_filter(field_with_magnitudes(0.001 * np.arange(1, 101)), cfg)
        assert f.valid_count == 16 and f.valid[0, 84:].all()

    def test_keep_zeros_when_disabled(self):
        cfg = GradientConfig(drop_zero_magnitude=False, percentile_q=1.0)
        f = percentile_filter(field_with_magnitudes([0.0, 0.1]), cfg)
        assert f.valid_count == 2

    @settings(max_examples=50)
    @given(st.integers(1, 400), st.integers(0, 2**32 - 1))
    def test_retained_fraction(self, n, seed):
        mags = np.random.default_rng(seed).permutation(np.arange(1, n + 1)) / (n + 1)
        f = percentile_filter(field_with_magnitudes(mags))
        assert abs(f.valid_count / n - 0.85) <= 1 / n

    def test_nearest_rank_definition(self):
        vals = np.array([15, 20, 35, 40, 50], float)
        # classic worked example: 30th percentile is 20, 40th 20, 50th 35, 100th 50
        assert [nearest_rank(vals, q) for q in (0.3, 0.4, 0.5, 1.0)] == [20, 20, 35, 50]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GradientConfig(percentile_q=0)
        with pytest.raises(ValueError):
            GradientConfig(cosine_threshold=-1)


class TestCosineMatch:
    def test_parallel(self):
        assert cosine_match((0.3, 0), (0.5, 0))

    def test_orthogonal(self):
        assert not cosine_match((0.3, 0), (0, 0.3))

    def test_thirty_degrees(self):
        assert cosine_match((1, 0), (math.cos(math.pi / 6), math.sin(math.pi / 6)))

    def test_forty_degrees_fails(self):
        assert not cosine_match((1, 0), (math.cos(math.radians(40)), math.sin(math.radians(40))))

    def test_zero_vectors(self):
        assert not cosine_match((0, 0), (1, 0))
        assert not cosine_match((0, 0), (0, 0))

    def test_strict_threshold(self):
        assert not cosine_match((1, 0), (1, 0), tau=1.0)

    vec = st.tuples(st.floats(-1, 1), st.floats(-1, 1))

    @given(vec, vec, st.floats(-0.99, 1))
    def test_symmetric(self, a, b, tau):
        assert cosine_match(a, b, tau) == cosine_match(b, a, tau)

    @given(st.tuples(st.floats(-1, 1).filter(lambda v: abs(v) > 1e-3), st.floats(-1, 1)),
           st.sampled_from([0.5, 2.0, 4.0, 0.25]))
    def test_scale_invariant(self, a, k):
        for ang in np.linspace(0, np.pi, 13):
            b = (math.cos(ang), math.sin(ang))
            c = math.cos(ang - math.atan2(a[1], a[0]))
            if abs(c - 0.85) < 1e-9:
                continue
            assert cosine_match(a, b) == cosine_match((k * a[0], k * a[1]), b)
