from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as npst

from greenview.baseline import BaselineConfig, segment, threshold_green
from greenview.errors import EmptyAggregate, EmptyMask, MixedScope
from greenview.gvi import GviMeasurement, aggregate, gvi_of_mask

from conftest import image_from_array, mask_of


def image_measure(value: float, n: int = 1) -> GviMeasurement:
    return GviMeasurement(value=value, scope="image", n_images=n, source="baseline")


class TestGviOfMask:
    def test_all_true(self):
        assert gvi_of_mask(mask_of(np.ones((10, 10), dtype=bool))).value == 100.0

    def test_all_false(self):
        assert gvi_of_mask(mask_of(np.zeros((10, 10), dtype=bool))).value == 0.0

    def test_five_of_sixteen(self):
        bits = np.zeros((4, 4), dtype=bool)
        bits.flat[:5] = True
        m = gvi_of_mask(mask_of(bits))
        assert m.value == 31.25
        assert m.scope == "image" and m.n_images == 1

    def test_zero_pixels_rejected(self):
        with pytest.raises(EmptyMask):
            gvi_of_mask(mask_of(np.zeros((0, 0), dtype=bool)))

    @given(bits=npst.arrays(np.bool_, st.tuples(st.integers(1, 16), st.integers(1, 16))))
    @settings(max_examples=60, deadline=None)
    def test_depends_only_on_counts(self, bits):
        base = gvi_of_mask(mask_of(bits)).value
        shuffled = bits.flatten()
        np.random.default_rng(0).shuffle(shuffled)
        assert gvi_of_mask(mask_of(shuffled.reshape(bits.shape))).value == base


class TestAggregate:
    def test_mean_of_two(self):
        m = aggregate([image_measure(20.0), image_measure(40.0)], "point")
        assert m.value == 30.0 and m.n_images == 2 and m.scope == "point"

    def test_single_identity(self):
        assert aggregate([image_measure(17.5)], "point").value == 17.5

    def test_six_heading_point_matches_resummation(self):
        values = [12.0, 0.0, 37.5, 50.0, 25.0, 3.125]
        expected = sum(values) / len(values)  # independent re-summation
        got = aggregate([image_measure(v) for v in values], "point")
        assert abs(got.value - expected) < 1e-9
        assert got.n_images == 6

    def test_empty_rejected(self):
        with pytest.raises(EmptyAggregate):
            aggregate([], "point")

    def test_wrong_finer_scope_rejected(self):
        point = aggregate([image_measure(10.0)], "point")
        with pytest.raises(MixedScope):
            aggregate([point], "point")
        with pytest.raises(MixedScope):
            aggregate([image_measure(10.0)], "city")

    def test_mixed_scopes_rejected(self):
        point = aggregate([image_measure(10.0)], "point")
        with pytest.raises(MixedScope):
            aggregate([point, image_measure(5.0)], "city")

    def test_city_from_points(self):
        points = [aggregate([image_measure(v)], "point") for v in (10.0, 20.0, 60.0)]
        city = aggregate(points, "city")
        assert city.value == 30.0 and city.scope == "city" and city.n_images == 3

    def test_pooled_weights(self):
        # 50% of 4 pixels and 25% of 16 pixels pool to 6/20 = 30%
        ms = [image_measure(50.0), image_measure(25.0)]
        assert aggregate(ms, "point", weights=[4.0, 16.0]).value == 30.0

    @given(values=st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=12),
           seed=st.integers(0, 2**31))
    @settings(max_examples=60, deadline=None)
    def test_permutation_invariant_and_bounded(self, values, seed):
        ms = [image_measure(v) for v in values]
        base = aggregate(ms, "point")
        rng = np.random.default_rng(seed)
        perm = [ms[i] for i in rng.permutation(len(ms))]
        assert aggregate(perm, "point").value == base.value
        assert min(values) <= base.value <= max(values)


class TestMeasurementValidation:
    def test_value_range(self):
        with pytest.raises(ValueError):
            GviMeasurement(value=101.0, scope="image", n_images=1, source="baseline")

    def test_scope_and_source(self):
        with pytest.raises(ValueError):
            GviMeasurement(value=1.0, scope="street", n_images=1, source="baseline")
        with pytest.raises(ValueError):
            GviMeasurement(value=1.0, scope="image", n_images=1, source="guess")

    def test_n_images_positive(self):
        with pytest.raises(ValueError):
            GviMeasurement(value=1.0, scope="image", n_images=0, source="baseline")


class TestClusterFilterNeverRaisesGvi:
    @given(
        img=npst.arrays(np.uint8, st.tuples(st.integers(4, 24), st.integers(4, 24), st.just(3))),
        min_area=st.integers(0, 40),
    )
    @settings(max_examples=60, deadline=None)
    def test_segment_leq_threshold(self, img, min_area):
        cfg = BaselineConfig(min_cluster_area=min_area)
        raster = image_from_array(img)
        seg = gvi_of_mask(segment(raster, cfg)).value
        thr = gvi_of_mask(threshold_green(raster, cfg)).value
        assert seg <= thr
