"""Texture matrices and statistics against hand-worked and brute-force oracles."""

import numpy as np
import pytest

from stagerank.errors import EmptyMask, NoValidPairsWarning, ShapeMismatch
from stagerank.features.texture import (
    DIRECTIONS_13,
    FIRST_ORDER_NAMES,
    GLCM_NAMES,
    GLRLM_NAMES,
    GLSZM_NAMES,
    GrayLevelImage,
    first_order_features,
    glcm_features,
    glrlm_features,
    glszm_features,
    quantize,
)
from stagerank.volume import Mask3D, Volume3D


def gray(levels, ng=None, mask=None):
    levels = np.asarray(levels, dtype=np.int32)
    if levels.ndim == 1:
        levels = levels[:, None, None]
    elif levels.ndim == 2:
        levels = levels[:, :, None]
    if mask is None:
        mask = (levels > 0).astype(np.uint8)
    return GrayLevelImage(levels=levels, ng=ng or int(levels.max()),
                          mask=Mask3D(np.asarray(mask, dtype=np.uint8)))


def runs_brute(g: GrayLevelImage, offset):
    """Reference run extraction: scan every voxel, follow each maximal run."""
    inm = g.mask.values == 1
    dims = g.dims
    runs = []
    for start in zip(*np.nonzero(inm)):
        prev = tuple(np.subtract(start, offset))
        if all(0 <= p < d for p, d in zip(prev, dims)) and inm[prev] \
                and g.levels[prev] == g.levels[start]:
            continue  # not the head of a run
        length, cur = 0, start
        while all(0 <= c < d for c, d in zip(cur, dims)) and inm[cur] \
                and g.levels[cur] == g.levels[start]:
            length += 1
            cur = tuple(np.add(cur, offset))
        runs.append((int(g.levels[start]), length))
    return sorted(runs)


def zones_brute(g: GrayLevelImage):
    """Reference zones: 26-connected flood fill per gray level."""
    inm = g.mask.values == 1
    seen = np.zeros(g.dims, dtype=bool)
    zones = []
    neighborhood = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
                    for dz in (-1, 0, 1) if (dx, dy, dz) != (0, 0, 0)]
    for seed in zip(*np.nonzero(inm)):
        if seen[seed]:
            continue
        level = int(g.levels[seed])
        stack, size = [seed], 0
        seen[seed] = True
        while stack:
            v = stack.pop()
            size += 1
            for d in neighborhood:
                w = tuple(np.add(v, d))
                if all(0 <= c < n for c, n in zip(w, g.dims)) and not seen[w] \
                        and inm[w] and g.levels[w] == level:
                    seen[w] = True
                    stack.append(w)
        zones.append((level, size))
    return sorted(zones)


class TestDirections:
    def test_thirteen_unique_half_space_directions(self):
        assert len(DIRECTIONS_13) == 13
        assert len(set(DIRECTIONS_13)) == 13
        for d in DIRECTIONS_13:
            assert set(d) <= {-1, 0, 1} and d != (0, 0, 0)
            first_nonzero = next(c for c in d if c != 0)
            assert first_nonzero == 1  # canonical orientation
        # no direction may appear with its negation
        negs = {tuple(-c for c in d) for d in DIRECTIONS_13}
        assert not negs & set(DIRECTIONS_13)


class TestQuantize:
    def test_equal_width_binning(self):
        vol = Volume3D(np.array([0.0, 0.25, 0.5, 1.0]).reshape(4, 1, 1))
        g = quantize(vol, Mask3D(np.ones((4, 1, 1), dtype=np.uint8)), ng=2)
        np.testing.assert_array_equal(g.levels[:, 0, 0], [1, 1, 2, 2])

    def test_maximum_maps_to_top_level(self):
        vol = Volume3D(np.linspace(0, 1, 8).reshape(8, 1, 1))
        g = quantize(vol, Mask3D(np.ones((8, 1, 1), dtype=np.uint8)), ng=4)
        assert g.levels[-1, 0, 0] == 4
        assert g.levels[0, 0, 0] == 1

    def test_constant_image_is_level_one(self):
        vol = Volume3D(np.full((3, 3, 3), 2.5))
        g = quantize(vol, Mask3D(np.ones((3, 3, 3), dtype=np.uint8)), ng=8)
        assert set(np.unique(g.levels)) == {1}

    def test_outside_mask_is_zero(self):
        mask = np.zeros((3, 1, 1), dtype=np.uint8)
        mask[0] = 1
        g = quantize(Volume3D(np.ones((3, 1, 1))), Mask3D(mask), ng=2)
        assert g.levels[1, 0, 0] == 0 and g.levels[2, 0, 0] == 0

    def test_preserves_ordering(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(6, 5, 4))
        vol = Volume3D(vals)
        g = quantize(vol, Mask3D(np.ones((6, 5, 4), dtype=np.uint8)), ng=5)
        flat_v, flat_l = vals.ravel(), g.levels.ravel()
        order = np.argsort(flat_v, kind="stable")
        assert (np.diff(flat_l[order]) >= 0).all()

    def test_empty_mask_raises(self):
        with pytest.raises(EmptyMask):
            quantize(Volume3D(np.ones((2, 2, 2))),
                     Mask3D(np.zeros((2, 2, 2), dtype=np.uint8)), ng=2)

    def test_ng_lower_bound(self):
        with pytest.raises(ShapeMismatch):
            quantize(Volume3D(np.ones((2, 2, 2))),
                     Mask3D(np.ones((2, 2, 2), dtype=np.uint8)), ng=1)


class TestFirstOrder:
    def test_hand_oracle_one_to_four(self):
        vol = Volume3D(np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1, 1))
        mask = Mask3D(np.ones((4, 1, 1), dtype=np.uint8))
        g = quantize(vol, mask, ng=4)
        f = first_order_features(g, vol, mask)
        assert f["mean"] == 2.5
        assert f["median"] == 2.5
        assert f["variance"] == 1.25
        assert f["energy"] == 30.0
        assert f["skewness"] == 0.0
        assert f["kurtosis"] == pytest.approx(1.64, abs=1e-12)
        assert f["minimum"] == 1.0 and f["maximum"] == 4.0 and f["range"] == 3.0
        # P10=1.3, P90=3.7 keep {2,3}; MAD about their mean 2.5 is 0.5
        assert f["robust_mad"] == pytest.approx(0.5, abs=1e-12)
        # four equally likely levels
        assert f["entropy"] == pytest.approx(2.0, abs=1e-12)
        assert f["uniformity"] == pytest.approx(0.25, abs=1e-12)

    def test_constant_image(self):
        vol = Volume3D(np.full((3, 3, 3), 7.0))
        mask = Mask3D(np.ones((3, 3, 3), dtype=np.uint8))
        g = quantize(vol, mask, ng=4)
        f = first_order_features(g, vol, mask)
        assert f["variance"] == 0.0
        assert f["skewness"] == 0.0 and f["kurtosis"] == 0.0
        assert f["entropy"] == 0.0
        assert f["uniformity"] == 1.0

    def test_name_inventory(self):
        vol = Volume3D(np.arange(8, dtype=np.float64).reshape(2, 2, 2))
        mask = Mask3D(np.ones((2, 2, 2), dtype=np.uint8))
        f = first_order_features(quantize(vol, mask, 4), vol, mask)
        assert tuple(f) == FIRST_ORDER_NAMES


class TestGlcm:
    def test_hand_oracle_two_level_grid(self):
        g = gray([[1, 2], [1, 2]])
        f = glcm_features(g, offsets=((0, 1, 0),))
        assert f["contrast"] == pytest.approx(1.0, abs=1e-9)
        assert f["dissimilarity"] == pytest.approx(1.0, abs=1e-9)
        assert f["joint_energy"] == pytest.approx(0.5, abs=1e-9)
        assert f["joint_entropy"] == pytest.approx(1.0, abs=1e-9)
        assert f["homogeneity"] == pytest.approx(0.5, abs=1e-9)
        assert f["correlation"] == pytest.approx(-1.0, abs=1e-9)
        assert f["cluster_shade"] == pytest.approx(0.0, abs=1e-9)
        assert f["cluster_prominence"] == pytest.approx(0.0, abs=1e-9)

    def test_uniform_level_pairs(self):
        g = gray(np.ones((3, 3), dtype=np.int32), ng=2)
        f = glcm_features(g, offsets=((1, 0, 0),))
        assert f["contrast"] == 0.0
        assert f["joint_energy"] == 1.0
        assert f["correlation"] == 1.0  # zero-variance convention

    def test_direction_average(self):
        levels = np.array([[1, 2, 1], [2, 1, 2], [1, 2, 1]], dtype=np.int32)
        g = gray(levels)
        fx = glcm_features(g, offsets=((1, 0, 0),))
        fy = glcm_features(g, offsets=((0, 1, 0),))
        both = glcm_features(g, offsets=((1, 0, 0), (0, 1, 0)))
        for name in GLCM_NAMES:
            assert both[name] == pytest.approx((fx[name] + fy[name]) / 2, abs=1e-12)

    def test_symmetry_under_offset_reversal(self):
        rng = np.random.default_rng(3)
        levels = rng.integers(1, 5, size=(4, 5, 3)).astype(np.int32)
        g = gray(levels, ng=4)
        fwd = glcm_features(g, offsets=((1, 0, 0),))
        rev = glcm_features(g, offsets=((-1, 0, 0),))
        for name in GLCM_NAMES:
            assert fwd[name] == pytest.approx(rev[name], abs=1e-12)

    def test_sparse_mask_warns_and_zeroes(self):
        mask = np.zeros((5, 5, 5), dtype=np.uint8)
        mask[2, 2, 2] = 1
        levels = mask.astype(np.int32)
        g = GrayLevelImage(levels=levels, ng=2, mask=Mask3D(mask))
        with pytest.warns(NoValidPairsWarning):
            f = glcm_features(g)
        assert all(f[name] == 0.0 for name in GLCM_NAMES)


class TestGlrlm:
    def test_hand_oracle_single_row(self):
        g = gray([1, 1, 2, 2, 2])
        f = glrlm_features(g, offsets=((1, 0, 0),))
        assert f["short_run_emphasis"] == pytest.approx((1 / 4 + 1 / 9) / 2, abs=1e-9)
        assert f["long_run_emphasis"] == pytest.approx((4 + 9) / 2, abs=1e-9)
        assert f["gray_level_nonuniformity"] == pytest.approx(1.0, abs=1e-9)
        assert f["run_length_nonuniformity"] == pytest.approx(1.0, abs=1e-9)
        assert f["run_percentage"] == pytest.approx(2 / 5, abs=1e-9)
        assert f["low_gray_run_emphasis"] == pytest.approx((1 + 1 / 4) / 2, abs=1e-9)
        assert f["high_gray_run_emphasis"] == pytest.approx((1 + 4) / 2, abs=1e-9)

    def test_mask_gap_splits_runs(self):
        mask = np.ones((5, 1, 1), dtype=np.uint8)
        mask[2] = 0
        g = gray([1, 1, 0, 1, 1], mask=mask.reshape(5, 1, 1))
        f = glrlm_features(g, offsets=((1, 0, 0),))
        # two runs of length 2 over 4 in-mask voxels
        assert f["run_percentage"] == pytest.approx(0.5, abs=1e-12)
        assert f["long_run_emphasis"] == pytest.approx(4.0, abs=1e-12)

    @pytest.mark.parametrize("offset", DIRECTIONS_13)
    def test_runs_match_brute_force_per_direction(self, offset):
        rng = np.random.default_rng(11)
        levels = rng.integers(1, 4, size=(5, 4, 6)).astype(np.int32)
        mask = (rng.random((5, 4, 6)) < 0.8).astype(np.uint8)
        levels *= mask
        g = GrayLevelImage(levels=levels, ng=3, mask=Mask3D(mask))
        expected = runs_brute(g, offset)
        from stagerank.features.texture import _runs_along

        got_levels, got_lengths = _runs_along(g, offset)
        got = sorted(zip(got_levels.tolist(), got_lengths.tolist()))
        assert got == expected

    def test_all_direction_average_matches_brute_force(self):
        rng = np.random.default_rng(5)
        levels = rng.integers(1, 4, size=(4, 4, 4)).astype(np.int32)
        g = gray(levels, ng=3)
        f = glrlm_features(g)
        n_voxels = 64
        acc = {name: 0.0 for name in GLRLM_NAMES}
        for d in DIRECTIONS_13:
            runs = runs_brute(g, d)
            lv = np.array([r[0] for r in runs], dtype=np.float64)
            ln = np.array([r[1] for r in runs], dtype=np.float64)
            n = len(runs)
            acc["short_run_emphasis"] += np.sum(1 / ln**2) / n
            acc["long_run_emphasis"] += np.sum(ln**2) / n
            acc["gray_level_nonuniformity"] += sum(
                np.sum(lv == v) ** 2 for v in np.unique(lv)) / n
            acc["run_length_nonuniformity"] += sum(
                np.sum(ln == v) ** 2 for v in np.unique(ln)) / n
            acc["run_percentage"] += n / n_voxels
            acc["low_gray_run_emphasis"] += np.sum(1 / lv**2) / n
            acc["high_gray_run_emphasis"] += np.sum(lv**2) / n
        for name in GLRLM_NAMES:
            assert f[name] == pytest.approx(acc[name] / 13, abs=1e-9), name


class TestGlszm:
    def test_hand_oracle_three_zones(self):
        g = gray([[1, 1], [2, 3]])
        f = glszm_features(g)
        assert f["small_area_emphasis"] == pytest.approx(0.75, abs=1e-9)
        assert f["large_area_emphasis"] == pytest.approx(2.0, abs=1e-9)
        assert f["gray_level_nonuniformity"] == pytest.approx(1.0, abs=1e-9)
        assert f["size_zone_nonuniformity"] == pytest.approx(5 / 3, abs=1e-9)
        assert f["zone_percentage"] == pytest.approx(3 / 4, abs=1e-9)
        assert f["zone_entropy"] == pytest.approx(np.log2(3), abs=1e-9)

    def test_diagonal_voxels_share_a_zone(self):
        # 26-connectivity joins the two diagonal level-1 voxels
        g = gray([[1, 2], [2, 1]])
        zones = zones_brute(g)
        assert zones == [(1, 2), (2, 2)]
        f = glszm_features(g)
        assert f["zone_percentage"] == pytest.approx(0.5, abs=1e-12)

    def test_zones_match_brute_force_random(self):
        rng = np.random.default_rng(2)
        levels = rng.integers(1, 4, size=(6, 5, 4)).astype(np.int32)
        mask = (rng.random((6, 5, 4)) < 0.7).astype(np.uint8)
        levels *= mask
        g = GrayLevelImage(levels=levels, ng=3, mask=Mask3D(mask))
        from stagerank.features.texture import _zones

        got_levels, got_sizes = _zones(g)
        assert sorted(zip(got_levels.tolist(), got_sizes.tolist())) == zones_brute(g)

    def test_name_inventory(self):
        f = glszm_features(gray([[1, 1], [2, 3]]))
        assert tuple(f) == GLSZM_NAMES
