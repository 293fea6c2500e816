"""Quantization and texture-matrix features over a masked 3D image.

Co-occurrence (GLCM) and run-length (GLRLM) statistics use the 13 unique
3D direction offsets at distance 1 (the 26-neighborhood halved by
symmetry); size-zone (GLSZM) statistics use 26-connected components.
Features are averaged over directions where a per-direction matrix is
defined.

Gray levels are 1..Ng inside the mask and 0 outside. All matrices are
built only from voxel (pairs) fully inside the mask.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import label as cc_label

from ..errors import EmptyMask, ShapeMismatch
from ..volume import Mask3D, Volume3D

__all__ = [
    "GrayLevelImage",
    "quantize",
    "first_order_features",
    "glcm_features",
    "glrlm_features",
    "glszm_features",
    "DIRECTIONS_13",
    "FIRST_ORDER_NAMES",
    "GLCM_NAMES",
    "GLRLM_NAMES",
    "GLSZM_NAMES",
]

#: 13 unique offsets: one representative per +-pair of the 26-neighborhood,
#: canonicalized so the first nonzero component is positive.
DIRECTIONS_13: tuple[tuple[int, int, int], ...] = tuple(
    d
    for d in (
        (dx, dy, dz)
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
        if (dx, dy, dz) != (0, 0, 0)
    )
    if next(c for c in d if c != 0) > 0
)

FIRST_ORDER_NAMES = (
    "mean",
    "median",
    "variance",
    "skewness",
    "kurtosis",
    "energy",
    "entropy",
    "minimum",
    "maximum",
    "range",
    "robust_mad",
    "uniformity",
)

GLCM_NAMES = (
    "contrast",
    "correlation",
    "joint_energy",
    "joint_entropy",
    "homogeneity",
    "dissimilarity",
    "cluster_shade",
    "cluster_prominence",
)

GLRLM_NAMES = (
    "short_run_emphasis",
    "long_run_emphasis",
    "gray_level_nonuniformity",
    "run_length_nonuniformity",
    "run_percentage",
    "low_gray_run_emphasis",
    "high_gray_run_emphasis",
)

GLSZM_NAMES = (
    "small_area_emphasis",
    "large_area_emphasis",
    "gray_level_nonuniformity",
    "size_zone_nonuniformity",
    "zone_percentage",
    "zone_entropy",
)


@dataclass(frozen=True)
class GrayLevelImage:
    """Discretized intensities: levels 1..ng inside the mask, 0 outside."""

    levels: np.ndarray
    ng: int
    mask: Mask3D

    def __post_init__(self):
        lv = np.ascontiguousarray(np.asarray(self.levels, dtype=np.int32))
        if lv.shape != self.mask.dims:
            raise ShapeMismatch(f"levels shape {lv.shape} != mask dims {self.mask.dims}")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.levels.shape


def quantize(volume: Volume3D, mask: Mask3D, ng: int) -> GrayLevelImage:
    """Equal-width binning of within-mask intensities into 1..ng.

    The within-mask maximum maps to bin ng; a constant image maps
    entirely to bin 1. Binning preserves intensity ordering.
    """
    if ng < 2:
        raise ShapeMismatch(f"ng must be >= 2, got {ng}")
    if volume.dims != mask.dims:
        raise ShapeMismatch(f"volume dims {volume.dims} != mask dims {mask.dims}")
    inside = mask.values == 1
    if not inside.any():
        raise EmptyMask("quantize needs a nonempty mask")
    vals = volume.values[inside]
    vmin, vmax = float(vals.min()), float(vals.max())
    levels = np.zeros(volume.dims, dtype=np.int32)
    if vmax == vmin:
        levels[inside] = 1
    else:
        width = (vmax - vmin) / ng
        binned = np.floor((vals - vmin) / width).astype(np.int32) + 1
        levels[inside] = np.clip(binned, 1, ng)
    return GrayLevelImage(levels=levels, ng=ng, mask=mask)


def _level_histogram(gray: GrayLevelImage) -> np.ndarray:
    inside = gray.mask.values == 1
    counts = np.bincount(gray.levels[inside], minlength=gray.ng + 1)[1:]
    return counts / counts.sum()


def first_order_features(
    gray: GrayLevelImage, raw: Volume3D, mask: Mask3D
) -> dict[str, float]:
    """Within-mask intensity statistics.

    Moments and extrema come from the raw intensities; entropy and
    uniformity come from the gray-level histogram (base-2 entropy).
    Skewness and kurtosis are defined as 0 on zero variance.
    """
    inside = mask.values == 1
    if not inside.any():
        raise EmptyMask("first-order features need a nonempty mask")
    vals = raw.values[inside]
    mean = float(vals.mean())
    centered = vals - mean
    var = float(np.mean(centered**2))
    if var > 0:
        std = np.sqrt(var)
        skew = float(np.mean(centered**3) / std**3)
        kurt = float(np.mean(centered**4) / var**2)
    else:
        skew = kurt = 0.0
    p10, p90 = np.percentile(vals, [10.0, 90.0])
    robust = vals[(vals >= p10) & (vals <= p90)]
    rmad = float(np.mean(np.abs(robust - robust.mean())))
    p = _level_histogram(gray)
    nz = p[p > 0]
    return {
        "mean": mean,
        "median": float(np.median(vals)),
        "variance": var,
        "skewness": skew,
        "kurtosis": kurt,
        "energy": float(np.sum(vals**2)),
        "entropy": float(-np.sum(nz * np.log2(nz))),
        "minimum": float(vals.min()),
        "maximum": float(vals.max()),
        "range": float(vals.max() - vals.min()),
        "robust_mad": rmad,
        "uniformity": float(np.sum(p**2)),
    }


def _offset_slices(dims, offset):
    src, dst = [], []
    for n, d in zip(dims, offset):
        if d >= 0:
            src.append(slice(0, n - d))
            dst.append(slice(d, n))
        else:
            src.append(slice(-d, n))
            dst.append(slice(0, n + d))
    return tuple(src), tuple(dst)


def _glcm_matrix(gray: GrayLevelImage, offset) -> np.ndarray | None:
    """Symmetric normalized co-occurrence matrix for one offset, or None."""
    src, dst = _offset_slices(gray.dims, offset)
    valid = (gray.mask.values[src] == 1) & (gray.mask.values[dst] == 1)
    if not valid.any():
        return None
    a = gray.levels[src][valid] - 1
    b = gray.levels[dst][valid] - 1
    ng = gray.ng
    counts = np.bincount(a * ng + b, minlength=ng * ng).reshape(ng, ng).astype(np.float64)
    counts = counts + counts.T
    return counts / counts.sum()


@lru_cache(maxsize=8)
def _glcm_grids(ng: int):
    i, j = np.meshgrid(np.arange(1, ng + 1), np.arange(1, ng + 1), indexing="ij")
    return i.astype(np.float64), j.astype(np.float64)


def _glcm_features_one(p: np.ndarray, ng: int) -> dict[str, float]:
    i, j = _glcm_grids(ng)
    diff = i - j
    mu_x = float(np.sum(p * i))
    mu_y = float(np.sum(p * j))
    var_x = float(np.sum(p * (i - mu_x) ** 2))
    var_y = float(np.sum(p * (j - mu_y) ** 2))
    if var_x > 0 and var_y > 0:
        correlation = float(np.sum(p * (i - mu_x) * (j - mu_y)) / np.sqrt(var_x * var_y))
    else:
        correlation = 1.0  # single occupied level: perfectly correlated
    nz = p[p > 0]
    spread = i + j - mu_x - mu_y
    return {
        "contrast": float(np.sum(p * diff**2)),
        "correlation": correlation,
        "joint_energy": float(np.sum(p**2)),
        "joint_entropy": float(-np.sum(nz * np.log2(nz))),
        "homogeneity": float(np.sum(p / (1.0 + diff**2))),
        "dissimilarity": float(np.sum(p * np.abs(diff))),
        "cluster_shade": float(np.sum(p * spread**3)),
        "cluster_prominence": float(np.sum(p * spread**4)),
    }


def glcm_features(
    gray: GrayLevelImage, offsets=DIRECTIONS_13, distance: int = 1
) -> dict[str, float]:
    """Co-occurrence features averaged over directions with valid pairs.

    If no direction yields a single in-mask pair, returns all zeros and
    emits ``NoValidPairsWarning`` instead of aborting.
    """
    from ..errors import NoValidPairsWarning

    if not (gray.mask.values == 1).any():
        raise EmptyMask("GLCM needs a nonempty mask")
    per_direction = []
    for d in offsets:
        scaled = tuple(distance * c for c in d)
        p = _glcm_matrix(gray, scaled)
        if p is not None:
            per_direction.append(_glcm_features_one(p, gray.ng))
    if not per_direction:
        warnings.warn("mask too sparse for any co-occurrence pair", NoValidPairsWarning)
        return {name: 0.0 for name in GLCM_NAMES}
    return {
        name: float(np.mean([f[name] for f in per_direction])) for name in GLCM_NAMES
    }


@lru_cache(maxsize=64)
def _line_order(dims: tuple[int, int, int], offset: tuple[int, int, int]):
    """Sorted traversal of the grid along ``offset`` lines.

    Returns (order, new_line): ``order`` indexes the flattened C-order
    grid so that voxels of each line appear consecutively in step order,
    and ``new_line[p]`` flags the first voxel of each line.
    """
    coords = np.indices(dims).reshape(3, -1)
    lead = next(a for a in range(3) if offset[a] != 0)
    t = coords[lead] * offset[lead]
    invariants = [coords[a] - t * offset[a] for a in range(3) if a != lead]
    order = np.lexsort((t, invariants[1], invariants[0]))
    k1 = invariants[0][order]
    k2 = invariants[1][order]
    new_line = np.empty(order.size, dtype=bool)
    new_line[0] = True
    new_line[1:] = (k1[1:] != k1[:-1]) | (k2[1:] != k2[:-1])
    return order, new_line


def _runs_along(gray: GrayLevelImage, offset) -> tuple[np.ndarray, np.ndarray]:
    """(gray level, length) of every maximal in-mask run along ``offset``."""
    order, new_line = _line_order(gray.dims, tuple(offset))
    lvl = gray.levels.ravel()[order]
    inm = gray.mask.values.ravel()[order].astype(bool)
    n = lvl.size
    brk = np.empty(n, dtype=bool)  # run boundary before position p
    brk[0] = True
    brk[1:] = new_line[1:] | ~inm[:-1] | (lvl[1:] != lvl[:-1])
    starts = inm & brk
    ends = np.empty(n, dtype=bool)
    ends[-1] = True
    ends[:-1] = new_line[1:] | ~inm[1:] | (lvl[1:] != lvl[:-1])
    ends &= inm
    s = np.flatnonzero(starts)
    e = np.flatnonzero(ends)
    return lvl[s], (e - s + 1).astype(np.int64)


def glrlm_features(gray: GrayLevelImage, offsets=DIRECTIONS_13) -> dict[str, float]:
    """Run-length features averaged over the 13 directions."""
    inside = gray.mask.values == 1
    n_voxels = int(inside.sum())
    if n_voxels == 0:
        raise EmptyMask("GLRLM needs a nonempty mask")
    acc = {name: 0.0 for name in GLRLM_NAMES}
    for d in offsets:
        levels, lengths = _runs_along(gray, d)
        n_runs = lengths.size
        lengths_f = lengths.astype(np.float64)
        levels_f = levels.astype(np.float64)
        level_counts = np.bincount(levels)
        length_counts = np.bincount(lengths)
        acc["short_run_emphasis"] += np.sum(1.0 / lengths_f**2) / n_runs
        acc["long_run_emphasis"] += np.sum(lengths_f**2) / n_runs
        acc["gray_level_nonuniformity"] += np.sum(level_counts.astype(np.float64) ** 2) / n_runs
        acc["run_length_nonuniformity"] += np.sum(length_counts.astype(np.float64) ** 2) / n_runs
        acc["run_percentage"] += n_runs / n_voxels
        acc["low_gray_run_emphasis"] += np.sum(1.0 / levels_f**2) / n_runs
        acc["high_gray_run_emphasis"] += np.sum(levels_f**2) / n_runs
    return {name: value / len(offsets) for name, value in acc.items()}


_CONN26 = np.ones((3, 3, 3), dtype=np.int8)


def _zones(gray: GrayLevelImage) -> tuple[np.ndarray, np.ndarray]:
    """(gray level, size) of every 26-connected equal-level zone in the mask."""
    inside = gray.mask.values == 1
    zone_levels, zone_sizes = [], []
    for g in np.unique(gray.levels[inside]):
        component, count = cc_label((gray.levels == g) & inside, structure=_CONN26)
        sizes = np.bincount(component.ravel())[1:]
        zone_levels.extend([int(g)] * count)
        zone_sizes.extend(int(s) for s in sizes)
    return np.array(zone_levels, dtype=np.int64), np.array(zone_sizes, dtype=np.int64)


def glszm_features(gray: GrayLevelImage) -> dict[str, float]:
    """Size-zone features over 26-connected equal-level components."""
    inside = gray.mask.values == 1
    n_voxels = int(inside.sum())
    if n_voxels == 0:
        raise EmptyMask("GLSZM needs a nonempty mask")
    levels, sizes = _zones(gray)
    n_zones = sizes.size
    sizes_f = sizes.astype(np.float64)
    level_counts = np.bincount(levels)
    size_counts = np.bincount(sizes)
    # zone-matrix cells: distinct (level, size) pairs with multiplicity
    cells = np.unique(levels * (sizes.max() + 1) + sizes, return_counts=True)[1]
    p_cells = cells / n_zones
    return {
        "small_area_emphasis": float(np.sum(1.0 / sizes_f**2) / n_zones),
        "large_area_emphasis": float(np.sum(sizes_f**2) / n_zones),
        "gray_level_nonuniformity": float(np.sum(level_counts.astype(np.float64) ** 2) / n_zones),
        "size_zone_nonuniformity": float(np.sum(size_counts.astype(np.float64) ** 2) / n_zones),
        "zone_percentage": float(n_zones / n_voxels),
        "zone_entropy": float(-np.sum(p_cells * np.log2(p_cells))),
    }
