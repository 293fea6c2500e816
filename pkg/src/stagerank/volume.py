"""3D volume/mask data model, bounding-box cropping, and augmentation.

Arrays are indexed ``values[x, y, z]`` with shape ``(nx, ny, nz)``. All
operations are pure: they never mutate their inputs, and any randomized
operation is a deterministic function of its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .errors import EmptyMask, MaskExceedsBox, ShapeMismatch

__all__ = [
    "Volume3D",
    "Mask3D",
    "Region",
    "BoundingBox",
    "crop_region",
    "translate",
    "enumerate_translations",
    "elastic_deform",
    "TRANSLATION_DIRECTIONS",
]


@dataclass(frozen=True)
class BoundingBox:
    """Fixed crop size in voxels."""

    dims: tuple[int, int, int]

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ShapeMismatch(f"bounding box dims must be three positive ints, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))


@dataclass(frozen=True)
class Volume3D:
    """Dense scalar intensity grid with isotropic-by-default voxel spacing."""

    values: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 3:
            raise ShapeMismatch(f"volume must be 3D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ShapeMismatch("volume contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


@dataclass(frozen=True)
class Mask3D:
    """Binary segmentation grid; 1 marks foreground."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values))
        if arr.ndim != 3:
            raise ShapeMismatch(f"mask must be 3D, got shape {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ShapeMismatch("mask values must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def voxel_count(self) -> int:
        return int(self.values.sum())

    def tight_extent(self) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
        """Inclusive (lo, hi) index range of the foreground per axis."""
        if self.voxel_count == 0:
            raise EmptyMask("mask has no foreground voxels")
        coords = np.nonzero(self.values)
        return tuple((int(c.min()), int(c.max())) for c in coords)


@dataclass(frozen=True)
class Region:
    """Paired left/right volume+mask blocks, optionally labeled with a rank.

    ``label`` is the 1-based severity rank, or None for unlabeled inference
    inputs. Both hemisphere blocks must share identical dims.
    """

    left: tuple[Volume3D, Mask3D]
    right: tuple[Volume3D, Mask3D]
    label: int | None = None
    region_id: str = field(default="", compare=False)

    def __post_init__(self):
        lv, lm = self.left
        rv, rm = self.right
        dims = {lv.dims, lm.dims, rv.dims, rm.dims}
        if len(dims) != 1:
            raise ShapeMismatch(f"left/right blocks disagree on dims: {sorted(dims)}")
        if self.label is not None and int(self.label) < 1:
            raise ShapeMismatch(f"label must be a positive rank, got {self.label}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.left[0].dims


def _box_center(dims: tuple[int, int, int]) -> tuple[int, int, int]:
    # Center voxel index with floor rounding on even sizes.
    return tuple((d - 1) // 2 for d in dims)


def crop_region(
    volume: Volume3D, mask: Mask3D, box: BoundingBox
) -> tuple[Volume3D, Mask3D]:
    """Crop a fixed-size block centered on the mask's tight extent.

    The center voxel of the mask's tight bounding extent maps to the box
    center (both with floor rounding on even sizes). Voxels sampled
    outside the source grid are zero-filled.
    """
    if volume.dims != mask.dims:
        raise ShapeMismatch(f"volume dims {volume.dims} != mask dims {mask.dims}")
    extent = mask.tight_extent()
    for axis, ((lo, hi), b) in enumerate(zip(extent, box.dims)):
        if hi - lo + 1 > b:
            raise MaskExceedsBox(
                f"mask extent {hi - lo + 1} exceeds box dim {b} on axis {axis}"
            )
    mask_center = tuple((lo + hi) // 2 for lo, hi in extent)
    box_center = _box_center(box.dims)
    offset = tuple(mc - bc for mc, bc in zip(mask_center, box_center))

    out_vol = np.zeros(box.dims, dtype=np.float64)
    out_msk = np.zeros(box.dims, dtype=np.uint8)
    src_slices, dst_slices = [], []
    for axis in range(3):
        src_lo = max(0, offset[axis])
        src_hi = min(volume.dims[axis], offset[axis] + box.dims[axis])
        dst_lo = src_lo - offset[axis]
        dst_hi = src_hi - offset[axis]
        src_slices.append(slice(src_lo, src_hi))
        dst_slices.append(slice(dst_lo, dst_hi))
    src_slices, dst_slices = tuple(src_slices), tuple(dst_slices)
    out_vol[dst_slices] = volume.values[src_slices]
    out_msk[dst_slices] = mask.values[src_slices]
    return Volume3D(out_vol, volume.spacing), Mask3D(out_msk)


def _shift(arr: np.ndarray, offset: tuple[int, int, int], fill=0) -> np.ndarray:
    """Shift array content by ``offset`` voxels, zero-filling vacated space."""
    out = np.full_like(arr, fill)
    src, dst = [], []
    for axis, d in enumerate(offset):
        n = arr.shape[axis]
        d = int(d)
        if abs(d) >= n:
            return out
        if d >= 0:
            src.append(slice(0, n - d))
            dst.append(slice(d, n))
        else:
            src.append(slice(-d, n))
            dst.append(slice(0, n + d))
    out[tuple(dst)] = arr[tuple(src)]
    return out


def translate(
    block: tuple[Volume3D, Mask3D], offset: tuple[int, int, int]
) -> tuple[Volume3D, Mask3D]:
    """Shift a volume+mask block by whole voxels.

    Content shifted past the border is clipped and vacated voxels are
    zero-filled; dims never change. Clipping is silent by design:
    augmentation must not abort a training run.
    """
    vol, msk = block
    if vol.dims != msk.dims:
        raise ShapeMismatch(f"volume dims {vol.dims} != mask dims {msk.dims}")
    return (
        Volume3D(_shift(vol.values, offset), vol.spacing),
        Mask3D(_shift(msk.values, offset)),
    )


#: The 26 nonzero directions of {-1, 0, 1}^3, in deterministic lexicographic order.
TRANSLATION_DIRECTIONS: tuple[tuple[int, int, int], ...] = tuple(
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
)


def enumerate_translations(region: Region, magnitude: int = 2) -> list[Region]:
    """All 26 single-step translations of a region, original excluded.

    Each output is the region translated by ``magnitude * d`` on both
    hemispheres, one per direction d in {-1,0,1}^3 minus the zero vector.
    """
    if magnitude < 1:
        raise ShapeMismatch(f"magnitude must be >= 1, got {magnitude}")
    out = []
    for d in TRANSLATION_DIRECTIONS:
        off = tuple(magnitude * c for c in d)
        out.append(
            Region(
                left=translate(region.left, off),
                right=translate(region.right, off),
                label=region.label,
                region_id=region.region_id,
            )
        )
    return out


def _displacement_field(
    shape: tuple[int, int, int], amplitude: float, smoothness: float, rng: np.random.Generator
) -> np.ndarray:
    """Smooth random displacement field, shape (3, nx, ny, nz), max |d| == amplitude per axis."""
    field = np.empty((3,) + shape, dtype=np.float64)
    for axis in range(3):
        noise = rng.standard_normal(shape)
        smooth = gaussian_filter(noise, sigma=smoothness, mode="reflect")
        peak = np.abs(smooth).max()
        field[axis] = smooth * (amplitude / peak) if peak > 0 else 0.0
    return field


def _warp_block(
    block: tuple[Volume3D, Mask3D], field: np.ndarray
) -> tuple[Volume3D, Mask3D]:
    vol, msk = block
    shape = vol.dims
    grid = np.indices(shape, dtype=np.float64)
    coords = grid + field
    warped_vol = map_coordinates(vol.values, coords, order=1, mode="constant", cval=0.0)
    warped_msk = map_coordinates(msk.values, coords, order=0, mode="constant", cval=0)
    return Volume3D(warped_vol, vol.spacing), Mask3D(warped_msk.astype(np.uint8))


def elastic_deform(
    region: Region, amplitude: float, smoothness: float, seed: int
) -> Region:
    """Apply a seeded smooth random deformation to both hemispheres.

    Per axis, Gaussian-smoothed white noise is rescaled so its peak
    displacement equals ``amplitude`` (voxel units), then applied as a
    backward warp: trilinear interpolation for intensities,
    nearest-neighbor for masks. amplitude 0 is the identity. Each
    hemisphere gets an independent field derived from the same seed.
    """
    if amplitude < 0:
        raise ShapeMismatch(f"amplitude must be >= 0, got {amplitude}")
    if smoothness < 1:
        raise ShapeMismatch(f"smoothness must be >= 1, got {smoothness}")
    if amplitude == 0:
        return region
    left_seed, right_seed = np.random.SeedSequence(seed).spawn(2)
    left_field = _displacement_field(
        region.dims, amplitude, smoothness, np.random.Generator(np.random.PCG64(left_seed))
    )
    right_field = _displacement_field(
        region.dims, amplitude, smoothness, np.random.Generator(np.random.PCG64(right_seed))
    )
    return Region(
        left=_warp_block(region.left, left_field),
        right=_warp_block(region.right, right_field),
        label=region.label,
        region_id=region.region_id,
    )
