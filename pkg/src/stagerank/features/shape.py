"""Mask-geometry descriptors: size, surface, diameters, and moments.

All computations use voxel centers in mm, taken relative to the mask's
tight lower corner so that values are bit-identical under whole-voxel
translation of the mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ..errors import EmptyMask
from ..volume import Mask3D

__all__ = ["ShapeFeatures", "shape_features", "SHAPE_FEATURE_NAMES"]

SHAPE_FEATURE_NAMES = (
    "volume",
    "max_diameter_3d",
    "max_diameter_2d_column",
    "max_diameter_2d_row",
    "max_diameter_2d_slice",
    "surface_area",
    "surface_volume_ratio",
    "flatness",
    "sphericity",
    "elongation",
    "spherical_disproportion",
)


@dataclass(frozen=True)
class ShapeFeatures:
    """The 11 mask-shape descriptors, in mm-based units."""

    volume: float
    max_diameter_3d: float
    max_diameter_2d_column: float
    max_diameter_2d_row: float
    max_diameter_2d_slice: float
    surface_area: float
    surface_volume_ratio: float
    flatness: float
    sphericity: float
    elongation: float
    spherical_disproportion: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in SHAPE_FEATURE_NAMES], dtype=np.float64)


def _exposed_face_area(mask: np.ndarray, spacing: tuple[float, float, float]) -> float:
    """Total area of foreground faces not shared with another foreground voxel."""
    sx, sy, sz = spacing
    face_area = (sy * sz, sx * sz, sx * sy)
    total = 0.0
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        inner = mask[tuple(lo)] != mask[tuple(hi)]
        boundary = int(mask.take(0, axis=axis).sum()) + int(mask.take(-1, axis=axis).sum())
        total += (int(inner.sum()) + boundary) * face_area[axis]
    return total


def _surface_voxels(mask: np.ndarray) -> np.ndarray:
    """Foreground voxels with at least one exposed 6-neighborhood face."""
    padded = np.pad(mask, 1)
    core = padded[1:-1, 1:-1, 1:-1]
    exposed = np.zeros_like(core, dtype=bool)
    for axis in range(3):
        for step in (-1, 1):
            neighbor = np.roll(padded, step, axis=axis)[1:-1, 1:-1, 1:-1]
            exposed |= (core == 1) & (neighbor == 0)
    return np.argwhere(exposed)


def _max_pairwise(points_mm: np.ndarray) -> float:
    if points_mm.shape[0] < 2:
        return 0.0
    return float(pdist(points_mm).max())


def _max_inplane(coords: np.ndarray, spacing: tuple[float, float, float], axis: int) -> float:
    """Largest in-plane diameter over all planes orthogonal to ``axis``."""
    keep = [a for a in range(3) if a != axis]
    scale = np.array([spacing[a] for a in keep], dtype=np.float64)
    best = 0.0
    for plane in np.unique(coords[:, axis]):
        pts = coords[coords[:, axis] == plane][:, keep].astype(np.float64) * scale
        best = max(best, _max_pairwise(pts))
    return best


def shape_features(mask: Mask3D, spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> ShapeFeatures:
    """Compute the 11 shape descriptors of a nonempty mask.

    volume is voxel count times voxel volume; surface_area counts exposed
    faces of the 6-neighborhood (exactly testable, known to overestimate
    smooth surfaces); diameters are max pairwise distances between
    surface-voxel centers, in 3D and per plane family; elongation and
    flatness come from the eigenvalues of the voxel-coordinate covariance.
    """
    arr = mask.values
    n = int(arr.sum())
    if n == 0:
        raise EmptyMask("shape features need a nonempty mask")
    sx, sy, sz = spacing
    voxel_volume = sx * sy * sz
    volume = n * voxel_volume
    area = _exposed_face_area(arr, spacing)

    coords = np.argwhere(arr == 1)
    corner = coords.min(axis=0)
    local = coords - corner  # translation-stable integer coordinates

    surf = _surface_voxels(arr) - corner
    scale = np.array(spacing, dtype=np.float64)
    d3 = _max_pairwise(surf.astype(np.float64) * scale)
    # column/row/slice: planes orthogonal to x, y, z respectively
    d2_col = _max_inplane(surf, spacing, axis=0)
    d2_row = _max_inplane(surf, spacing, axis=1)
    d2_slice = _max_inplane(surf, spacing, axis=2)

    centered = local.astype(np.float64) * scale
    centered -= centered.mean(axis=0)
    cov = centered.T @ centered / n
    eigvals = np.linalg.eigvalsh(cov)[::-1]
    eigvals = np.clip(eigvals, 0.0, None)
    if eigvals[0] <= 0.0:
        elongation = flatness = 1.0  # single voxel: degenerate, perfectly compact
    else:
        elongation = float(np.sqrt(eigvals[1] / eigvals[0]))
        flatness = float(np.sqrt(eigvals[2] / eigvals[0]))

    iso_area = (36.0 * np.pi * volume**2) ** (1.0 / 3.0)
    sphericity = iso_area / area
    return ShapeFeatures(
        volume=float(volume),
        max_diameter_3d=d3,
        max_diameter_2d_column=d2_col,
        max_diameter_2d_row=d2_row,
        max_diameter_2d_slice=d2_slice,
        surface_area=float(area),
        surface_volume_ratio=float(area / volume),
        flatness=flatness,
        sphericity=float(sphericity),
        elongation=elongation,
        spherical_disproportion=float(area / iso_area),
    )
