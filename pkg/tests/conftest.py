import numpy as np
import pytest

from stagerank.synthgen import SynthConfig, generate_dataset
from stagerank.volume import Mask3D, Region, Volume3D


@pytest.fixture(scope="session")
def small_dataset():
    """12 labeled regions (3 per rank) in the default toy box."""
    return generate_dataset(SynthConfig(classes=4, per_class=3, seed=17))


@pytest.fixture(scope="session")
def region(small_dataset):
    return small_dataset.regions[0]


def make_region(values_left, mask_left, values_right=None, mask_right=None,
                label=None, region_id="r0", spacing=(1.0, 1.0, 1.0)):
    """Region from raw arrays; right side defaults to a copy of the left."""
    if values_right is None:
        values_right = values_left
    if mask_right is None:
        mask_right = mask_left
    return Region(
        left=(Volume3D(np.asarray(values_left, dtype=np.float64), spacing),
              Mask3D(np.asarray(mask_left))),
        right=(Volume3D(np.asarray(values_right, dtype=np.float64), spacing),
               Mask3D(np.asarray(mask_right))),
        label=label,
        region_id=region_id,
    )


def ball_mask(dims, center, radius):
    """Boolean ball: strictly the voxels whose center is within radius."""
    grids = np.ogrid[tuple(slice(0, d) for d in dims)]
    dist2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    return (dist2 <= radius**2).astype(np.uint8)
