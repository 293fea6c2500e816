"""Deterministic generator of synthetic ordinal-severity region datasets.

Each subject is an ellipsoidal blob whose size shrinks and whose texture
noise grows with the severity rank, so that shape features, texture
features, and learned representations all carry class signal. Generation
is a pure function of the config (seed included).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ClassTooSmall, ConfigInvalid
from .volume import BoundingBox, Mask3D, Region, Volume3D

__all__ = ["SynthConfig", "LabeledDataset", "generate_dataset", "split"]

# Fixed per-axis semi-axis multipliers: mild anisotropy so the blobs are
# ellipsoids rather than balls and the orientation features are non-trivial.
_ANISOTROPY = (1.0, 0.82, 1.25)


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic severity phantom.

    ``atrophy_step`` shrinks the blob radius per rank step;
    ``texture_noise_step`` grows the multiplicative intensity-noise
    variance per rank step; ``subject_jitter`` is the std of per-subject
    radius noise (truncated at +-3 sigma so masks never vanish).
    """

    classes: int = 4
    per_class: int = 10
    box: BoundingBox = field(default_factory=lambda: BoundingBox((12, 10, 16)))
    base_radius: float = 4.6
    atrophy_step: float = 0.45
    texture_noise_step: float = 0.06
    subject_jitter: float = 0.18
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.box, BoundingBox):
            object.__setattr__(self, "box", BoundingBox(tuple(self.box)))

    def validate(self) -> None:
        if self.classes < 2:
            raise ConfigInvalid(f"need at least 2 classes, got {self.classes}")
        if self.per_class < 1:
            raise ConfigInvalid(f"per_class must be >= 1, got {self.per_class}")
        if self.atrophy_step < 0 or self.texture_noise_step < 0 or self.subject_jitter < 0:
            raise ConfigInvalid("step and jitter parameters must be >= 0")
        floor = self.base_radius - (self.classes - 1) * self.atrophy_step - 3 * self.subject_jitter
        if floor <= 1:
            raise ConfigInvalid(
                f"smallest possible radius {floor:.3f} must stay above 1 voxel"
            )


@dataclass(frozen=True)
class LabeledDataset:
    """Regions with ranks in 1..K plus the provenance they came from."""

    regions: tuple[Region, ...]
    classes: int
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        for r in self.regions:
            if r.label is None or not (1 <= r.label <= self.classes):
                raise ConfigInvalid(
                    f"region {r.region_id!r} label {r.label} outside 1..{self.classes}"
                )

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.regions], dtype=np.int64)


def _truncated_normal(rng: np.random.Generator, sigma: float) -> float:
    if sigma == 0:
        return 0.0
    while True:
        x = rng.standard_normal()
        if abs(x) <= 3.0:
            return x * sigma


def _make_block(
    box: tuple[int, int, int],
    radius: float,
    noise_std: float,
    mirror: bool,
    rng: np.random.Generator,
) -> tuple[Volume3D, Mask3D]:
    nx, ny, nz = box
    center = tuple((d - 1) / 2.0 for d in box)
    x, y, z = np.meshgrid(
        np.arange(nx, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nz, dtype=np.float64),
        indexing="ij",
    )
    semi = tuple(radius * a for a in _ANISOTROPY)
    # Small random center wobble keeps blobs off the exact grid center.
    wobble = rng.uniform(-0.5, 0.5, size=3)
    dist2 = (
        ((x - center[0] - wobble[0]) / semi[0]) ** 2
        + ((y - center[1] - wobble[1]) / semi[1]) ** 2
        + ((z - center[2] - wobble[2]) / semi[2]) ** 2
    )
    if mirror:
        dist2 = dist2[::-1, :, :]
    mask = (dist2 <= 1.0).astype(np.uint8)

    # Smooth base signal: low-frequency random field on top of a fixed mean,
    # so class-1 subjects are not constant images.
    base = gaussian_filter(rng.standard_normal(box), sigma=3.0, mode="reflect")
    base = 100.0 + 10.0 * base
    tex = 1.0 + noise_std * rng.standard_normal(box) if noise_std > 0 else 1.0
    intensities = np.where(mask == 1, base * tex, 0.0)
    return Volume3D(np.ascontiguousarray(intensities)), Mask3D(np.ascontiguousarray(mask))


def generate_dataset(config: SynthConfig) -> LabeledDataset:
    """Generate ``classes * per_class`` labeled regions, rank-ordered signal.

    Per subject the mask is an ellipsoid of radius
    ``base_radius - (rank-1)*atrophy_step + jitter`` and the intensities
    carry multiplicative noise with variance ``(rank-1)*texture_noise_step``.
    The right hemisphere mirrors the left geometry but draws independent
    jitter and noise.
    """
    config.validate()
    root = np.random.SeedSequence(config.seed)
    regions = []
    index = 0
    for rank in range(1, config.classes + 1):
        noise_var = (rank - 1) * config.texture_noise_step
        noise_std = float(np.sqrt(noise_var))
        for _ in range(config.per_class):
            subject_seq = np.random.SeedSequence(entropy=root.entropy, spawn_key=(index,))
            left_rng, right_rng = (
                np.random.Generator(np.random.PCG64(s)) for s in subject_seq.spawn(2)
            )
            sides = {}
            for name, rng, mirror in (("left", left_rng, False), ("right", right_rng, True)):
                jitter = _truncated_normal(rng, config.subject_jitter)
                radius = config.base_radius - (rank - 1) * config.atrophy_step + jitter
                sides[name] = _make_block(config.box.dims, radius, noise_std, mirror, rng)
            regions.append(
                Region(
                    left=sides["left"],
                    right=sides["right"],
                    label=rank,
                    region_id=f"s{index:05d}",
                )
            )
            index += 1
    provenance = (
        f"synthgen seed={config.seed} classes={config.classes} per_class={config.per_class} "
        f"box={config.box.dims} base_radius={config.base_radius} atrophy_step={config.atrophy_step} "
        f"texture_noise_step={config.texture_noise_step} subject_jitter={config.subject_jitter}"
    )
    return LabeledDataset(regions=tuple(regions), classes=config.classes, provenance=provenance)


def split(
    dataset: LabeledDataset, train_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified, disjoint, deterministic split into (train, test)."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigInvalid(f"train_fraction must be in (0, 1), got {train_fraction}")
    labels = dataset.labels
    rng = np.random.Generator(np.random.PCG64(seed))
    train_idx, test_idx = [], []
    for rank in range(1, dataset.classes + 1):
        members = np.flatnonzero(labels == rank)
        if members.size < 2:
            raise ClassTooSmall(f"class {rank} has {members.size} member(s), need >= 2")
        order = rng.permutation(members)
        n_train = int(np.floor(train_fraction * members.size))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.extend(order[:n_train])
        test_idx.extend(order[n_train:])
    train_idx.sort()
    test_idx.sort()
    make = lambda idx, tag: LabeledDataset(
        regions=tuple(dataset.regions[i] for i in idx),
        classes=dataset.classes,
        provenance=f"{dataset.provenance} | split seed={seed} fraction={train_fraction} part={tag}",
    )
    return make(train_idx, "train"), make(test_idx, "test")
