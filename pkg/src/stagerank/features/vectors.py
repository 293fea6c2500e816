"""Named per-region feature vectors with a stable ordering.

Vector layout is a build constant: names follow the pattern
``side.band.family.feature`` (or ``side.shape.feature``), iterating
side (left, right) -> band (orig + 8 Haar sub-bands) -> family
(firstorder, glcm, glrlm, glszm) -> feature, so any two vectors built
by the same extractor align column-for-column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from ..volume import Region, Volume3D
from .shape import SHAPE_FEATURE_NAMES, shape_features
from .texture import (
    FIRST_ORDER_NAMES,
    GLCM_NAMES,
    GLRLM_NAMES,
    GLSZM_NAMES,
    first_order_features,
    glcm_features,
    glrlm_features,
    glszm_features,
    quantize,
)
from .wavelet import BAND_NAMES, downsample_mask, haar3d

__all__ = [
    "FeatureVector",
    "shape_vector",
    "radiomics_vector",
    "extract_vector",
    "SHAPE_VECTOR_LENGTH",
    "RADIOMICS_VECTOR_LENGTH",
]

_SIDES = ("left", "right")
_ALL_BANDS = ("orig",) + BAND_NAMES
_FAMILY_NAMES = (
    ("firstorder", FIRST_ORDER_NAMES),
    ("glcm", GLCM_NAMES),
    ("glrlm", GLRLM_NAMES),
    ("glszm", GLSZM_NAMES),
)

SHAPE_VECTOR_LENGTH = len(_SIDES) * len(SHAPE_FEATURE_NAMES)
RADIOMICS_VECTOR_LENGTH = len(_SIDES) * len(_ALL_BANDS) * sum(
    len(names) for _, names in _FAMILY_NAMES
)


@dataclass(frozen=True)
class FeatureVector:
    """Parallel (names, values) pair; values are read-only float64."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 1 or vals.size != len(self.names):
            raise ShapeMismatch(
                f"{len(self.names)} names but value shape {vals.shape}"
            )
        if len(set(self.names)) != len(self.names):
            raise ShapeMismatch("duplicate feature names")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", tuple(self.names))

    def __len__(self) -> int:
        return self.values.size

    def concat(self, other: "FeatureVector") -> "FeatureVector":
        return FeatureVector(
            names=self.names + other.names,
            values=np.concatenate([self.values, other.values]),
        )


def shape_vector(region: Region) -> FeatureVector:
    """11 shape descriptors per side, left block then right block."""
    names: list[str] = []
    values: list[float] = []
    for side in _SIDES:
        volume, mask = getattr(region, side)
        feats = shape_features(mask, spacing=volume.spacing)
        arr = feats.as_array()
        for feature_name, value in zip(SHAPE_FEATURE_NAMES, arr):
            names.append(f"{side}.shape.{feature_name}")
            values.append(float(value))
    return FeatureVector(names=tuple(names), values=np.array(values))


def _band_features(volume: Volume3D, mask, ng: int) -> dict[str, dict[str, float]]:
    gray = quantize(volume, mask, ng)
    return {
        "firstorder": first_order_features(gray, volume, mask),
        "glcm": glcm_features(gray),
        "glrlm": glrlm_features(gray),
        "glszm": glszm_features(gray),
    }


def radiomics_vector(region: Region, ng: int = 32) -> FeatureVector:
    """Texture/first-order features over the original image and its 8
    Haar sub-bands, per side."""
    names: list[str] = []
    values: list[float] = []
    for side in _SIDES:
        volume, mask = getattr(region, side)
        half_mask = None
        decomposed = None
        for band in _ALL_BANDS:
            if band == "orig":
                band_volume, band_mask = volume, mask
            else:
                if decomposed is None:
                    decomposed = haar3d(volume)
                    half_mask = downsample_mask(mask)
                band_volume, band_mask = decomposed.volume(band), half_mask
            computed = _band_features(band_volume, band_mask, ng)
            for family, feature_names in _FAMILY_NAMES:
                for feature_name in feature_names:
                    names.append(f"{side}.{band}.{family}.{feature_name}")
                    values.append(computed[family][feature_name])
    return FeatureVector(names=tuple(names), values=np.array(values))


def extract_vector(region: Region, kind: str = "all", ng: int = 32) -> FeatureVector:
    """Assemble a region's vector: "shape", "radiomics", or "all" (both,
    shape block first)."""
    if kind == "shape":
        return shape_vector(region)
    if kind == "radiomics":
        return radiomics_vector(region, ng=ng)
    if kind == "all":
        return shape_vector(region).concat(radiomics_vector(region, ng=ng))
    raise ShapeMismatch(f"unknown feature kind {kind!r}")
