"""Hand-crafted shape and radiomic texture descriptors."""

from .shape import SHAPE_FEATURE_NAMES, ShapeFeatures, shape_features
from .texture import (
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
from .vectors import (
    RADIOMICS_VECTOR_LENGTH,
    SHAPE_VECTOR_LENGTH,
    FeatureVector,
    extract_vector,
    radiomics_vector,
    shape_vector,
)
from .wavelet import BAND_NAMES, WaveletBands, downsample_mask, haar3d, inverse_haar3d

__all__ = [
    "SHAPE_FEATURE_NAMES",
    "ShapeFeatures",
    "shape_features",
    "DIRECTIONS_13",
    "FIRST_ORDER_NAMES",
    "GLCM_NAMES",
    "GLRLM_NAMES",
    "GLSZM_NAMES",
    "GrayLevelImage",
    "quantize",
    "first_order_features",
    "glcm_features",
    "glrlm_features",
    "glszm_features",
    "FeatureVector",
    "extract_vector",
    "radiomics_vector",
    "shape_vector",
    "SHAPE_VECTOR_LENGTH",
    "RADIOMICS_VECTOR_LENGTH",
    "BAND_NAMES",
    "WaveletBands",
    "haar3d",
    "inverse_haar3d",
    "downsample_mask",
]
