"""Single-level 3D Haar decomposition into 8 half-resolution sub-bands.

Per axis the pair transform is average/difference: a = (x0 + x1)/2,
d = (x0 - x1)/2 (deliberately not orthonormal — the inverse is the exact
pair sum/difference x0 = a + d, x1 = a - d). Odd extents are padded by
edge replication before pairing; the pad amounts are recorded so the
inverse can recover the original extents. Masks follow the volume to
half resolution by 2x2x2 majority vote with ties counted as inside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..volume import Mask3D, Volume3D

__all__ = ["BAND_NAMES", "WaveletBands", "haar3d", "inverse_haar3d", "downsample_mask"]

#: Sub-band letters ordered by axis: name[0] filters x, name[1] y, name[2] z.
BAND_NAMES = ("LLL", "LLH", "LHL", "LHH", "HLL", "HLH", "HHL", "HHH")


@dataclass(frozen=True)
class WaveletBands:
    """8 named sub-bands plus the bookkeeping needed to invert them."""

    bands: dict[str, np.ndarray]
    original_dims: tuple[int, int, int]
    pad: tuple[int, int, int]

    def volume(self, name: str, spacing=(1.0, 1.0, 1.0)) -> Volume3D:
        return Volume3D(self.bands[name], spacing=spacing)


def _pad_even(arr: np.ndarray) -> tuple[np.ndarray, tuple[int, int, int]]:
    pad = tuple(n % 2 for n in arr.shape)
    if any(pad):
        arr = np.pad(arr, [(0, p) for p in pad], mode="edge")
    return arr, pad


def _split_axis(arr: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    even = [slice(None)] * 3
    odd = [slice(None)] * 3
    even[axis] = slice(0, None, 2)
    odd[axis] = slice(1, None, 2)
    x0, x1 = arr[tuple(even)], arr[tuple(odd)]
    return (x0 + x1) / 2.0, (x0 - x1) / 2.0


def haar3d(volume: Volume3D) -> WaveletBands:
    """Decompose into the 8 Haar sub-bands at half resolution."""
    arr, pad = _pad_even(np.asarray(volume.values, dtype=np.float64))
    partial = {"": arr}
    for axis in range(3):
        step = {}
        for name, block in partial.items():
            lo, hi = _split_axis(block, axis)
            step[name + "L"] = lo
            step[name + "H"] = hi
        partial = step
    return WaveletBands(bands=partial, original_dims=volume.dims, pad=pad)


def _merge_axis(lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    shape = list(lo.shape)
    shape[axis] *= 2
    out = np.empty(shape, dtype=np.float64)
    even = [slice(None)] * 3
    odd = [slice(None)] * 3
    even[axis] = slice(0, None, 2)
    odd[axis] = slice(1, None, 2)
    out[tuple(even)] = lo + hi
    out[tuple(odd)] = lo - hi
    return out


def inverse_haar3d(decomposed: WaveletBands) -> Volume3D:
    """Exact inverse of :func:`haar3d`, unpadding to the original extents."""
    partial = dict(decomposed.bands)
    for axis in (2, 1, 0):
        step = {}
        for name in {k[:axis] for k in partial}:
            step[name] = _merge_axis(partial[name + "L"], partial[name + "H"], axis)
        partial = step
    arr = partial[""]
    nx, ny, nz = decomposed.original_dims
    return Volume3D(arr[:nx, :ny, :nz])


def downsample_mask(mask: Mask3D) -> Mask3D:
    """2x2x2 majority vote to half resolution; 4-4 ties count as inside."""
    arr, _ = _pad_even(mask.values.astype(np.int32))
    nx, ny, nz = arr.shape
    blocks = arr.reshape(nx // 2, 2, ny // 2, 2, nz // 2, 2)
    votes = blocks.sum(axis=(1, 3, 5))
    return Mask3D((votes >= 4).astype(np.uint8))
