"""OVOL volume container and dataset manifest I/O.

OVOL layout: three unsigned 32-bit little-endian integers (nx, ny, nz),
then nx*ny*nz little-endian 32-bit floats with x varying fastest. Masks
reuse the format with values restricted to {0.0, 1.0}.

A manifest is line-delimited text, one region per line, tab-separated
fields: id, left-volume path, left-mask path, right-volume path,
right-mask path, label (1..K or "?"). Paths are relative to the manifest
file's directory.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import DataError, ShapeMismatch
from .volume import Mask3D, Region, Volume3D

__all__ = [
    "write_ovol",
    "read_ovol",
    "write_region",
    "read_region",
    "ManifestEntry",
    "write_manifest",
    "read_manifest",
    "load_regions",
    "save_regions",
]

_HEADER = struct.Struct("<III")


def write_ovol(path: str, values: np.ndarray) -> None:
    """Write a 3D array as an OVOL file (float32 on disk, x fastest)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeMismatch(f"OVOL payload must be 3D, got shape {arr.shape}")
    nx, ny, nz = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(nx, ny, nz))
        fh.write(np.asarray(arr, dtype="<f4").ravel(order="F").tobytes())


def read_ovol(path: str) -> np.ndarray:
    """Read an OVOL file into a float64 array of shape (nx, ny, nz)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise DataError(f"truncated OVOL header in {path}")
        nx, ny, nz = _HEADER.unpack(head)
        payload = fh.read()
    expected = 4 * nx * ny * nz
    if len(payload) != expected:
        raise DataError(
            f"OVOL payload length {len(payload)} != expected {expected} in {path}"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    return flat.reshape((nx, ny, nz), order="F").astype(np.float64)


def _as_mask(arr: np.ndarray, path: str) -> Mask3D:
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise DataError(f"mask file {path} contains values other than 0/1")
    return Mask3D(arr.astype(np.uint8))


class ManifestEntry:
    """One manifest line: region id, four block paths, and a label."""

    __slots__ = ("region_id", "paths", "label")

    def __init__(self, region_id: str, paths: tuple[str, str, str, str], label: int | None):
        self.region_id = region_id
        self.paths = paths
        self.label = label

    def to_line(self) -> str:
        label = "?" if self.label is None else str(self.label)
        return "\t".join((self.region_id, *self.paths, label))

    @classmethod
    def from_line(cls, line: str) -> "ManifestEntry":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 6:
            raise DataError(f"manifest line has {len(parts)} fields, expected 6: {line!r}")
        label = None if parts[5] == "?" else int(parts[5])
        return cls(parts[0], tuple(parts[1:5]), label)


def write_manifest(path: str, entries: list[ManifestEntry]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(entry.to_line() + "\n")


def read_manifest(path: str) -> list[ManifestEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(ManifestEntry.from_line(line))
    return entries


def read_region(entry: ManifestEntry, base_dir: str, spacing=(1.0, 1.0, 1.0)) -> Region:
    lv, lm, rv, rm = (read_ovol(os.path.join(base_dir, p)) for p in entry.paths)
    return Region(
        left=(Volume3D(lv, spacing), _as_mask(lm, entry.paths[1])),
        right=(Volume3D(rv, spacing), _as_mask(rm, entry.paths[3])),
        label=entry.label,
        region_id=entry.region_id,
    )


def write_region(region: Region, out_dir: str) -> ManifestEntry:
    """Write a region's four blocks as OVOL files named after its id."""
    rid = region.region_id or "region"
    names = (f"{rid}_lv.ovol", f"{rid}_lm.ovol", f"{rid}_rv.ovol", f"{rid}_rm.ovol")
    blocks = (
        region.left[0].values,
        region.left[1].values.astype(np.float64),
        region.right[0].values,
        region.right[1].values.astype(np.float64),
    )
    for name, block in zip(names, blocks):
        write_ovol(os.path.join(out_dir, name), block)
    return ManifestEntry(rid, names, region.label)


def save_regions(regions: list[Region], out_dir: str, manifest_name: str = "manifest.tsv") -> str:
    """Write all regions plus a manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    entries = [write_region(r, out_dir) for r in regions]
    manifest_path = os.path.join(out_dir, manifest_name)
    write_manifest(manifest_path, entries)
    return manifest_path


def load_regions(manifest_path: str) -> list[Region]:
    base_dir = os.path.dirname(os.path.abspath(manifest_path))
    return [read_region(e, base_dir) for e in read_manifest(manifest_path)]
