"""WRG1 binary field container.

Layout, all little-endian:

    bytes 0..7    magic  b"WRG1\\x00\\x00\\x00\\x00"
    bytes 8..11   uint32 format version (currently 1)
    bytes 12..15  uint32 byte length of the JSON metadata block
    ...           UTF-8 JSON metadata
    ...           float64 arrays, C order, in the order declared by
                  metadata["fields"]; a "scalar" entry is one nx*ny*nz
                  array, a "vector" entry is three of them (x, y, z)

The metadata block records grid dims, box lengths, the ordered field
declarations, and free-form provenance (family name, creation parameters,
claims). Round-trips are bit-exact: arrays are written with tobytes() and
read with frombuffer().
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import FormatError
from .fieldcore import Grid3, ScalarField, VectorField

MAGIC = b"WRG1\x00\x00\x00\x00"
VERSION = 1


def _meta_bytes(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_fields(path, grid: Grid3, fields: dict, meta: dict | None = None) -> None:
    """Write named scalar/vector fields to a WRG1 file.

    ``fields`` maps name -> ScalarField | VectorField; insertion order is the
    storage order.
    """
    declared = []
    arrays: list[np.ndarray] = []
    for name, f in fields.items():
        if isinstance(f, ScalarField):
            declared.append({"name": name, "kind": "scalar"})
            arrays.append(f.data)
        elif isinstance(f, VectorField):
            declared.append({"name": name, "kind": "vector"})
            arrays.extend(f.data)
        else:
            raise TypeError(f"unsupported field type for {name!r}: {type(f)}")
    header_meta = {
        "grid": {"n": list(grid.n), "box": list(grid.box)},
        "fields": declared,
        "meta": meta or {},
    }
    blob = _meta_bytes(header_meta)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_fields(path) -> tuple[Grid3, dict, dict]:
    """Read a WRG1 file; returns (grid, fields, meta)."""
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16 or head[:8] != MAGIC:
            raise FormatError(f"{path}: not a WRG1 file (bad magic)")
        version, meta_len = struct.unpack("<II", head[8:16])
        if version != VERSION:
            raise FormatError(f"{path}: unsupported WRG1 version {version}")
        blob = fh.read(meta_len)
        if len(blob) != meta_len:
            raise FormatError(f"{path}: truncated metadata block")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: invalid metadata JSON: {exc}") from exc
        try:
            grid = Grid3(tuple(header["grid"]["n"]), tuple(header["grid"]["box"]))
            declared = header["fields"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: metadata missing required keys: {exc}") from exc
        npts = grid.n[0] * grid.n[1] * grid.n[2]
        fields: dict = {}
        for entry in declared:
            name, kind = entry["name"], entry["kind"]
            count = 3 if kind == "vector" else 1
            raw = fh.read(8 * npts * count)
            if len(raw) != 8 * npts * count:
                raise FormatError(f"{path}: truncated data for field {name!r}")
            arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
            if kind == "vector":
                fields[name] = VectorField(grid, arr.reshape((3,) + grid.shape))
            else:
                fields[name] = ScalarField(grid, arr.reshape(grid.shape))
        trailing = fh.read(1)
        if trailing:
            raise FormatError(f"{path}: trailing bytes after declared fields")
    return grid, fields, header.get("meta", {})
