"""Binary checkpoint format.

A checkpoint file is::

    [u64 little-endian manifest length][manifest JSON, UTF-8][raw value blob]

The manifest holds an optional structured ``config`` block plus one entry per
tensor: ``{name, shape, dtype, byte_offset}``.  Values are stored
little-endian and round-trip bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


class CheckpointError(Exception):
    pass


def _dtype_tag(dtype: np.dtype) -> str:
    tag = dtype.newbyteorder("<").str
    if tag not in _DTYPES:
        raise CheckpointError(f"unsupported checkpoint dtype {dtype}")
    return tag


def save_checkpoint(path, arrays: dict[str, np.ndarray], config: dict | None = None) -> None:
    """Write named arrays plus a JSON config block to ``path``."""
    entries = []
    blob = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        tag = _dtype_tag(arr.dtype)
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": tag,
            "byte_offset": len(blob),
        })
        blob += arr.astype(_DTYPES[tag], copy=False).tobytes()
    manifest = json.dumps({"config": config or {}, "tensors": entries},
                          sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        f.write(bytes(blob))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back ``(arrays, config)``; values are bit-exact."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise CheckpointError(f"{path}: truncated header")
    (mlen,) = struct.unpack("<Q", raw[:8])
    if len(raw) < 8 + mlen:
        raise CheckpointError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[8:8 + mlen].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"{path}: bad manifest: {e}") from e
    blob = raw[8 + mlen:]
    arrays = {}
    for entry in manifest["tensors"]:
        dtype = _DTYPES.get(entry["dtype"])
        if dtype is None:
            raise CheckpointError(f"{path}: unsupported dtype {entry['dtype']!r}")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["byte_offset"]
        end = start + count * dtype.itemsize
        if end > len(blob):
            raise CheckpointError(f"{path}: tensor {entry['name']!r} overruns blob")
        arrays[entry["name"]] = np.frombuffer(blob[start:end], dtype=dtype).reshape(shape).copy()
    return arrays, manifest.get("config", {})


def checkpoint_hash(arrays: dict[str, np.ndarray]) -> str:
    """SHA-256 over names, shapes, dtypes and raw bytes; order-independent."""
    h = hashlib.sha256()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        h.update(name.encode("utf-8"))
        h.update(str(arr.shape).encode())
        h.update(arr.dtype.str.encode())
        h.update(arr.tobytes())
    return h.hexdigest()
