"""Flat binary checkpoints.

Layout, in order:

* 8-byte magic ``SMSACKP1``
* little-endian uint64 header length
* UTF-8 JSON header: ``{"meta": {...}, "tensors": [{"name", "shape",
  "dtype"}, ...]}`` with dtypes ``<f4`` or ``<f8``
* each tensor's raw bytes (C order, little endian) concatenated in header
  order
"""

import json
import struct

import numpy as np

MAGIC = b"SMSACKP1"
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def save_checkpoint(path, tensors, meta=None):
    """``tensors`` maps names to Tensors or arrays; order is preserved."""
    entries = []
    payloads = []
    for name, value in tensors.items():
        arr = np.asarray(value.data if hasattr(value, "data") else value)
        dtype = "<f8" if arr.dtype == np.float64 else "<f4"
        arr = np.ascontiguousarray(arr, dtype=_DTYPES[dtype])
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dtype})
        payloads.append(arr.tobytes())
    header = json.dumps({"meta": meta or {}, "tensors": entries},
                        sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def read_header(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint: bad magic {magic!r}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        return json.loads(fh.read(hlen).decode())


def load_checkpoint(path):
    """Returns (name -> array, meta)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint: bad magic {magic!r}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        arrays = {}
        for entry in header["tensors"]:
            dtype = _DTYPES[entry["dtype"]]
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            blob = fh.read(count * dtype.itemsize)
            arrays[entry["name"]] = np.frombuffer(blob, dtype=dtype).reshape(
                entry["shape"]).copy()
    return arrays, header["meta"]


def load_into_model(model, path):
    """Assign checkpoint arrays into an already-built model, strictly by name."""
    arrays, meta = load_checkpoint(path)
    params = model.parameters()
    missing = set(params) - set(arrays)
    extra = set(arrays) - set(params)
    if missing or extra:
        raise ValueError(f"checkpoint mismatch: missing {sorted(missing)}, "
                         f"unexpected {sorted(extra)}")
    for name, p in params.items():
        if list(p.data.shape) != list(arrays[name].shape):
            raise ValueError(f"shape mismatch for {name}: "
                             f"{p.data.shape} vs {arrays[name].shape}")
        p.data = arrays[name].astype(p.data.dtype)
    return meta
