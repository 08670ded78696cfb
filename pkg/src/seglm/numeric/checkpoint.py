"""Versioned checkpoint container for parameters, optimizer, and PRNG state.

Layout: magic ``SEGLM1\\0\\0``, u32 format version, then named records until
EOF. Each record is u32 name length, UTF-8 name, u32 rank, one u64 per
dimension, then float64 little-endian payload. Non-array state (step
counter, learning rate, generator state, hashes) travels as one JSON
document stored byte-per-float under the reserved name ``meta/json``.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"SEGLM1\x00\x00"
VERSION = 1
META_RECORD = "meta/json"


class CheckpointError(RuntimeError):
    pass


def _write_record(f, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    f.write(struct.pack("<I", len(raw)))
    f.write(raw)
    f.write(struct.pack("<I", arr.ndim))
    for dim in arr.shape:
        f.write(struct.pack("<Q", dim))
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError("truncated checkpoint record")
    return buf


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write arrays (sorted by name) plus a JSON metadata record."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name in sorted(arrays):
            _write_record(f, name, np.asarray(arrays[name], dtype=np.float64))
        meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
        _write_record(f, META_RECORD, np.frombuffer(meta_bytes, dtype=np.uint8).astype(np.float64))


def load_checkpoint(path):
    """Read back (arrays, meta); fails on bad magic or version."""
    arrays: dict[str, np.ndarray] = {}
    meta: dict = {}
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(f, 4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        while True:
            head = f.read(4)
            if not head:
                break
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(f, name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4))
            shape = tuple(
                struct.unpack("<Q", _read_exact(f, 8))[0] for _ in range(rank)
            )
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(_read_exact(f, 8 * count), dtype="<f8").reshape(shape)
            if name == META_RECORD:
                meta = json.loads(data.astype(np.uint8).tobytes().decode("utf-8"))
            else:
                arrays[name] = data.copy()
    return arrays, meta


def rng_state_to_json(rng: np.random.Generator) -> dict:
    return {"bit_generator": type(rng.bit_generator).__name__, "state": rng.bit_generator.state}


def rng_from_json(state: dict) -> np.random.Generator:
    name = state["bit_generator"]
    if name != "PCG64":
        raise CheckpointError(f"unsupported bit generator {name!r}")
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = state["state"]
    return rng
