"""Binary model files.

Layout (little endian)::

    8 bytes   magic b"SGMLP1\\0\\0"
    u16       format version (1)
    u32       header length H
    H bytes   UTF-8 JSON header: {"config": ..., "meta": ..., "tensors": [[name, shape], ...]}
    payload   per tensor, in storage order: u64 element count, then count float32 values
    u64       checksum: BLAKE2b-64 digest of the payload bytes

Storage order is, for every hidden layer ``i``: ``dense{i}.weight``,
``dense{i}.bias``, ``bn{i}.gamma``, ``bn{i}.beta``, ``bn{i}.moving_mean``,
``bn{i}.moving_var``; then ``out.weight`` and ``out.bias``. The JSON
header is written with sorted keys and no timestamps, so saving the same
model twice gives identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import BadMagic, ChecksumMismatch, MissingFile, ShapeMismatch, TruncatedPayload, VersionUnsupported
from .model import MlpConfig, Model, parameter_shapes, state_shapes

MAGIC = b"SGMLP1\0\0"
VERSION = 1


def tensor_order(config: MlpConfig) -> list:
    """``(name, shape)`` for every stored tensor, in file order."""
    params, state = parameter_shapes(config), state_shapes(config)
    order = []
    for i in range(len(config.hidden_dims)):
        for name in (f"dense{i}.weight", f"dense{i}.bias", f"bn{i}.gamma", f"bn{i}.beta"):
            order.append((name, params[name]))
        for name in (f"bn{i}.moving_mean", f"bn{i}.moving_var"):
            order.append((name, state[name]))
    order += [("out.weight", params["out.weight"]), ("out.bias", params["out.bias"])]
    return order


def checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def to_bytes(model: Model) -> bytes:
    tensors = {**model.params, **model.state}
    order = tensor_order(model.config)
    header = json.dumps(
        {"config": model.config.to_dict(), "meta": model.meta,
         "tensors": [[name, list(shape)] for name, shape in order]},
        sort_keys=True, separators=(",", ":"),
    ).encode()
    chunks = []
    for name, shape in order:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        if arr.shape != tuple(shape):
            raise ShapeMismatch(f"{name}: expected {shape}, model holds {arr.shape}")
        chunks.append(struct.pack("<Q", arr.size))
        chunks.append(arr.tobytes())
    payload = b"".join(chunks)
    return b"".join([MAGIC, struct.pack("<HI", VERSION, len(header)), header, payload, checksum(payload)])


def from_bytes(data: bytes) -> Model:
    if data[:8] != MAGIC:
        raise BadMagic(f"not a model file (magic {data[:8]!r})")
    if len(data) < 14:
        raise TruncatedPayload("model file header truncated")
    version, header_len = struct.unpack_from("<HI", data, 8)
    if version != VERSION:
        raise VersionUnsupported(f"model format version {version}, this reader handles {VERSION}")
    start = 14 + header_len
    if len(data) < start + 8:
        raise TruncatedPayload("model file ends inside its header")
    header = json.loads(data[14:start])
    payload, stored = data[start:-8], data[-8:]
    if checksum(payload) != stored:
        raise ChecksumMismatch("payload checksum does not match; file is corrupted")
    config = MlpConfig(**header["config"])
    tensors, offset = {}, 0
    for name, shape in tensor_order(config):
        if offset + 8 > len(payload):
            raise ShapeMismatch(f"payload ends before tensor {name}")
        (count,) = struct.unpack_from("<Q", payload, offset)
        offset += 8
        if count != int(np.prod(shape)) or offset + 4 * count > len(payload):
            raise ShapeMismatch(f"{name}: header config needs {shape}, payload holds {count} values")
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).astype(np.float32)
        offset += 4 * count
    if offset != len(payload):
        raise ShapeMismatch(f"{len(payload) - offset} unexpected payload bytes after the last tensor")
    params = {name: tensors[name] for name in parameter_shapes(config)}
    state = {name: tensors[name] for name in state_shapes(config)}
    return Model(config, params, state, header.get("meta", {}))


def save(model: Model, path):
    """Write ``model`` atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = to_bytes(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path) -> Model:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such model file: {path}")
    return from_bytes(path.read_bytes())
