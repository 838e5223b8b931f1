"""Binary model checkpoints.

Layout (all integers little-endian)::

    b"SCRCNN\\x00\\x01"      8-byte magic, last byte is the format version
    uint32                  manifest length in bytes
    manifest                UTF-8 JSON (sorted keys): input shape, classes,
                            layer list, parameter shapes in table order
    float32[]               every parameter block in table order, C order,
                            kernel before bias
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .model import CNN, build_model

MAGIC = b"SCRCNN\x00"
VERSION = 1


def manifest(model: CNN) -> dict:
    layers = []
    for info, layer in zip(model.summary(), model.layers):
        entry = layer.manifest()
        entry["index"] = info.index
        entry["output_shape"] = list(info.output_shape)
        entry["params"] = [list(p.shape) for p in layer.params()]
        layers.append(entry)
    return {
        "input_shape": list(model.input_shape),
        "n_classes": model.n_classes,
        "config": model.config,
        "trained": model.trained,
        "class_labels": model.class_labels,
        "n_params": model.n_params,
        "layers": layers,
    }


def to_bytes(model: CNN) -> bytes:
    head = json.dumps(manifest(model), sort_keys=True).encode()
    blocks = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in model.parameters())
    return MAGIC + bytes([VERSION]) + struct.pack("<I", len(head)) + head + blocks


def from_bytes(data: bytes, dtype=np.float32) -> CNN:
    if data[:7] != MAGIC:
        raise ConfigurationError("not a CNN checkpoint")
    if data[7] != VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {data[7]}")
    (n,) = struct.unpack("<I", data[8:12])
    meta = json.loads(data[12:12 + n])
    cfg = meta["config"]
    model = build_model(meta["n_classes"], cfg["seed"], tuple(meta["input_shape"]),
                        tuple(tuple(b) for b in cfg["blocks"]), cfg["dense_units"],
                        tuple(cfg["dropout"]), dtype)
    offset = 12 + n
    if len(data) - offset != 4 * model.n_params:
        raise ConfigurationError("checkpoint has trailing bytes or is truncated")
    for p in model.parameters():
        size = p.size * 4
        p[...] = np.frombuffer(data[offset:offset + size], dtype="<f4").reshape(p.shape)
        offset += size
    model.trained = meta["trained"]
    model.class_labels = meta["class_labels"]
    return model


def save(model: CNN, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(model))
    return path


def load(path, dtype=np.float32) -> CNN:
    return from_bytes(Path(path).read_bytes(), dtype)
