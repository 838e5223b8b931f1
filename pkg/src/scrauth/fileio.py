"""On-disk artifact formats.

Every numeric artifact is a raw little-endian float32 block (``.f32``) with a
JSON sidecar of the same stem (``.json``). Sidecars are written with sorted
keys and a fixed indent, so write -> read -> write reproduces the same bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import SAMPLE_RATE
from .errors import ParameterError
from .signals import SensingWaveform

F32 = np.dtype("<f4")
WAVEFORM_ROLES = ("tx", "rx", "pilot", "segment")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


def _write_block(path, array, meta):
    path = Path(path).with_suffix(".f32")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(array, dtype=F32).tofile(path)
    dump_json(meta, sidecar_path(path))
    return path


def write_waveform(path, waveform: SensingWaveform, role: str, **meta) -> Path:
    if role not in WAVEFORM_ROLES:
        raise ParameterError(f"unknown waveform role {role!r}")
    header = dict(meta, sample_rate=int(waveform.sample_rate), n_samples=len(waveform), role=role)
    return _write_block(path, waveform.samples, header)


def read_waveform(path):
    """Return ``(waveform, sidecar)`` for a ``.f32`` waveform file."""
    path = Path(path).with_suffix(".f32")
    meta = load_json(sidecar_path(path))
    samples = np.fromfile(path, dtype=F32).astype(np.float64)
    if samples.size != meta["n_samples"]:
        raise ParameterError(f"{path}: sidecar says {meta['n_samples']} samples, file has {samples.size}")
    return SensingWaveform(samples, meta.get("sample_rate", SAMPLE_RATE)), meta


def write_array(path, array, **meta) -> Path:
    """Persist an n-d array in C order; the shape goes in the sidecar."""
    array = np.asarray(array)
    header = dict(meta, shape=list(array.shape))
    return _write_block(path, array, header)


def read_array(path):
    path = Path(path).with_suffix(".f32")
    meta = load_json(sidecar_path(path))
    data = np.fromfile(path, dtype=F32)
    shape = tuple(meta["shape"])
    if data.size != int(np.prod(shape)):
        raise ParameterError(f"{path}: {data.size} values do not fill shape {shape}")
    return data.reshape(shape).astype(np.float64), meta


def list_blocks(directory):
    """Sorted ``.f32`` files in a directory (or the file itself)."""
    directory = Path(directory)
    if directory.is_file() or directory.with_suffix(".f32").is_file():
        return [directory.with_suffix(".f32")]
    return sorted(directory.glob("*.f32"))
