"""Single-file checkpoints: magic, version, JSON manifest, then tensor blobs.

Layout::

    b"DCLPCKPT" | uint32 format version | uint64 manifest length | manifest (utf-8 JSON)
    | DTEN blob per parameter, in manifest order

The manifest records the model config, every parameter's name, shape and
byte offset (relative to the end of the manifest), and free-form metadata.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from ..autodiff import tensor_from_bytes, tensor_to_bytes
from .deftan import DeclipModel, ModelConfig

MAGIC = b"DCLPCKPT"
FORMAT_VERSION = 1


def save_checkpoint(model: DeclipModel, path, metadata: dict | None = None) -> Path:
    path = Path(path)
    blobs, entries, offset = [], [], 0
    for name, p in model.named_parameters():
        blob = tensor_to_bytes(p.data)
        entries.append({"name": name, "shape": list(p.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "params": entries,
        "metadata": metadata or {},
    }
    raw = json.dumps(manifest, sort_keys=True).encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(raw)) + raw)
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)
    return path


def read_manifest(buf: bytes) -> tuple[dict, int]:
    if buf[:8] != MAGIC:
        raise ValueError("not a declipper checkpoint (bad magic)")
    version, length = struct.unpack_from("<IQ", buf, 8)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version} (this build reads {FORMAT_VERSION})")
    start = 8 + 12
    manifest = json.loads(buf[start:start + length].decode("utf-8"))
    return manifest, start + length


def load_checkpoint(path) -> tuple[DeclipModel, dict]:
    """Rebuild the model from its stored config and copy every parameter in."""
    buf = Path(path).read_bytes()
    manifest, base = read_manifest(buf)
    model = DeclipModel(ModelConfig.from_dict(manifest["config"]))
    params = dict(model.named_parameters())
    stored = {e["name"] for e in manifest["params"]}
    if stored != set(params):
        missing = sorted(set(params) - stored)
        extra = sorted(stored - set(params))
        raise ValueError(f"checkpoint parameters do not match the model (missing {missing}, unexpected {extra})")
    for entry in manifest["params"]:
        arr, _ = tensor_from_bytes(buf, base + entry["offset"])
        p = params[entry["name"]]
        if arr.shape != p.shape or list(arr.shape) != entry["shape"]:
            raise ValueError(f"shape mismatch for {entry['name']}: stored {arr.shape}, model {p.shape}")
        p.data = np.array(arr)
    return model, manifest.get("metadata", {})
