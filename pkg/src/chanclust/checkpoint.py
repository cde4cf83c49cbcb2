"""Flat binary checkpoints: a JSON manifest followed by raw little-endian float64 tensors.

Layout::

    b"CHANCKPT" | uint64 LE manifest length | manifest (UTF-8 JSON) | tensor bytes

Writes go to a temporary sibling and are renamed into place, so a crash never
leaves a truncated checkpoint behind.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ForecastError
from .strategies import LinearBank, MappingVector, MlpModel

MAGIC = b"CHANCKPT"


class CheckpointError(ForecastError):
    pass


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def encode(tensors: dict[str, np.ndarray], meta: dict) -> bytes:
    entries = []
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    manifest = dict(meta)
    manifest["tensors"] = entries
    head = json.dumps(manifest, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(head)) + head + b"".join(blobs)


def decode(payload: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if payload[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (n,) = struct.unpack("<Q", payload[8:16])
    manifest = json.loads(payload[16:16 + n].decode("utf-8"))
    base = 16 + n
    tensors = {}
    for e in manifest["tensors"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        start = base + e["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(np.float64)
    return manifest, tensors


def model_meta(model) -> dict:
    kind = "linear" if isinstance(model, LinearBank) else "mlp"
    meta = {"kind": kind, "strategy_tag": model.strategy,
            "mapping": model.mapping.to_json(), "revin_eps": model.revin_eps}
    if kind == "mlp":
        meta["freeze_decoder"] = model.freeze_decoder
    return meta


def save_model(model, path, extra: dict | None = None) -> None:
    meta = model_meta(model)
    if extra:
        meta.update(extra)
    atomic_write_bytes(path, encode(model.state_dict(), meta))


def load_model(path):
    manifest, t = decode(Path(path).read_bytes())
    mapping = MappingVector.from_json(manifest["mapping"])
    if manifest["kind"] == "linear":
        return LinearBank(t["weight"], t["bias"], mapping, manifest["strategy_tag"], manifest["revin_eps"])
    if manifest["kind"] == "mlp":
        return MlpModel(t["enc_weight"], t["enc_bias"], t["dec_weight"], t["dec_bias"], mapping,
                        manifest["strategy_tag"], t.get("embeddings"), manifest["revin_eps"],
                        manifest.get("freeze_decoder", False))
    raise CheckpointError(f"unknown model kind {manifest['kind']!r}")
