"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..7    magic b"BICMNET1"
    bytes 8..11   uint32 header length H
    bytes 12..    H bytes of UTF-8 JSON header
    then          raw parameter blocks, concatenated in header order

The header carries: format version, architecture tag, the model config,
training metadata (step, seed, input_scale), a block table of
(name, dtype, shape, offset, nbytes) relative to the data section, and the
sha256 of the data section.  No timestamps: a save/load/save round trip is
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict

import numpy as np

from .models import (
    RnnConfig,
    TransformerConfig,
    build_rnn_estimator,
    build_transformer_estimator,
)

__all__ = ["save_checkpoint", "load_checkpoint", "CheckpointError"]

MAGIC = b"BICMNET1"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, net, *, input_scale: float = 1.0, step: int = 0,
                    seed: int | None = None, extra: dict | None = None) -> None:
    params = net.params()
    blocks = []
    offset = 0
    chunks = []
    sha = hashlib.sha256()
    for p in params:
        raw = np.ascontiguousarray(p.value).tobytes()
        blocks.append({
            "name": p.name,
            "dtype": str(p.value.dtype),
            "shape": list(p.value.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        sha.update(raw)
        offset += len(raw)
    header = {
        "format": 1,
        "arch": net.arch,
        "config": asdict(net.cfg),
        "input_scale": float(input_scale),
        "step": int(step),
        "seed": seed,
        "extra": extra or {},
        "params": blocks,
        "sha256": sha.hexdigest(),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(hbytes).to_bytes(4, "little"))
        fh.write(hbytes)
        for raw in chunks:
            fh.write(raw)
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[object, dict]:
    """Rebuild the network from a checkpoint; returns (net, header)."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        hlen = int.from_bytes(fh.read(4), "little")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        data = fh.read()
    if header.get("format") != 1:
        raise CheckpointError(f"unsupported checkpoint format {header.get('format')}")
    sha = hashlib.sha256(data).hexdigest()
    if sha != header["sha256"]:
        raise CheckpointError("checkpoint data corrupted (checksum mismatch)")

    rng = np.random.default_rng(0)  # weights are overwritten below
    if header["arch"] == "rnn":
        net = build_rnn_estimator(RnnConfig(**header["config"]), rng)
    elif header["arch"] == "transformer":
        net = build_transformer_estimator(
            TransformerConfig(**header["config"]), rng)
    else:
        raise CheckpointError(f"unknown architecture {header['arch']!r}")

    by_name = {p.name: p for p in net.params()}
    if set(by_name) != {b["name"] for b in header["params"]}:
        raise CheckpointError("parameter names do not match architecture")
    for blk in header["params"]:
        p = by_name[blk["name"]]
        raw = data[blk["offset"]:blk["offset"] + blk["nbytes"]]
        arr = np.frombuffer(raw, dtype=blk["dtype"]).reshape(blk["shape"])
        if arr.shape != p.value.shape:
            raise CheckpointError(f"shape mismatch for {blk['name']}")
        p.value = arr.astype(p.value.dtype).copy()
    return net, header
