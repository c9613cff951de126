"""Binary checkpoint format.

Layout::

    PMCR1\\n
    <header byte length, decimal>\\n
    <JSON header: config, epoch, step, optimizer step, tensor table>
    <payload: little-endian float32 tensors, contiguous, in table order>

The tensor table lists ``{"name", "shape", "offset"}`` (offset in bytes from
the payload start) for every parameter in ``named_parameters`` order, followed
by the AdamW moments ``adam.m/<name>`` and ``adam.v/<name>`` when present.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelConfig, PMCRNet
from .optim import AdamW, AdamWConfig

MAGIC = b"PMCR1"


class CheckpointError(ValueError):
    pass


@dataclass
class TrainingProgress:
    epoch: int = 0
    step: int = 0


def _encode(model: PMCRNet, optimizer: AdamW | None, epoch: int, step: int) -> bytes:
    tensors = [(name, p.data) for name, p in model.named_parameters()]
    if optimizer is not None:
        tensors += list(optimizer.state().items())
    table, offset = [], 0
    for name, arr in tensors:
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 4
    header = {
        "config": model.config.to_dict(),
        "epoch": int(epoch),
        "step": int(step),
        "optimizer": None
        if optimizer is None
        else {
            "step": optimizer.step_count,
            "betas": list(optimizer.config.betas),
            "eps": optimizer.config.eps,
            "weight_decay": optimizer.config.weight_decay,
        },
        "payload_bytes": offset,
        "tensors": table,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    payload = b"".join(np.ascontiguousarray(arr, dtype="<f4").tobytes() for _, arr in tensors)
    return MAGIC + b"\n" + str(len(head)).encode() + b"\n" + head + payload


def save_checkpoint(model: PMCRNet, optimizer: AdamW | None, epoch: int, path, step: int = 0) -> None:
    path = Path(path)
    blob = _encode(model, optimizer, epoch, step)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse header and tensors without building a model."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    if not blob.startswith(MAGIC + b"\n"):
        raise CheckpointError(f"{path}: not a PMCR checkpoint")
    rest = blob[len(MAGIC) + 1 :]
    newline = rest.find(b"\n")
    if newline < 0:
        raise OSError(f"{path}: truncated checkpoint header")
    try:
        head_len = int(rest[:newline])
    except ValueError:
        raise CheckpointError(f"{path}: corrupt header length") from None
    head_bytes = rest[newline + 1 : newline + 1 + head_len]
    if len(head_bytes) < head_len:
        raise OSError(f"{path}: truncated checkpoint header")
    header = json.loads(head_bytes)
    payload = rest[newline + 1 + head_len :]
    if len(payload) < header["payload_bytes"]:
        raise OSError(f"{path}: truncated checkpoint payload ({len(payload)} of {header['payload_bytes']} bytes)")
    tensors = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=entry["offset"])
        tensors[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float32)
    return header, tensors


def load_checkpoint(path, config: ModelConfig | None = None) -> tuple[PMCRNet, AdamW | None, TrainingProgress]:
    """Rebuild model (and optimizer if stored). ``config`` overrides the stored one."""
    header, tensors = read_checkpoint(path)
    stored = ModelConfig(**header["config"])
    model = PMCRNet(config or stored)
    params = dict(model.named_parameters())
    for entry in header["tensors"]:
        name = entry["name"]
        if name in params and tuple(entry["shape"]) != params[name].shape:
            raise CheckpointError(
                f"{path}: shape mismatch for tensor {name}: checkpoint {tuple(entry['shape'])}, "
                f"model {params[name].shape}"
            )
    missing = [name for name in params if name not in tensors]
    if missing:
        raise CheckpointError(f"{path}: checkpoint lacks tensor {missing[0]}")
    model.load_state_dict({name: tensors[name] for name in params})
    optimizer = None
    if header.get("optimizer"):
        opt = header["optimizer"]
        optimizer = AdamW(
            model.named_parameters(),
            AdamWConfig(tuple(opt["betas"]), opt["eps"], opt["weight_decay"]),
        )
        optimizer.load_state(tensors, opt["step"])
    return model, optimizer, TrainingProgress(header["epoch"], header["step"])
