"""Versioned binary checkpoint container.

Layout: 4-byte magic, u32 format version, u64 manifest length, manifest
JSON (canonical: sorted keys, compact separators), then raw array payloads
back to back in manifest order.  Policy parameters are little-endian
float32.  Serialization is fully deterministic, so save -> load -> save
produces byte-identical files; that round-trip is under test.

A checkpoint records the sha256 of the run configuration it was trained
under and refuses to load against a different one unless forced.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
import torch

MAGIC = b"CGCK"
FORMAT_VERSION = 1

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8"), "<i8": np.dtype("<i8"), "|u1": np.dtype("|u1")}


class CheckpointError(RuntimeError):
    """Unreadable, truncated, or wrong-format checkpoint file."""


class ConfigHashMismatch(CheckpointError):
    """Checkpoint belongs to a different run configuration."""


@dataclass
class Checkpoint:
    config_hash: str
    frames: int = 0
    updates: int = 0
    episodes: int = 0
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    teacher: dict = field(default_factory=dict)
    numpy_rng: dict | None = None
    extra: dict = field(default_factory=dict)


def _canonical_dtype(arr: np.ndarray) -> tuple[str, np.ndarray]:
    kind = arr.dtype.kind
    if kind == "f":
        code = "<f4" if arr.dtype.itemsize <= 4 else "<f8"
    elif kind in "iub":
        code = "|u1" if arr.dtype == np.uint8 else "<i8"
    else:
        raise CheckpointError(f"unsupported array dtype {arr.dtype}")
    return code, np.ascontiguousarray(arr.astype(_DTYPES[code]))


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    entries = []
    payloads = []
    offset = 0
    for name in sorted(ckpt.arrays):
        code, arr = _canonical_dtype(ckpt.arrays[name])
        raw = arr.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": code,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        payloads.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config_hash": ckpt.config_hash,
        "frames": ckpt.frames,
        "updates": ckpt.updates,
        "episodes": ckpt.episodes,
        "arrays": entries,
        "optimizer": ckpt.optimizer,
        "teacher": ckpt.teacher,
        "numpy_rng": ckpt.numpy_rng,
        "extra": ckpt.extra,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for raw in payloads:
            fh.write(raw)


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from None
    if len(data) < 16 or data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (manifest_len,) = struct.unpack_from("<Q", data, 8)
    manifest_end = 16 + manifest_len
    if manifest_end > len(data):
        raise CheckpointError("truncated checkpoint manifest")
    try:
        manifest = json.loads(data[16:manifest_end])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint manifest: {exc}") from None
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["arrays"]:
        start = manifest_end + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(data):
            raise CheckpointError(f"truncated payload for array {entry['name']!r}")
        arr = np.frombuffer(data[start:end], dtype=_DTYPES[entry["dtype"]])
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return Checkpoint(
        config_hash=manifest["config_hash"],
        frames=manifest["frames"],
        updates=manifest["updates"],
        episodes=manifest["episodes"],
        arrays=arrays,
        optimizer=manifest["optimizer"],
        teacher=manifest["teacher"],
        numpy_rng=manifest["numpy_rng"],
        extra=manifest["extra"],
    )


def verify_config_hash(ckpt: Checkpoint, expected: str, force: bool = False) -> None:
    if ckpt.config_hash != expected and not force:
        raise ConfigHashMismatch(
            f"checkpoint was trained under config {ckpt.config_hash[:12]}, "
            f"current config is {expected[:12]} (pass --force to load anyway)"
        )


# -- torch adapters ----------------------------------------------------------

def policy_arrays(net: torch.nn.Module) -> dict[str, np.ndarray]:
    return {
        f"policy/{key}": tensor.detach().cpu().numpy().astype(np.float32)
        for key, tensor in net.state_dict().items()
    }


def load_policy_arrays(net: torch.nn.Module, arrays: dict[str, np.ndarray]) -> None:
    state = {}
    for key in net.state_dict():
        name = f"policy/{key}"
        if name not in arrays:
            raise CheckpointError(f"checkpoint is missing policy tensor {key!r}")
        state[key] = torch.as_tensor(arrays[name])
    net.load_state_dict(state)


def optimizer_arrays(optimizer: torch.optim.Optimizer) -> tuple[dict[str, np.ndarray], dict]:
    """Split optimizer state into payload arrays and a JSON-able manifest."""
    sd = optimizer.state_dict()
    arrays: dict[str, np.ndarray] = {}
    steps: dict[str, float] = {}
    for idx, slots in sd["state"].items():
        for slot, value in slots.items():
            if slot == "step":
                steps[str(idx)] = float(value)
            else:
                arrays[f"adam/{idx}/{slot}"] = value.detach().cpu().numpy().astype(np.float32)
    meta = {"param_groups": sd["param_groups"], "steps": steps}
    return arrays, meta


def load_optimizer_arrays(
    optimizer: torch.optim.Optimizer, arrays: dict[str, np.ndarray], meta: dict
) -> None:
    if not meta:
        return
    state: dict[int, dict] = {}
    for name, arr in arrays.items():
        if not name.startswith("adam/"):
            continue
        _, idx, slot = name.split("/", 2)
        state.setdefault(int(idx), {})[slot] = torch.as_tensor(arr)
    for idx_str, step in meta.get("steps", {}).items():
        state.setdefault(int(idx_str), {})["step"] = torch.tensor(float(step))
    optimizer.load_state_dict({"state": state, "param_groups": meta["param_groups"]})


def torch_rng_array() -> np.ndarray:
    return torch.get_rng_state().numpy().astype(np.uint8)


def restore_torch_rng(arr: np.ndarray) -> None:
    torch.set_rng_state(torch.as_tensor(arr.astype(np.uint8)))
