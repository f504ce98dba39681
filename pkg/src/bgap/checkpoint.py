"""Binary checkpoint files: policy/value tensors plus the resolved run config.

Layout (little-endian):
    magic "BGAP" | u32 version | u32 len + config YAML (utf-8)
    u64 global_step | u32 len + RNG-state JSON
    u32 tensor count, then per tensor:
        u16 len + name | u8 ndim | u32 dims... | float32 data

Save -> load -> save is byte-identical; any magic/version/length mismatch is a
hard error rather than a silent truncation.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"BGAP"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: str, config_text: str, global_step: int,
                    tensors: dict, rng_state: dict | None = None) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    cfg = config_text.encode("utf-8")
    parts.append(struct.pack("<I", len(cfg)))
    parts.append(cfg)
    parts.append(struct.pack("<Q", global_step))
    rng = json.dumps(rng_state or {}, sort_keys=True, default=int).encode("utf-8")
    parts.append(struct.pack("<I", len(rng)))
    parts.append(rng)
    parts.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", arr.ndim))
        for d in arr.shape:
            parts.append(struct.pack("<I", d))
        parts.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise CheckpointError("truncated checkpoint file")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        (v,) = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return v


def load_checkpoint(path: str):
    """Returns (config_text, global_step, tensors dict, rng_state dict)."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(4) != MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    version = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config_text = r.take(r.unpack("<I")).decode("utf-8")
    global_step = r.unpack("<Q")
    rng_state = json.loads(r.take(r.unpack("<I")).decode("utf-8"))
    tensors = {}
    for _ in range(r.unpack("<I")):
        name = r.take(r.unpack("<H")).decode("utf-8")
        ndim = r.unpack("<B")
        shape = tuple(r.unpack("<I") for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        buf = r.take(4 * count)
        tensors[name] = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
    if r.off != len(r.data):
        raise CheckpointError("trailing bytes after tensor table")
    return config_text, global_step, tensors, rng_state


# -- helpers binding checkpoints to the PPO networks -------------------------

def tensors_from_nets(policy, value_fn) -> dict:
    out = {}
    for i, (w, b) in enumerate(zip(policy.net.weights, policy.net.biases)):
        out[f"policy.w{i}"] = w
        out[f"policy.b{i}"] = b
    out["policy.log_std"] = policy.log_std
    for i, (w, b) in enumerate(zip(value_fn.net.weights, value_fn.net.biases)):
        out[f"value.w{i}"] = w
        out[f"value.b{i}"] = b
    if getattr(policy, "input_scale", None) is not None:
        out["policy.input_scale"] = policy.input_scale
    return out


def load_into_nets(tensors: dict, policy, value_fn) -> None:
    """Copy tensors into the networks; any shape mismatch raises."""
    if "policy.input_scale" in tensors:
        scale = tensors["policy.input_scale"]
        policy.input_scale = scale.astype(policy.net.dtype)
        value_fn.input_scale = scale.astype(value_fn.net.dtype)
    expected = tensors_from_nets(policy, value_fn)
    missing = set(expected) - set(tensors)
    if missing:
        raise CheckpointError(f"missing tensors: {sorted(missing)}")
    for name, target in expected.items():
        src = tensors[name]
        if src.shape != target.shape:
            raise CheckpointError(
                f"shape mismatch for {name}: {src.shape} vs {target.shape}")
        target[...] = src.astype(target.dtype)
