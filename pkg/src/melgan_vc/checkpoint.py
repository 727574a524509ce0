"""Binary checkpoint format.

Layout (little-endian)::

    b"MGVCCKPT"  version:u32
    config_len:u32  config JSON (UTF-8, sorted keys)
    min_db:f64  ref_db:f64
    step:u64
    rng_len:u32  RNG state JSON
    n_arrays:u32
    n_arrays x { name_len:u32 name rank:u32 dims:u32*rank data:f32* }
    sha256 of everything above (32 bytes)

Array names are ``<net>/<state_dict key>`` for network weights and buffers and
``opt_<net>/<param name>/<slot>`` for Adam moments and step counts.
"""
from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import torch

from .config import RunConfig
from .dsp import NormalizationStats
from .trainer import TrainState, new_train_state

MAGIC = b"MGVCCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _state_arrays(state: TrainState) -> Dict[str, np.ndarray]:
    arrays = {}
    for net_name, net in state.networks().items():
        for key, value in net.state_dict().items():
            arrays[f"{net_name}/{key}"] = value.detach().cpu().numpy()
        opt = state.optimizers()[net_name]
        for pname, param in net.named_parameters():
            for slot, value in opt.state.get(param, {}).items():
                arrays[f"opt_{net_name}/{pname}/{slot}"] = torch.as_tensor(value).detach().cpu().numpy()
    return arrays


def _encode(state: TrainState) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    cfg = json.dumps(state.config.to_dict(), sort_keys=True).encode()
    buf.write(struct.pack("<I", len(cfg)))
    buf.write(cfg)
    buf.write(struct.pack("<ddQ", state.stats.min_db, state.stats.ref_db, state.step))
    rng = json.dumps(state.rng.bit_generator.state, sort_keys=True).encode()
    buf.write(struct.pack("<I", len(rng)))
    buf.write(rng)
    arrays = _state_arrays(state)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        raw = name.encode()
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = buf.getvalue()
    return body + hashlib.sha256(body).digest()


def save_checkpoint(state: TrainState, path) -> None:
    path = Path(path)
    data = _encode(state)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path) -> Tuple[RunConfig, NormalizationStats, int, dict, Dict[str, np.ndarray]]:
    """Decode a checkpoint into ``(config, stats, step, rng_state, arrays)``."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 + 32:
        raise CheckpointError("truncated checkpoint")
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    (version,) = struct.unpack("<I", data[len(MAGIC):len(MAGIC) + 4])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint digest mismatch (corrupted or truncated file)")

    r = _Reader(body)
    r.take(len(MAGIC) + 4)
    (n,) = r.unpack("<I")
    config = RunConfig.from_dict(json.loads(r.take(n)))
    min_db, ref_db, step = r.unpack("<ddQ")
    (n,) = r.unpack("<I")
    rng_state = json.loads(r.take(n))
    (count,) = r.unpack("<I")
    arrays = {}
    for _ in range(count):
        (n,) = r.unpack("<I")
        name = r.take(n).decode()
        (rank,) = r.unpack("<I")
        dims = r.unpack(f"<{rank}I") if rank else ()
        size = int(np.prod(dims)) if rank else 1
        arrays[name] = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(dims).astype(np.float32)
    if r.pos != len(body):
        raise CheckpointError("trailing bytes in checkpoint")
    return config, NormalizationStats(min_db, ref_db), step, rng_state, arrays


def load_checkpoint(path) -> TrainState:
    config, stats, step, rng_state, arrays = read_checkpoint(path)
    state = new_train_state(config, stats)
    state.step = step
    state.rng.bit_generator.state = rng_state

    for net_name, net in state.networks().items():
        current = net.state_dict()
        loaded = {}
        for key, ref in current.items():
            name = f"{net_name}/{key}"
            if name not in arrays:
                raise CheckpointError(f"checkpoint lacks array {name}")
            loaded[key] = torch.from_numpy(arrays[name].copy()).to(ref.dtype).reshape(ref.shape)
        net.load_state_dict(loaded)

        opt = state.optimizers()[net_name]
        prefix = f"opt_{net_name}/"
        for pname, param in net.named_parameters():
            slots = {}
            for name, arr in arrays.items():
                if name.startswith(f"{prefix}{pname}/"):
                    slot = name[len(prefix) + len(pname) + 1:]
                    slots[slot] = torch.from_numpy(arr.copy())
            if slots:
                opt.state[param] = slots
    return state
