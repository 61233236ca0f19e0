"""Binary checkpoint format.

Layout (little-endian):

    magic  8 bytes  b"MASKFT\\x00\\x01"
    u32    format version
    u32    header length, then that many bytes of UTF-8 JSON (sorted keys)
    param blob      float32 tensors in fixed model order
    optimizer blob  per parameter: m then v as float32 (absent when no optimizer)

The header carries the model config, step, seed, tensor names and shapes,
and the optimizer scalars.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import numcore as nc
from ..model import ModelConfig, ModelParams, param_shapes

MAGIC = b"MASKFT\x00\x01"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: ModelParams
    step: int
    seed: int
    opt: nc.Adam | None = None
    meta: dict | None = None


def to_bytes(ck: Checkpoint) -> bytes:
    p = ck.params
    header = {
        "config": p.config.to_dict(),
        "step": int(ck.step),
        "seed": int(ck.seed),
        "tensors": [[n, list(t.shape)] for n, t in p.tensors.items()],
        "meta": ck.meta or {},
    }
    if ck.opt is not None:
        st = ck.opt.states
        header["optimizer"] = {
            "lr": ck.opt.lr, "beta1": ck.opt.beta1, "beta2": ck.opt.beta2, "eps": ck.opt.eps,
            "clip_norm": ck.opt.clip_norm, "step": st[0].step if st else 0,
        }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(hb)), hb]
    parts += [np.ascontiguousarray(t.data, dtype="<f4").tobytes() for t in p.values()]
    if ck.opt is not None:
        for s in ck.opt.states:
            parts.append(np.ascontiguousarray(s.m, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(s.v, dtype="<f4").tobytes())
    return b"".join(parts)


def from_bytes(buf: bytes, expect: ModelConfig | None = None) -> Checkpoint:
    if buf[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, hlen = struct.unpack_from("<II", buf, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 16
    header = json.loads(buf[off : off + hlen].decode("utf-8"))
    off += hlen
    cfg = ModelConfig(**header["config"])
    if expect is not None and expect != cfg:
        raise CheckpointError(f"checkpoint config {cfg} does not match expected {expect}")
    shapes = param_shapes(cfg)
    names = [n for n, _ in header["tensors"]]
    if names != list(shapes) or any(tuple(s) != shapes[n] for n, s in header["tensors"]):
        raise CheckpointError("tensor table does not match the model layout")

    def take(shape):
        nonlocal off
        n = int(np.prod(shape)) * 4
        if off + n > len(buf):
            raise CheckpointError("checkpoint truncated")
        arr = np.frombuffer(buf, dtype="<f4", count=n // 4, offset=off).reshape(shape).astype(np.float32)
        off += n
        return arr

    tensors = {n: nc.Tensor(take(shapes[n]), requires_grad=True, name=n) for n in names}
    params = ModelParams(cfg, tensors)
    opt = None
    if "optimizer" in header:
        o = header["optimizer"]
        opt = nc.Adam(params.values(), lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"],
                      clip_norm=o["clip_norm"])
        for st, n in zip(opt.states, names):
            st.m = take(shapes[n])
            st.v = take(shapes[n])
            st.step = o["step"]
    if off != len(buf):
        raise CheckpointError(f"{len(buf) - off} trailing bytes after checkpoint payload")
    return Checkpoint(params, header["step"], header["seed"], opt, header["meta"] or None)


def save(ck: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(to_bytes(ck))
    tmp.replace(path)


def load(path: str | Path, expect: ModelConfig | None = None) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return from_bytes(path.read_bytes(), expect)
