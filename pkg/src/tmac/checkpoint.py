"""Versioned binary checkpoints.

Layout: magic "TMAC", format version u32, a block of length-prefixed UTF-8
key=value lines (run metadata plus both configs plus the batching RNG
state), then length-prefixed named matrices as little-endian 64-bit floats
(model parameters first, then optimizer moments under adam.m./adam.v.).
Floats in the text block are written with repr() so they parse back to the
identical bit pattern.
"""
from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from tmac.autodiff import Tensor
from tmac.model import ModelConfig, ModelParams
from tmac.training import AdamState, TrainConfig

MAGIC = b"TMAC"
VERSION = 1


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint file."""


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated at byte {self.off}")
        out = self.blob[self.off: self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def _config_lines(train_config: TrainConfig, model_config: ModelConfig,
                  iteration: int, best_map: float, rng_state: dict,
                  adam_t: int) -> list:
    lines = [f"iteration={iteration}", f"best_map={best_map!r}",
             f"adam_t={adam_t}", "rng=" + json.dumps(rng_state, sort_keys=True)]
    for prefix, cfg in (("train", train_config), ("model", model_config)):
        for f in dataclasses.fields(cfg):
            value = getattr(cfg, f.name)
            lines.append(f"{prefix}.{f.name}={value!r}")
    return lines


def save_checkpoint(path, params: ModelParams, opt: AdamState,
                    train_config: TrainConfig, iteration: int = 0,
                    best_map: float = float("-inf"),
                    rng_state: dict | None = None) -> None:
    lines = _config_lines(train_config, params.config, int(iteration),
                          float(best_map), rng_state or {}, opt.t)
    records = [(name, params.tensors[name].data) for name in params.names()]
    records += [(f"adam.m.{name}", opt.m[name]) for name in params.names()]
    records += [(f"adam.v.{name}", opt.v[name]) for name in params.names()]

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(lines)))
        for line in lines:
            fh.write(_pack_str(line))
        fh.write(struct.pack("<I", len(records)))
        for name, data in records:
            fh.write(_pack_str(name))
            fh.write(struct.pack("<II", data.shape[0], data.shape[1]))
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


@dataclass
class LoadedCheckpoint:
    params: ModelParams
    opt: AdamState
    train_config: TrainConfig
    model_config: ModelConfig
    iteration: int
    best_map: float
    rng_state: dict


def _parse_fields(cls, raw: dict, prefix: str, path: str):
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = f"{prefix}.{f.name}"
        if key not in raw:
            raise CheckpointError(f"{path}: missing config key {key}")
        text = raw[key]
        if f.type in ("int", int):
            kwargs[f.name] = int(text)
        elif f.type in ("float", float):
            kwargs[f.name] = float(text)
        else:
            kwargs[f.name] = text.strip("'\"")
    return cls(**kwargs)


def load_checkpoint(path) -> LoadedCheckpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob, str(path))
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    raw = {}
    for _ in range(r.u32()):
        line = r.string()
        key, _, value = line.partition("=")
        raw[key] = value

    train_config = _parse_fields(TrainConfig, raw, "train", str(path))
    model_config = _parse_fields(ModelConfig, raw, "model", str(path))

    matrices = {}
    for _ in range(r.u32()):
        name = r.string()
        rows, cols = struct.unpack("<II", r.take(8))
        data = np.frombuffer(r.take(rows * cols * 8), dtype="<f8")
        matrices[name] = data.reshape(rows, cols).copy()
    if r.off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - r.off} trailing bytes")

    param_names = [n for n in matrices if not n.startswith("adam.")]
    try:
        params = ModelParams(model_config, {
            name: Tensor(matrices[name], requires_grad=True) for name in param_names
        })
    except (ValueError, ArithmeticError) as err:
        raise CheckpointError(f"{path}: {err}") from err
    opt = AdamState(params)
    opt.t = int(raw["adam_t"])
    for name in params.names():
        for moment in (f"adam.m.{name}", f"adam.v.{name}"):
            if moment not in matrices:
                raise CheckpointError(f"{path}: missing matrix {moment}")
        opt.m[name] = matrices[f"adam.m.{name}"]
        opt.v[name] = matrices[f"adam.v.{name}"]

    return LoadedCheckpoint(
        params=params,
        opt=opt,
        train_config=train_config,
        model_config=model_config,
        iteration=int(raw["iteration"]),
        best_map=float(raw["best_map"]),
        rng_state=json.loads(raw["rng"]) if raw.get("rng") else {},
    )
