"""NNWF binary weight container."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spec import NetworkSpec, tensor_shapes

NNWF_MAGIC = b"NNWF"
NNWF_VERSION = 1
DTYPE_F32 = 0


class WeightFile(dict):
    """Ordered mapping of tensor name -> float32 array."""

    def to_bytes(self) -> bytes:
        out = [NNWF_MAGIC, struct.pack("<II", NNWF_VERSION, len(self))]
        for name, arr in self.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw = name.encode("utf-8")
            if len(raw) > 0xFFFF or arr.ndim > 0xFF:
                raise ValueError(f"tensor {name!r} cannot be encoded")
            out.append(struct.pack("<H", len(raw)) + raw)
            out.append(struct.pack("<BB", DTYPE_F32, arr.ndim))
            out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            out.append(arr.tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "WeightFile":
        view = memoryview(blob)
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(view):
                raise ValueError("NNWF data truncated")
            chunk = view[pos : pos + n]
            pos += n
            return chunk

        if bytes(take(4)) != NNWF_MAGIC:
            raise ValueError("bad NNWF magic")
        version, count = struct.unpack("<II", take(8))
        if version != NNWF_VERSION:
            raise ValueError(f"unsupported NNWF version {version}")
        wf = cls()
        for _ in range(count):
            (nlen,) = struct.unpack("<H", take(2))
            name = bytes(take(nlen)).decode("utf-8")
            dtype, rank = struct.unpack("<BB", take(2))
            if dtype != DTYPE_F32:
                raise ValueError(f"tensor {name!r}: unsupported dtype code {dtype}")
            dims = struct.unpack(f"<{rank}I", take(4 * rank))
            size = int(np.prod(dims, dtype=np.int64)) if rank else 1
            data = np.frombuffer(take(4 * size), dtype="<f4").reshape(dims).astype(np.float32)
            if name in wf:
                raise ValueError(f"duplicate tensor {name!r}")
            wf[name] = data
        if pos != len(view):
            raise ValueError(f"{len(view) - pos} trailing bytes after NNWF tensors")
        return wf

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "WeightFile":
        return cls.from_bytes(Path(path).read_bytes())

    @property
    def n_elements(self) -> int:
        return int(sum(np.asarray(a).size for a in self.values()))


def validate_weights(spec: NetworkSpec, weights) -> None:
    expected = tensor_shapes(spec)
    missing = [n for n in expected if n not in weights]
    if missing:
        raise ValueError(f"missing weight tensors: {missing}")
    extra = [n for n in weights if n not in expected]
    if extra:
        raise ValueError(f"unexpected weight tensors: {extra}")
    for name, shape in expected.items():
        arr = np.asarray(weights[name])
        if tuple(arr.shape) != tuple(shape):
            raise ValueError(f"tensor {name!r} has shape {arr.shape}, expected {shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"tensor {name!r} contains NaN or inf")


def random_weights(spec: NetworkSpec, seed: int = 0, scale: float = 1.0) -> WeightFile:
    """Deterministic He/Glorot-style random initialisation."""
    rng = np.random.default_rng(seed)
    wf = WeightFile()
    for name, shape in tensor_shapes(spec).items():
        if name.endswith(".scale"):
            arr = 1.0 + 0.1 * rng.standard_normal(shape)
        elif name.endswith(("bias", "shift", "bias_ih", "bias_hh")):
            arr = 0.05 * rng.standard_normal(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            arr = rng.standard_normal(shape) * np.sqrt(1.0 / fan_in)
        wf[name] = (scale * arr if not name.endswith(".scale") else arr).astype(np.float32)
    return wf


def zero_weights(spec: NetworkSpec) -> WeightFile:
    return WeightFile((n, np.zeros(s, np.float32)) for n, s in tensor_shapes(spec).items())


def fold_batchnorm(gamma, beta, mean, var, eps: float = 1e-5):
    """Running-statistics batch norm as the (scale, shift) pair the engine stores."""
    gamma, beta, mean, var = (np.asarray(v, dtype=np.float64) for v in (gamma, beta, mean, var))
    scale = gamma / np.sqrt(var + eps)
    return scale.astype(np.float32), (beta - mean * scale).astype(np.float32)
