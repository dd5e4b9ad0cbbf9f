"""Numpy forward pass for the CRNN layer vocabulary.

Maps are (C, T, F) and sequences (T, D). All arithmetic is float32.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..features import FeatureTensor
from .spec import NetworkSpec, OutputContract
from .weights import WeightFile, validate_weights

F32 = np.float32


def conv2d(x, weight, bias=None, stride=1):
    """Cross-correlation with zero 'same' padding (exact for odd kernels)."""
    cout, cin, kh, kw = weight.shape
    padded = np.pad(x, ((0, 0), ((kh - 1) // 2, kh // 2), ((kw - 1) // 2, kw // 2)))
    win = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    c, t, f = win.shape[:3]
    cols = win.transpose(1, 2, 0, 3, 4).reshape(t * f, cin * kh * kw)
    out = cols @ weight.reshape(cout, -1).T
    if bias is not None:
        out += bias
    return np.ascontiguousarray(out.T.reshape(cout, t, f))


def maxpool2d(x, pt, pf):
    c, t, f = x.shape
    t2, f2 = t // pt, f // pf
    return x[:, : t2 * pt, : f2 * pf].reshape(c, t2, pt, f2, pf).max(axis=(2, 4))


def gru(x, w_ih, w_hh, b_ih, b_hh, reverse=False):
    """Gate order (reset, update, candidate); h' = (1 - z) * n + z * h."""
    h_size = w_hh.shape[1]
    xp = x @ w_ih.T + b_ih
    h = np.zeros(h_size, dtype=F32)
    out = np.empty((x.shape[0], h_size), dtype=F32)
    steps = range(x.shape[0] - 1, -1, -1) if reverse else range(x.shape[0])
    for t in steps:
        hp = w_hh @ h + b_hh
        r = expit(xp[t, :h_size] + hp[:h_size])
        z = expit(xp[t, h_size : 2 * h_size] + hp[h_size : 2 * h_size])
        n = np.tanh(xp[t, 2 * h_size :] + r * hp[2 * h_size :])
        h = ((1 - z) * n + z * h).astype(F32)
        out[t] = h
    return out


class Model:
    """Validated spec + weights. Immutable after construction; safe to share across threads."""

    def __init__(self, spec: NetworkSpec, weights):
        validate_weights(spec, weights)
        self.spec = spec
        self._w = {k: np.array(v, dtype=F32) for k, v in weights.items()}
        for arr in self._w.values():
            arr.flags.writeable = False

    @classmethod
    def load(cls, spec: NetworkSpec, path) -> "Model":
        return cls(spec, WeightFile.load(path))

    def weights(self) -> WeightFile:
        return WeightFile((k, v.copy()) for k, v in self._w.items())

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x) -> np.ndarray:
        if isinstance(x, FeatureTensor):
            x = x.data
        x = np.asarray(x, dtype=F32)
        if x.shape != self.spec.input_shape:
            raise ValueError(f"input shape {x.shape} does not match network input {self.spec.input_shape}")
        w = self._w
        for i, layer in enumerate(self.spec.layers):
            p = f"layers.{i}"
            k = layer.kind
            if k == "conv2d":
                x = conv2d(x, w[p + ".weight"], w.get(p + ".bias"), layer.stride)
            elif k == "batchnorm2d":
                x = x * w[p + ".scale"][:, None, None] + w[p + ".shift"][:, None, None]
            elif k == "relu":
                x = np.maximum(x, F32(0))
            elif k == "maxpool2d":
                x = maxpool2d(x, *layer.pool)
            elif k == "flatten":
                x = np.ascontiguousarray(x.transpose(1, 0, 2).reshape(x.shape[1], -1))
            elif k == "linear":
                x = x @ w[p + ".weight"].T
                if p + ".bias" in w:
                    x = x + w[p + ".bias"]
            elif k == "gru":
                x = gru(x, w[p + ".weight_ih"], w[p + ".weight_hh"], w[p + ".bias_ih"], w[p + ".bias_hh"])
            elif k == "bigru":
                fwd = gru(x, *(w[f"{p}.fwd.{n}"] for n in ("weight_ih", "weight_hh", "bias_ih", "bias_hh")))
                bwd = gru(x, *(w[f"{p}.bwd.{n}"] for n in ("weight_ih", "weight_hh", "bias_ih", "bias_hh")),
                          reverse=True)
                x = np.concatenate([fwd, bwd], axis=1)
            elif k == "tanh":
                x = np.tanh(x)
            elif k == "sigmoid":
                x = expit(x)
            x = x.astype(F32, copy=False)
        if self.spec.output is OutputContract.SCENE_LOGITS:
            # scene logits are averaged over the remaining frames
            x = x.mean(axis=0, dtype=np.float64).astype(F32)
        return x


def forward(spec: NetworkSpec, weights, x) -> np.ndarray:
    return Model(spec, weights).forward(x)
