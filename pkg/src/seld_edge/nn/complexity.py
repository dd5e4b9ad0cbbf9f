"""Parameter and multiply-accumulate counts."""
from __future__ import annotations

from .spec import NetworkSpec, infer_shapes, tensor_shapes

# reference figures for a 1 s input clip
REFERENCE_SELD = {"macs_m": 91.4, "params_k": 285}
REFERENCE_ASC = {"macs_m": 10.9, "params_k": 116}


def count_params(spec: NetworkSpec) -> int:
    """Trainable parameters; batch norm contributes its two affine terms per channel."""
    total = 0
    for shape in tensor_shapes(spec).values():
        n = 1
        for d in shape:
            n *= d
        total += n
    return total


def count_macs(spec: NetworkSpec, input_shape=None) -> int:
    """MACs for one forward pass. Only conv, linear and GRU layers count."""
    shapes = infer_shapes(spec.layers, input_shape or spec.input_shape)
    total = 0
    for layer, src, dst in zip(spec.layers, shapes[:-1], shapes[1:]):
        if layer.kind == "conv2d":
            kh, kw = layer.kernel
            total += dst[1] * dst[2] * kh * kw * src[0] * dst[0]
        elif layer.kind == "linear":
            total += src[1] * layer.out_dim * src[0]
        elif layer.kind in ("gru", "bigru"):
            h = layer.hidden
            per_step = 3 * h * (h + src[1])
            total += per_step * src[0] * (2 if layer.kind == "bigru" else 1)
    return total


def complexity_report(spec: NetworkSpec, reference=None) -> str:
    params, macs = count_params(spec), count_macs(spec)
    lines = [f"params: {params} ({params / 1e3:.1f} K)", f"MACs: {macs} ({macs / 1e6:.2f} M)"]
    if reference:
        lines.append(f"reference: {reference['params_k']} K params, {reference['macs_m']} M MACs")
    return "\n".join(lines)
