"""Layer-per-line network descriptions and shape inference."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from ..taxonomy import N_CLASSES, N_SCENES

KINDS = ("conv2d", "batchnorm2d", "relu", "maxpool2d", "gru", "bigru", "linear", "tanh", "sigmoid", "flatten")


class OutputContract(Enum):
    ACCDOA_2D = "accdoa"
    SCENE_LOGITS = "scene"


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int = 0
    kernel: tuple = (3, 3)
    stride: int = 1
    pool: tuple = (1, 1)
    hidden: int = 0
    out_dim: int = 0
    bias: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: tuple  # (channels, frames, bins)
    output: OutputContract = OutputContract.ACCDOA_2D
    shapes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "shapes", infer_shapes(self.layers, self.input_shape))
        final = self.shapes[-1]
        if len(final) != 2:
            raise ValueError("network must end in a per-frame vector (flatten before linear/gru)")
        if self.output is OutputContract.ACCDOA_2D:
            if final[1] != 2 * N_CLASSES:
                raise ValueError(f"ACCDOA output needs {2 * N_CLASSES} dims per frame, got {final[1]}")
            if not self.layers or self.layers[-1].kind != "tanh":
                raise ValueError("ACCDOA output must end with a tanh activation")
        elif final[1] != N_SCENES:
            raise ValueError(f"scene logits need {N_SCENES} dims, got {final[1]}")

    @property
    def output_shape(self):
        return self.shapes[-1]

    @property
    def time_downsample(self) -> int:
        return self.input_shape[1] // self.output_shape[0]


def _conv_out(n, k, s):
    return (n + (k - 1) // 2 + k // 2 - k) // s + 1


def infer_shapes(layers, input_shape) -> tuple:
    """Shape after each layer, starting with the input: (C, T, F) maps or (T, D) sequences."""
    shape = tuple(input_shape)
    if len(shape) != 3 or min(shape) <= 0:
        raise ValueError(f"input shape must be positive (channels, frames, bins), got {shape}")
    out = [shape]
    for i, layer in enumerate(layers):
        k = layer.kind
        is_map = len(shape) == 3
        if k in ("conv2d", "batchnorm2d", "maxpool2d", "flatten") and not is_map:
            raise ValueError(f"layer {i} ({k}) needs a (C, T, F) input, got {shape}")
        if k in ("gru", "bigru", "linear") and is_map:
            raise ValueError(f"layer {i} ({k}) needs a (T, D) input; add flatten first")
        if k == "conv2d":
            c, t, f = shape
            kh, kw = layer.kernel
            shape = (layer.filters, _conv_out(t, kh, layer.stride), _conv_out(f, kw, layer.stride))
        elif k == "maxpool2d":
            c, t, f = shape
            pt, pf = layer.pool
            shape = (c, t // pt, f // pf)
        elif k == "flatten":
            c, t, f = shape
            shape = (t, c * f)
        elif k == "gru":
            shape = (shape[0], layer.hidden)
        elif k == "bigru":
            shape = (shape[0], 2 * layer.hidden)
        elif k == "linear":
            shape = (shape[0], layer.out_dim)
        if min(shape) <= 0:
            raise ValueError(f"layer {i} ({k}) produces an empty shape {shape}")
        out.append(shape)
    return tuple(out)


def tensor_shapes(spec: NetworkSpec) -> dict:
    """Expected weight tensors, name -> shape, in file order."""
    names = {}
    for i, (layer, shape) in enumerate(zip(spec.layers, spec.shapes)):
        p = f"layers.{i}"
        if layer.kind == "conv2d":
            names[f"{p}.weight"] = (layer.filters, shape[0], *layer.kernel)
            if layer.bias:
                names[f"{p}.bias"] = (layer.filters,)
        elif layer.kind == "batchnorm2d":
            names[f"{p}.scale"] = (shape[0],)
            names[f"{p}.shift"] = (shape[0],)
        elif layer.kind == "linear":
            names[f"{p}.weight"] = (layer.out_dim, shape[1])
            if layer.bias:
                names[f"{p}.bias"] = (layer.out_dim,)
        elif layer.kind in ("gru", "bigru"):
            h = layer.hidden
            for d in (("fwd", "bwd") if layer.kind == "bigru" else ("",)):
                q = f"{p}.{d}." if d else f"{p}."
                names[q + "weight_ih"] = (3 * h, shape[1])
                names[q + "weight_hh"] = (3 * h, h)
                names[q + "bias_ih"] = (3 * h,)
                names[q + "bias_hh"] = (3 * h,)
    return names


def _dims(token: str, n: int = 2) -> tuple:
    parts = token.lower().split("x")
    if len(parts) != n:
        raise ValueError(f"expected {n} dims like {'x'.join(['3'] * n)}, got {token!r}")
    return tuple(int(p) for p in parts)


def parse_network(text: str) -> NetworkSpec:
    """Parse the text format. One layer (or block) per line::

        input 7x80x257
        output accdoa            # or: scene
        conv 64 3x3 pool 1x8     # conv2d + batchnorm2d + relu [+ maxpool2d]
        conv2d 16 3x3 nobias
        batchnorm | relu | tanh | sigmoid | flatten
        maxpool 2x4
        gru 64 | bigru 128
        linear 12 tanh           # optional activation, optional nobias
    """
    layers, input_shape, output = [], None, OutputContract.ACCDOA_2D
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split("#", 1)[0].split()
        if not tok:
            continue
        head, args = tok[0].lower(), [t.lower() for t in tok[1:]]
        try:
            if head == "input":
                input_shape = _dims(args[0], 3)
            elif head == "output":
                output = OutputContract(args[0])
            elif head in ("conv", "conv2d"):
                filters, kernel = int(args[0]), _dims(args[1])
                rest = args[2:]
                stride = int(rest[rest.index("stride") + 1]) if "stride" in rest else 1
                layers.append(LayerSpec("conv2d", filters=filters, kernel=kernel, stride=stride,
                                        bias="nobias" not in rest))
                if head == "conv":
                    layers += [LayerSpec("batchnorm2d"), LayerSpec("relu")]
                    if "pool" in rest:
                        layers.append(LayerSpec("maxpool2d", pool=_dims(rest[rest.index("pool") + 1])))
            elif head in ("batchnorm", "batchnorm2d"):
                layers.append(LayerSpec("batchnorm2d"))
            elif head in ("maxpool", "maxpool2d", "pool"):
                layers.append(LayerSpec("maxpool2d", pool=_dims(args[0])))
            elif head in ("gru", "bigru"):
                layers.append(LayerSpec(head, hidden=int(args[0])))
            elif head == "linear":
                layers.append(LayerSpec("linear", out_dim=int(args[0]), bias="nobias" not in args))
                for act in ("tanh", "sigmoid", "relu"):
                    if act in args[1:]:
                        layers.append(LayerSpec(act))
            elif head in ("relu", "tanh", "sigmoid", "flatten"):
                layers.append(LayerSpec(head))
            else:
                raise ValueError(f"unknown directive {head!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if input_shape is None:
        raise ValueError("network description lacks an 'input CxTxF' line")
    return NetworkSpec(layers, input_shape, output)


def format_network(spec: NetworkSpec) -> str:
    """Inverse of parse_network using only primitive directives."""
    c, t, f = spec.input_shape
    lines = [f"input {c}x{t}x{f}", f"output {spec.output.value}"]
    for layer in spec.layers:
        k = layer.kind
        nb = "" if layer.bias else " nobias"
        if k == "conv2d":
            st = f" stride {layer.stride}" if layer.stride != 1 else ""
            lines.append(f"conv2d {layer.filters} {layer.kernel[0]}x{layer.kernel[1]}{st}{nb}")
        elif k == "maxpool2d":
            lines.append(f"maxpool {layer.pool[0]}x{layer.pool[1]}")
        elif k in ("gru", "bigru"):
            lines.append(f"{k} {layer.hidden}")
        elif k == "linear":
            lines.append(f"linear {layer.out_dim}{nb}")
        else:
            lines.append("batchnorm" if k == "batchnorm2d" else k)
    return "\n".join(lines) + "\n"


def load_network(path) -> NetworkSpec:
    return parse_network(Path(path).read_text())


def builtin_config(name: str) -> Path:
    """Path of a shipped network description (``seldnet`` or ``asc``)."""
    path = Path(__file__).parent / "configs" / f"{name}.cfg"
    if not path.exists():
        raise FileNotFoundError(f"no built-in network config {name!r}")
    return path
