"""Scripted models: deterministic networks whose outputs follow a small rule
script, built from the ordinary layer vocabulary so they run through the same
engine and weight format as trained models.

SELD rules (one per line or ``;``-separated)::

    silent
    constant <Class> <azimuth_deg> <r>
    energy <Class> <azimuth_deg> <r> [above <log10 power>] [band <lo>-<hi>]
    nipd <Class> <r> [channel <1|2|3>]

``energy`` fires when the mean channel-0 log power in the band exceeds the
level. ``nipd`` points the class at 90 deg when the mean phase-difference cue of
the channel is positive and at 270 deg otherwise.

ASC rules::

    scene <Name>
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..taxonomy import N_CLASSES, N_SCENES, parse_class, parse_scene
from .spec import LayerSpec, NetworkSpec, OutputContract
from .weights import WeightFile

SELD_INPUT = (7, 80, 257)
ASC_INPUT = (1, 30, 256)
GATE_GAIN = 50.0
NIPD_GAIN = 1000.0
NIPD_MAX_BIN = 22  # bins at or below 1 kHz for a 512-point FFT at 24 kHz


@dataclass
class _Rule:
    kind: str
    cls: int
    azimuth: float = 0.0
    r: float = 0.0
    above: float = -3.0
    band: tuple | None = None
    channel: int = 1


def _parse_seld(script: str) -> list:
    rules = []
    for raw in script.replace(";", "\n").splitlines():
        tok = raw.split("#", 1)[0].split()
        if not tok:
            continue
        head = tok[0].lower()
        if head == "silent":
            continue
        if head == "constant":
            rules.append(_Rule("constant", parse_class(tok[1]), float(tok[2]), float(tok[3])))
        elif head == "energy":
            rule = _Rule("energy", parse_class(tok[1]), float(tok[2]), float(tok[3]))
            rest = [t.lower() for t in tok[4:]]
            if "above" in rest:
                rule.above = float(rest[rest.index("above") + 1])
            if "band" in rest:
                lo, hi = rest[rest.index("band") + 1].split("-")
                rule.band = (float(lo), float(hi))
            rules.append(rule)
        elif head == "nipd":
            rule = _Rule("nipd", parse_class(tok[1]), 0.0, float(tok[2]))
            rest = [t.lower() for t in tok[3:]]
            if "channel" in rest:
                rule.channel = int(rest[rest.index("channel") + 1])
            rules.append(rule)
        else:
            raise ValueError(f"unknown stub rule {raw.strip()!r}")
    classes = [r.cls for r in rules]
    if len(set(classes)) != len(classes):
        raise ValueError("each class may appear in at most one stub rule")
    for r in rules:
        if not 0.0 <= r.r < 1.0:
            raise ValueError(f"stub activity must lie in [0, 1), got {r.r}")
    return rules


def _seld_stub(script: str, input_shape, sample_rate: int = 24000, fft_size: int = 512):
    rules = _parse_seld(script)
    c, t, f = input_shape
    gated = [r for r in rules if r.kind != "constant"]
    k = max(1, len(gated))
    w1 = np.zeros((k, c * f))
    b1 = np.zeros(k)
    w2 = np.zeros((2 * N_CLASSES, k))
    b2 = np.zeros(2 * N_CLASSES)
    freqs = np.arange(f) * sample_rate / fft_size
    for r in rules:
        xy = np.array([np.cos(np.deg2rad(r.azimuth)), np.sin(np.deg2rad(r.azimuth))]) * r.r
        a = np.arctanh(np.round(xy, 12))
        slots = (r.cls, N_CLASSES + r.cls)
        if r.kind == "constant":
            b2[list(slots)] += a
            continue
        g = gated.index(r)
        if r.kind == "energy":
            lo, hi = r.band if r.band else (0.0, freqs[-1])
            sel = np.flatnonzero((freqs >= lo) & (freqs <= hi))
            if sel.size == 0:
                raise ValueError(f"energy band {r.band} selects no bins")
            w1[g, sel] = GATE_GAIN / sel.size
            b1[g] = -GATE_GAIN * r.above
            # gate in {-1, 1} -> output tanh(a * (g + 1) / 2)
            w2[list(slots), g] = a / 2
            b2[list(slots)] += a / 2
        else:
            ch = 3 + r.channel
            if not 4 <= ch < c:
                raise ValueError(f"nipd channel {r.channel} outside the feature stack")
            sel = np.arange(1, min(NIPD_MAX_BIN, f))
            w1[g, ch * f + sel] = NIPD_GAIN / sel.size
            w2[N_CLASSES + r.cls, g] = np.arctanh(r.r)
    layers = [LayerSpec("flatten"), LayerSpec("linear", out_dim=k), LayerSpec("tanh"),
              LayerSpec("linear", out_dim=2 * N_CLASSES), LayerSpec("tanh")]
    spec = NetworkSpec(layers, input_shape, OutputContract.ACCDOA_2D)
    wf = WeightFile()
    wf["layers.1.weight"], wf["layers.1.bias"] = w1.astype(np.float32), b1.astype(np.float32)
    wf["layers.3.weight"], wf["layers.3.bias"] = w2.astype(np.float32), b2.astype(np.float32)
    return spec, wf


def _asc_stub(script: str, input_shape):
    logits = np.zeros(N_SCENES)
    for raw in script.replace(";", "\n").splitlines():
        tok = raw.split("#", 1)[0].split()
        if not tok:
            continue
        if tok[0].lower() != "scene" or len(tok) != 2:
            raise ValueError(f"unknown ASC stub rule {raw.strip()!r}")
        logits[:] = 0
        logits[parse_scene(tok[1])] = 10.0
    c, t, f = input_shape
    spec = NetworkSpec([LayerSpec("flatten"), LayerSpec("linear", out_dim=N_SCENES)], input_shape,
                       OutputContract.SCENE_LOGITS)
    wf = WeightFile()
    wf["layers.1.weight"] = np.zeros((N_SCENES, c * f), np.float32)
    wf["layers.1.bias"] = logits.astype(np.float32)
    return spec, wf


def stub_model(kind: str, script: str = "silent", input_shape=None):
    """Build ``(NetworkSpec, WeightFile)`` for a scripted ``seld`` or ``asc`` model."""
    if kind == "seld":
        return _seld_stub(script, tuple(input_shape or SELD_INPUT))
    if kind == "asc":
        return _asc_stub(script, tuple(input_shape or ASC_INPUT))
    raise ValueError(f"stub kind must be 'seld' or 'asc', got {kind!r}")
