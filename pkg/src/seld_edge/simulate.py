"""Controllable stand-ins for trained models: ACCDOA score sequences and scene
predictions drawn from a manifest's ground truth.

True in-context events sit just under the usual 0.5 cut-off and out-of-context
classes fire spurious activations just above it, which is the regime where
per-scene thresholds pay off.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accdoa import AccdoaFrameSeq
from .taxonomy import DEFAULT_POLICY, N_CLASSES, EventClassId, SceneId


@dataclass(frozen=True)
class ScoreModel:
    n_frames: int = 80
    frame_hop_s: float = 0.0125
    event_r: tuple = (0.45, 0.03)  # mean, std of per-event activity
    false_r: tuple = (0.55, 0.03)
    frame_jitter: float = 0.005
    false_rate: float = 0.5  # chance per out-of-context class per clip
    false_len_s: tuple = (0.2, 0.6)
    noise_r: float = 0.2
    az_jitter_deg: float = 1.5


def _put(data, a, b, cls, r, az_deg, rng, jitter, az_jitter):
    n = b - a
    rr = np.clip(r + jitter * rng.standard_normal(n), 0.0, 0.999)
    th = np.deg2rad(az_deg + az_jitter * rng.standard_normal(n))
    data[a:b, cls, 0] = rr * np.cos(th)
    data[a:b, cls, 1] = rr * np.sin(th)


def scripted_scores(clip, seed: int = 0, model: ScoreModel = ScoreModel(), policy=None) -> AccdoaFrameSeq:
    policy = DEFAULT_POLICY if policy is None else policy
    rng = np.random.default_rng([seed, int.from_bytes(clip.clip_id.encode()[-8:], "little")])
    T = model.n_frames
    r0 = rng.uniform(0, model.noise_r, (T, N_CLASSES))
    th0 = rng.uniform(0, 2 * np.pi, (T, N_CLASSES))
    data = np.stack([r0 * np.cos(th0), r0 * np.sin(th0)], axis=-1)
    for lab in clip.labels:
        a = int(round(lab.onset_s / model.frame_hop_s))
        b = max(a + 1, int(round(lab.offset_s / model.frame_hop_s)))
        r = float(np.clip(rng.normal(*model.event_r), 0.05, 0.95))
        _put(data, a, min(b, T), int(lab.event_class), r, lab.azimuth_deg, rng, model.frame_jitter,
             model.az_jitter_deg)
    for cls in EventClassId:
        if policy[clip.scene].permits(cls) or rng.random() >= model.false_rate:
            continue
        n = max(1, int(round(rng.uniform(*model.false_len_s) / model.frame_hop_s)))
        a = int(rng.integers(0, max(1, T - n + 1)))
        r = float(np.clip(rng.normal(*model.false_r), 0.05, 0.95))
        _put(data, a, min(a + n, T), int(cls), r, rng.uniform(0, 360), rng, model.frame_jitter, 0.0)
    return AccdoaFrameSeq(data, model.frame_hop_s)


def scripted_scene_predictions(clips, accuracy: float, seed: int = 0) -> dict:
    """Exactly ``round((1 - accuracy) * n)`` clips get a wrong (uniformly chosen) scene."""
    clips = list(getattr(clips, "clips", clips))
    rng = np.random.default_rng(seed)
    n_wrong = int(round((1.0 - accuracy) * len(clips)))
    wrong = set(rng.choice(len(clips), size=n_wrong, replace=False).tolist()) if n_wrong else set()
    out = {}
    for k, clip in enumerate(clips):
        if k in wrong:
            others = [s for s in SceneId if s != clip.scene]
            out[clip.clip_id] = others[int(rng.integers(0, len(others)))]
        else:
            out[clip.clip_id] = clip.scene
    return out
