"""ACCDOA decoding with a global or scene-conditioned activity threshold."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .taxonomy import N_CLASSES, N_SCENES, EventClassId, SceneId, parse_class, parse_scene

TAU_GLOBAL = 0.5
DEFAULT_GRID = tuple(round(0.3 + 0.05 * i, 2) for i in range(11))


@dataclass(frozen=True)
class AccdoaFrameSeq:
    """Per-frame class vectors, ``data[t, i] = (x_i(t), y_i(t))``."""

    data: np.ndarray
    frame_hop_s: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[1:] != (N_CLASSES, 2):
            raise ValueError(f"ACCDOA data must be (frames, {N_CLASSES}, 2), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("ACCDOA data contains non-finite values")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_network(cls, out, frame_hop_s: float) -> "AccdoaFrameSeq":
        """Network output rows are ``[x_1..x_C, y_1..y_C]``."""
        out = np.asarray(out, dtype=np.float64)
        return cls(np.stack([out[:, :N_CLASSES], out[:, N_CLASSES:]], axis=-1), frame_hop_s)

    def to_network(self) -> np.ndarray:
        return np.concatenate([self.data[..., 0], self.data[..., 1]], axis=1)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    def activity(self) -> np.ndarray:
        """r_i(t), clamped to [0, 1]; shape (frames, classes)."""
        return np.minimum(1.0, np.hypot(self.data[..., 0], self.data[..., 1]))


@dataclass
class ThresholdMatrix:
    tau: np.ndarray  # (scenes, classes)
    tau_global: float = TAU_GLOBAL

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=np.float64)
        if tau.shape != (N_SCENES, N_CLASSES):
            raise ValueError(f"threshold matrix must be {N_SCENES}x{N_CLASSES}, got {tau.shape}")
        if np.any(tau < 0) or np.any(tau > 1) or not 0 <= self.tau_global <= 1:
            raise ValueError("thresholds must lie in [0, 1]")
        self.tau = tau

    @classmethod
    def filled(cls, value: float = TAU_GLOBAL, tau_global: float = TAU_GLOBAL) -> "ThresholdMatrix":
        return cls(np.full((N_SCENES, N_CLASSES), float(value)), tau_global)

    def row(self, scene) -> np.ndarray:
        if scene is None:
            return np.full(N_CLASSES, self.tau_global)
        return self.tau[parse_scene(scene)]

    def to_json(self) -> str:
        obj = {
            "scenes": [s.name for s in SceneId],
            "classes": [c.name for c in EventClassId],
            "tau": self.tau.tolist(),
            "tau_global": float(self.tau_global),
        }
        return json.dumps(obj, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ThresholdMatrix":
        obj = json.loads(text)
        scenes = [parse_scene(s) for s in obj["scenes"]]
        classes = [parse_class(c) for c in obj["classes"]]
        tau = np.asarray(obj["tau"], dtype=np.float64)
        if tau.shape != (len(scenes), len(classes)):
            raise ValueError("tau shape does not match scenes x classes")
        full = np.full((N_SCENES, N_CLASSES), np.nan)
        for a, s in enumerate(scenes):
            for b, c in enumerate(classes):
                full[s, c] = tau[a, b]
        if np.isnan(full).any():
            raise ValueError("threshold file does not cover every scene and class")
        return cls(full, float(obj.get("tau_global", TAU_GLOBAL)))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ThresholdMatrix":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class DetectionEvent:
    event_class: EventClassId
    azimuth_deg: float
    onset_s: float
    offset_s: float
    activity: float

    def __post_init__(self):
        object.__setattr__(self, "event_class", parse_class(self.event_class))


def activity(v) -> float:
    x, y = float(v[0]), float(v[1])
    return min(1.0, math.hypot(x, y))


def azimuth(v) -> float:
    """Direction of a 2-vector in degrees, 0 = +x, counter-clockwise, in [0, 360)."""
    x, y = float(v[0]), float(v[1])
    if x == 0.0 and y == 0.0:
        raise ValueError("zero vector has no direction")
    deg = math.degrees(math.atan2(y, x)) % 360.0
    return 0.0 if deg >= 360.0 else deg


def active_runs(mask: np.ndarray, gap: int = 0, min_frames: int = 1) -> list:
    """Maximal [start, stop) runs of True, bridging gaps of at most ``gap`` frames."""
    runs = []
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return runs
    breaks = np.flatnonzero(np.diff(idx) > gap + 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks], [idx[-1]]]) + 1
    return [(int(a), int(b)) for a, b in zip(starts, stops) if b - a >= min_frames]


def decode(seq: AccdoaFrameSeq, scene, tm: ThresholdMatrix | None = None, *, gap: int = 0,
           min_frames: int = 1, classes=None) -> list:
    """Threshold r_i(t) > tau and merge runs of active frames into events.

    ``scene=None`` applies ``tm.tau_global`` to every class. Event azimuth is the
    activity-weighted circular mean over the run.
    """
    tm = ThresholdMatrix.filled() if tm is None else tm
    tau = tm.row(scene)
    r = seq.activity()
    active = r > tau[None, :]
    unit = seq.data / np.maximum(np.hypot(seq.data[..., 0], seq.data[..., 1]), 1e-300)[..., None]
    events = []
    for i in (range(N_CLASSES) if classes is None else classes):
        for a, b in active_runs(active[:, i], gap, min_frames):
            w = r[a:b, i]
            sx = float(np.sum(w * unit[a:b, i, 0]))
            sy = float(np.sum(w * unit[a:b, i, 1]))
            az = azimuth((sx, sy)) if (sx or sy) else 0.0
            events.append(DetectionEvent(EventClassId(i), az, a * seq.frame_hop_s, b * seq.frame_hop_s,
                                         float(np.mean(w))))
    events.sort(key=lambda e: (e.onset_s, int(e.event_class)))
    return events


def tune_thresholds(preds, truths, scenes, grid=DEFAULT_GRID, *, theta_max: float = 7.5,
                    tau_global: float = TAU_GLOBAL, gap: int = 0, min_frames: int = 1) -> ThresholdMatrix:
    """Grid search each (scene, class) cell independently for the best class F-score
    on that scene's clips; ties go to the larger threshold.

    Separable because per-class counts only depend on that class's threshold.
    Scenes without clips keep ``tau_global``.
    """
    from .metrics import f_score, match_clip

    grid = sorted(float(g) for g in grid)
    if not grid or grid[0] < 0 or grid[-1] > 1:
        raise ValueError("grid must be non-empty with values in [0, 1]")
    if not len(preds) == len(truths) == len(scenes):
        raise ValueError("preds, truths and scenes must be aligned")
    scenes = [parse_scene(s) for s in scenes]
    # counts[g, s, i] = (tp, fp, fn)
    counts = np.zeros((len(grid), N_SCENES, N_CLASSES, 3), dtype=np.int64)
    for g, tau in enumerate(grid):
        tm = ThresholdMatrix.filled(tau, tau_global)
        for seq, labels, s in zip(preds, truths, scenes):
            per_class = match_clip(decode(seq, s, tm, gap=gap, min_frames=min_frames), labels, theta_max)
            for i, c in enumerate(per_class):
                counts[g, s, i] += c
    tau = np.full((N_SCENES, N_CLASSES), float(tau_global))
    present = set(scenes)
    for s in SceneId:
        if s not in present:
            continue
        for i in range(N_CLASSES):
            best, best_f = grid[-1], -1.0
            for g, value in enumerate(grid):
                f = f_score(*counts[g, s, i])
                if f >= best_f:  # ascending grid, so >= keeps the larger tau on ties
                    best, best_f = value, f
            tau[s, i] = best
    return ThresholdMatrix(tau, tau_global)


PRED_HEADER = ["clip_id", "scene_pred", "event_class", "azimuth_deg", "onset_s", "offset_s", "activity"]


def predictions_to_csv(predictions: dict, scenes: dict | None = None) -> str:
    """One row per detection; clips without detections get one row with empty event fields."""
    import csv
    import io

    scenes = scenes or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PRED_HEADER)
    for cid in sorted(set(predictions) | set(scenes)):
        sp = scenes.get(cid)
        sname = "" if sp is None else parse_scene(sp).name
        events = predictions.get(cid, [])
        if not events:
            w.writerow([cid, sname, "", "", "", "", ""])
        for e in events:
            w.writerow([cid, sname, e.event_class.name, f"{e.azimuth_deg:.4f}", f"{e.onset_s:.6f}",
                        f"{e.offset_s:.6f}", f"{e.activity:.6f}"])
    return buf.getvalue()


def predictions_from_csv(text: str):
    """Inverse of :func:`predictions_to_csv`: (detections by clip, scene prediction by clip)."""
    import csv
    import io

    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != PRED_HEADER:
        raise ValueError(f"predictions header must be {','.join(PRED_HEADER)}, got {header}")
    preds, scenes = {}, {}
    for row in reader:
        if not row:
            continue
        if len(row) != len(PRED_HEADER):
            raise ValueError(f"malformed predictions row {row}")
        cid = row[0]
        preds.setdefault(cid, [])
        if row[1]:
            scenes[cid] = parse_scene(row[1])
        if row[2]:
            preds[cid].append(DetectionEvent(parse_class(row[2]), float(row[3]), float(row[4]), float(row[5]),
                                             float(row[6])))
    return preds, scenes
