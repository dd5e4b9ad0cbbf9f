"""Location-dependent F-score and scene accuracy."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .taxonomy import AZIMUTH_STEP_DEG, N_CLASSES, N_SCENES, EventClassId, SceneId, parse_scene

# half the spacing between neighbouring RIR directions
THETA_MAX = AZIMUTH_STEP_DEG / 2
_INVALID = 1e9


def angular_error(a_deg: float, b_deg: float) -> float:
    d = abs(float(a_deg) - float(b_deg)) % 360.0
    return min(d, 360.0 - d)


def _overlap(a_on, a_off, b_on, b_off) -> bool:
    return min(a_off, b_off) - max(a_on, b_on) > 0


def _match_count(pred_az, truth_az, valid) -> int:
    """Maximum number of valid one-to-one pairs; among those, least total angular error."""
    if not pred_az or not truth_az:
        return 0
    cost = np.full((len(pred_az), len(truth_az)), _INVALID)
    for p, pa in enumerate(pred_az):
        for t, ta in enumerate(truth_az):
            if valid[p][t]:
                cost[p, t] = angular_error(pa, ta)
    rows, cols = linear_sum_assignment(cost)
    return int(np.sum(cost[rows, cols] < _INVALID))


def match_clip(preds, truths, theta_max: float = THETA_MAX, *, granularity: str = "event",
               frame_hop_s: float | None = None) -> list:
    """Per-class ``(tp, fp, fn)`` for one clip.

    Event level: a prediction is a TP when it shares the truth's class, overlaps
    it in time and lies within ``theta_max`` degrees; each truth absorbs at most
    one prediction, the rest are FPs. Frame level applies the same rule on every
    frame of ``frame_hop_s``.
    """
    if granularity == "frame":
        return _match_frames(preds, truths, theta_max, frame_hop_s)
    if granularity != "event":
        raise ValueError(f"granularity must be 'event' or 'frame', got {granularity!r}")
    out = []
    for c in range(N_CLASSES):
        P = [p for p in preds if int(p.event_class) == c]
        T = [t for t in truths if int(t.event_class) == c]
        valid = [[_overlap(p.onset_s, p.offset_s, t.onset_s, t.offset_s)
                  and angular_error(p.azimuth_deg, t.azimuth_deg) <= theta_max for t in T] for p in P]
        tp = _match_count([p.azimuth_deg for p in P], [t.azimuth_deg for t in T], valid)
        out.append((tp, len(P) - tp, len(T) - tp))
    return out


def _frame_span(on, off, hop):
    return int(round(on / hop)), int(round(off / hop))


def _match_frames(preds, truths, theta_max, hop):
    if not hop or hop <= 0:
        raise ValueError("frame granularity needs a positive frame_hop_s")
    ends = [_frame_span(e.onset_s, e.offset_s, hop)[1] for e in list(preds) + list(truths)]
    n = max(ends, default=0)
    out = []
    for c in range(N_CLASSES):
        P = [(_frame_span(p.onset_s, p.offset_s, hop), p.azimuth_deg) for p in preds if int(p.event_class) == c]
        T = [(_frame_span(t.onset_s, t.offset_s, hop), t.azimuth_deg) for t in truths if int(t.event_class) == c]
        tp = fp = fn = 0
        for f in range(n):
            pa = [az for (a, b), az in P if a <= f < b]
            ta = [az for (a, b), az in T if a <= f < b]
            valid = [[angular_error(x, y) <= theta_max for y in ta] for x in pa]
            k = _match_count(pa, ta, valid)
            tp, fp, fn = tp + k, fp + len(pa) - k, fn + len(ta) - k
        out.append((tp, fp, fn))
    return out


def f_score(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


@dataclass
class EvalReport:
    counts: np.ndarray  # (classes, 3) tp/fp/fn
    theta_max: float = THETA_MAX
    n_clips: int = 0
    asc_correct: int | None = None
    asc_total: int | None = None
    confusion: np.ndarray | None = None  # true scene x predicted scene
    per_scene: dict = field(default_factory=dict)

    @property
    def included(self) -> np.ndarray:
        """Classes with any truth or prediction in the evaluated clips."""
        return self.counts.sum(axis=1) > 0

    @property
    def class_f(self) -> list:
        return [f_score(*row) if inc else None for row, inc in zip(self.counts.tolist(), self.included)]

    @property
    def macro_f(self) -> float:
        vals = [f for f in self.class_f if f is not None]
        return float(np.mean(vals)) if vals else 0.0

    @property
    def asc_accuracy(self) -> float | None:
        if not self.asc_total:
            return None
        return self.asc_correct / self.asc_total

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "tp", "fp", "fn", "f_le_7p5"])
        for cls, (tp, fp, fn), f in zip(EventClassId, self.counts.tolist(), self.class_f):
            w.writerow([cls.name, tp, fp, fn, "" if f is None else f"{100 * f:.2f}"])
        tp, fp, fn = self.counts.sum(axis=0).tolist()
        w.writerow(["macro", tp, fp, fn, f"{100 * self.macro_f:.2f}"])
        return buf.getvalue()

    def scene_accuracy_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scene", "n", "correct", "accuracy"])
        if self.confusion is not None:
            for s in SceneId:
                n = int(self.confusion[s].sum())
                k = int(self.confusion[s, s])
                w.writerow([s.name, n, k, f"{100 * k / n:.2f}" if n else ""])
        acc = self.asc_accuracy
        w.writerow(["overall", self.asc_total or 0, self.asc_correct or 0, "" if acc is None else f"{100 * acc:.2f}"])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'class':<10} {'TP':>5} {'FP':>5} {'FN':>5} {'F<=%.1f' % self.theta_max:>8}"]
        for cls, (tp, fp, fn), f in zip(EventClassId, self.counts.tolist(), self.class_f):
            fs = "-" if f is None else f"{100 * f:.2f}"
            lines.append(f"{cls.name:<10} {tp:>5} {fp:>5} {fn:>5} {fs:>8}")
        lines.append(f"{'macro':<10} {'':>5} {'':>5} {'':>5} {100 * self.macro_f:>8.2f}")
        if self.asc_accuracy is not None:
            lines.append(f"ASC accuracy: {100 * self.asc_accuracy:.2f}% ({self.asc_correct}/{self.asc_total})")
        return "\n".join(lines)


def _clips(manifest):
    return list(getattr(manifest, "clips", manifest))


def evaluate_corpus(manifest, predictions: dict, scene_predictions: dict | None = None, *,
                    theta_max: float = THETA_MAX, granularity: str = "event",
                    frame_hop_s: float | None = None, per_scene: bool = True) -> EvalReport:
    """Aggregate clip matches over a manifest.

    ``predictions`` maps clip id -> detections; ``scene_predictions`` maps clip
    id -> predicted scene (optional). Clip ids must match the manifest exactly.
    """
    clips = _clips(manifest)
    ids = {c.clip_id for c in clips}
    unknown = sorted(set(predictions) - ids)
    if unknown:
        raise ValueError(f"predictions for clips not in the manifest: {unknown[:5]}")
    missing = sorted(ids - set(predictions))
    if missing:
        raise ValueError(f"no predictions for manifest clips: {missing[:5]}")
    counts = np.zeros((N_CLASSES, 3), dtype=np.int64)
    by_scene = {s: np.zeros((N_CLASSES, 3), dtype=np.int64) for s in SceneId}
    for clip in clips:
        m = np.asarray(match_clip(predictions[clip.clip_id], clip.labels, theta_max,
                                  granularity=granularity, frame_hop_s=frame_hop_s), dtype=np.int64)
        counts += m
        by_scene[clip.scene] += m
    report = EvalReport(counts, theta_max, len(clips))
    if scene_predictions is not None:
        unknown = sorted(set(scene_predictions) - ids)
        if unknown:
            raise ValueError(f"scene predictions for clips not in the manifest: {unknown[:5]}")
        conf = np.zeros((N_SCENES, N_SCENES), dtype=np.int64)
        for clip in clips:
            pred = scene_predictions.get(clip.clip_id)
            if pred is not None:
                conf[clip.scene, parse_scene(pred)] += 1
        report.confusion = conf
        report.asc_total = int(conf.sum())
        report.asc_correct = int(np.trace(conf))
    if per_scene:
        for s in SceneId:
            n = sum(1 for c in clips if c.scene == s)
            if n:
                report.per_scene[s] = EvalReport(by_scene[s], theta_max, n)
    return report


def macro_f_percent(report: EvalReport) -> float:
    return round(100 * report.macro_f, 2)
