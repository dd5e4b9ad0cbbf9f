import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from seld_edge.accdoa import (DEFAULT_GRID, AccdoaFrameSeq, DetectionEvent, ThresholdMatrix, active_runs, activity,
                              azimuth, decode, predictions_from_csv, predictions_to_csv, tune_thresholds)
from seld_edge.corpus import SpatialEventLabel
from seld_edge.taxonomy import EventClassId as E, SceneId as S

HOP = 0.0125


def seq_with(cls, r, frames, az=0.0, n=80):
    data = np.zeros((n, 6, 2))
    a, b = frames
    data[a:b, cls] = r * np.array([np.cos(np.radians(az)), np.sin(np.radians(az))])
    return AccdoaFrameSeq(data, HOP)


def test_activity_examples():
    assert activity((0.6, 0.8)) == pytest.approx(1.0)
    assert activity((0, 0)) == 0.0
    assert activity((0.9, 0.9)) == 1.0


def test_azimuth_examples():
    assert azimuth((1, 0)) == 0.0
    assert azimuth((0, 1)) == 90.0
    assert azimuth((-0.5, -0.5)) == 225.0
    assert azimuth((1, -1e-300)) < 360.0
    with pytest.raises(ValueError):
        azimuth((0, 0))


@given(st.floats(1e-6, 1.5), st.floats(0, 359.99))
def test_azimuth_scale_invariance(r, theta):
    v = (r * np.cos(np.radians(theta)), r * np.sin(np.radians(theta)))
    got = azimuth(v)
    assert min(abs(got - theta), 360 - abs(got - theta)) < 1e-6


def test_network_layout_round_trip():
    out = np.arange(24, dtype=float).reshape(2, 12) / 30
    seq = AccdoaFrameSeq.from_network(out, HOP)
    assert seq.data[1, 3, 0] == out[1, 3] and seq.data[1, 3, 1] == out[1, 9]
    np.testing.assert_array_equal(seq.to_network(), out)
    with pytest.raises(ValueError):
        AccdoaFrameSeq(np.zeros((3, 5, 2)), HOP)
    with pytest.raises(ValueError):
        AccdoaFrameSeq(np.full((1, 6, 2), np.inf), HOP)


# --- decode ---

def test_decode_below_threshold_is_empty():
    assert decode(seq_with(E.Dog, 0.4, (0, 80)), None) == []


def test_decode_frame_arithmetic():
    (ev,) = decode(seq_with(E.CarHorn, 0.6, (10, 20), az=90), None)
    assert ev.event_class is E.CarHorn
    assert ev.onset_s == pytest.approx(0.125) and ev.offset_s == pytest.approx(0.25)
    assert ev.azimuth_deg == pytest.approx(90.0) and ev.activity == pytest.approx(0.6)


def test_scene_threshold_suppresses():
    tm = ThresholdMatrix.filled(0.5)
    tm.tau[S.Urban, E.CarHorn] = 0.7
    seq = seq_with(E.CarHorn, 0.6, (10, 20))
    assert decode(seq, S.Urban, tm) == []
    assert len(decode(seq, S.Nature, tm)) == 1


def test_strict_inequality():
    seq = seq_with(E.Dog, 0.5, (0, 10))
    assert decode(seq, None) == []
    assert decode(seq_with(E.Dog, 1.0, (0, 10)), S.Indoor, ThresholdMatrix.filled(1.0)) == []


def test_circular_mean_across_wrap():
    data = np.zeros((4, 6, 2))
    for t, deg in enumerate([350, 355, 5, 10]):
        data[t, 0] = 0.8 * np.array([np.cos(np.radians(deg)), np.sin(np.radians(deg))])
    (ev,) = decode(AccdoaFrameSeq(data, HOP), None)
    assert min(ev.azimuth_deg, 360 - ev.azimuth_deg) < 1e-9


def test_gap_and_min_frames():
    mask = np.array([1, 1, 0, 1, 0, 0, 1], bool)
    assert active_runs(mask) == [(0, 2), (3, 4), (6, 7)]
    assert active_runs(mask, gap=1) == [(0, 4), (6, 7)]
    assert active_runs(mask, min_frames=2) == [(0, 2)]


activity_seqs = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(6), st.just(2)),
                       elements=st.floats(-1, 1, allow_nan=False))


@given(activity_seqs)
def test_event_count_equals_maximal_runs(data):
    seq = AccdoaFrameSeq(data, HOP)
    active = seq.activity() > 0.5
    runs = 0
    for i in range(6):
        col = active[:, i]
        runs += int(col[0]) + int(np.sum(col[1:] & ~col[:-1]))
    assert len(decode(seq, None)) == runs


@given(activity_seqs, st.sampled_from(list(S)), st.integers(0, 5), st.floats(0, 1), st.floats(0, 1))
def test_monotone_in_threshold(data, scene, cls, t1, t2):
    """Raising one tau never adds detected frames of that class, nor touches other classes."""
    seq = AccdoaFrameSeq(data, HOP)
    lo, hi = sorted((t1, t2))
    tm_lo, tm_hi = ThresholdMatrix.filled(0.5), ThresholdMatrix.filled(0.5)
    tm_lo.tau[scene, cls], tm_hi.tau[scene, cls] = lo, hi

    def frames(tm, c):
        return sum(round((e.offset_s - e.onset_s) / HOP) for e in decode(seq, scene, tm) if e.event_class == c)

    assert frames(tm_hi, cls) <= frames(tm_lo, cls)
    for other in set(range(6)) - {cls}:
        assert frames(tm_hi, other) == frames(tm_lo, other)


def test_raising_tau_can_split_an_event():
    data = np.zeros((3, 6, 2))
    data[:, E.Dog, 0] = [0.6, 0.55, 0.6]
    seq = AccdoaFrameSeq(data, HOP)
    assert len(decode(seq, S.Indoor, ThresholdMatrix.filled(0.5))) == 1
    assert len(decode(seq, S.Indoor, ThresholdMatrix.filled(0.57))) == 2


@given(activity_seqs, st.sampled_from(list(S)))
def test_baseline_equivalence(data, scene):
    seq = AccdoaFrameSeq(data, HOP)
    assert decode(seq, None, ThresholdMatrix.filled(0.5)) == decode(seq, scene, ThresholdMatrix.filled(0.5))


# --- threshold matrix file ---

def test_threshold_json_round_trip(tmp_path):
    tm = ThresholdMatrix(np.random.default_rng(0).uniform(0, 1, (3, 6)), 0.5)
    tm.save(tmp_path / "t.json")
    back = ThresholdMatrix.load(tmp_path / "t.json")
    assert back.tau.tobytes() == tm.tau.tobytes() and back.tau_global == 0.5
    assert back.to_json() == tm.to_json()
    with pytest.raises(ValueError):
        ThresholdMatrix(np.full((3, 6), 1.5))
    with pytest.raises(ValueError):
        ThresholdMatrix(np.zeros((2, 6)))


def test_threshold_json_reordered_columns():
    text = ('{"scenes": ["Urban", "Indoor", "Nature"], "classes": ["Siren", "Bicycle", "CarHorn", "Crying", '
            '"Dog", "DoorKnock"], "tau": [[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], [0, 0, 0, 0, 0, 0], '
            '[1, 1, 1, 1, 1, 1]], "tau_global": 0.4}')
    tm = ThresholdMatrix.from_json(text)
    assert tm.tau[S.Urban, E.Siren] == 0.1 and tm.tau[S.Urban, E.Bicycle] == 0.2 and tm.tau_global == 0.4


def test_predictions_csv_round_trip():
    preds = {"a": [DetectionEvent(E.Dog, 12.5, 0.1, 0.3, 0.7)], "b": []}
    text = predictions_to_csv(preds, {"a": S.Indoor, "b": S.Urban})
    back, scenes = predictions_from_csv(text)
    assert back["a"][0].event_class is E.Dog and back["b"] == [] and scenes == {"a": S.Indoor, "b": S.Urban}
    assert predictions_to_csv(back, scenes) == text


# --- tuning ---

def label(cls, az, on, off):
    return SpatialEventLabel("x", cls, az, on, off, 0.0)


def test_singleton_grid():
    seqs = [seq_with(E.Dog, 0.7, (0, 10))]
    tm = tune_thresholds(seqs, [[label(E.Dog, 0, 0, 0.125)]], [S.Indoor], [0.5])
    assert np.all(tm.tau == 0.5)


def noise_seq(rng, r_max, n=40):
    r = rng.uniform(0, r_max, (n, 6))
    th = rng.uniform(0, 2 * np.pi, (n, 6))
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def test_low_true_activity_selects_low_tau():
    rng = np.random.default_rng(0)
    seqs, truths = [], []
    for k in range(4):
        data = noise_seq(rng, 0.2)
        data[10:20, E.Bicycle] = [0.45, 0.0]  # azimuth 0
        seqs.append(AccdoaFrameSeq(data, HOP))
        truths.append([label(E.Bicycle, 0, 10 * HOP, 20 * HOP)])
    tm = tune_thresholds(seqs, truths, [S.Nature] * 4, [0.3, 0.5, 0.7])
    assert tm.tau[S.Nature, E.Bicycle] == 0.3


def test_absent_class_tie_breaks_to_largest():
    rng = np.random.default_rng(1)
    seqs = [AccdoaFrameSeq(noise_seq(rng, 0.6), HOP) for _ in range(3)]
    tm = tune_thresholds(seqs, [[], [], []], [S.Urban] * 3, [0.3, 0.5, 0.7])
    assert tm.tau[S.Urban, E.Siren] == 0.7
    # scenes without clips keep the global threshold
    assert np.all(tm.tau[S.Indoor] == 0.5)


def test_tune_argument_checks():
    with pytest.raises(ValueError):
        tune_thresholds([], [], [], [])
    with pytest.raises(ValueError):
        tune_thresholds([], [], [], [1.2])
    with pytest.raises(ValueError):
        tune_thresholds([seq_with(0, 0.1, (0, 1))], [], [S.Urban], [0.5])
    assert DEFAULT_GRID[0] == 0.3 and DEFAULT_GRID[-1] == 0.8 and len(DEFAULT_GRID) == 11
