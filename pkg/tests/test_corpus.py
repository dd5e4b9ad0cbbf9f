import hashlib

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from seld_edge.audio import AudioClip, read_wav, rms
from seld_edge.corpus import (CorpusConfig, CorpusManifest, InsufficientSourceError, build_corpus, gain_for_snr,
                              measure_snr, spatialize, synthesize_clip, validate_manifest)
from seld_edge.sources import make_background, make_event
from seld_edge.taxonomy import DEFAULT_POLICY, EventClassId as E, SceneId as S

from conftest import tone


def brute_convolve(x, h, n_out):
    """Direct O(N*K) convolution sum."""
    y = np.zeros(n_out)
    for n in range(n_out):
        for k in range(len(h)):
            if 0 <= n - k < len(x):
                y[n] += h[k] * x[n - k]
    return y


def kernel(taps):
    return AudioClip(np.tile(np.asarray(taps, float), (4, 1)), 24000)


# --- spatialize ---

def test_spatialize_identity_kernel():
    e = np.random.default_rng(0).standard_normal(100)
    out = spatialize(AudioClip(e), kernel([1.0]))
    assert out.samples.shape == (4, 100)
    for m in range(4):
        np.testing.assert_allclose(out.samples[m], e, atol=1e-12)


def test_spatialize_shift_kernel():
    e = np.random.default_rng(1).standard_normal(50)
    out = spatialize(AudioClip(e), kernel([0, 0, 0, 0, 0, 1.0]))
    np.testing.assert_allclose(out.samples[2, :5], 0, atol=1e-12)
    np.testing.assert_allclose(out.samples[2, 5:], e[:-5], atol=1e-12)


def test_spatialize_matches_direct_sum():
    ramp = np.arange(16, dtype=float)
    out = spatialize(AudioClip(ramp), kernel([0.5, 0.25, 0.25]))
    ref = brute_convolve(ramp, [0.5, 0.25, 0.25], 16)
    for m in range(4):
        np.testing.assert_allclose(out.samples[m], ref, atol=1e-12)


def test_spatialize_distinct_channels_against_oracle(rir_bank):
    e = np.random.default_rng(2).standard_normal(300)
    h = rir_bank[7][:, :200]
    out = spatialize(AudioClip(e), AudioClip(h, 24000))
    for m in range(4):
        np.testing.assert_allclose(out.samples[m], brute_convolve(e, h[m], 300), atol=1e-9)


def test_spatialize_errors():
    with pytest.raises(ValueError, match="sample-rate"):
        spatialize(AudioClip(np.ones(10), 24000), AudioClip(np.ones((4, 3)), 48000))
    with pytest.raises(ValueError):
        spatialize(AudioClip(np.ones((2, 10))), kernel([1.0]))
    with pytest.raises(ValueError):
        spatialize(AudioClip(np.ones(10)), AudioClip(np.ones((2, 3))))


@given(arrays(np.float64, 64, elements=st.floats(-1, 1)), arrays(np.float64, 64, elements=st.floats(-1, 1)),
       arrays(np.float64, (4, 9), elements=st.floats(-1, 1)))
def test_spatialize_is_linear(a, b, h):
    rir = AudioClip(h, 24000)
    lhs = spatialize(AudioClip(a + b), rir).samples
    rhs = spatialize(AudioClip(a), rir).samples + spatialize(AudioClip(b), rir).samples
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


# --- SNR ---

def test_gain_for_snr_examples():
    assert gain_for_snr(0.1, 0.1, 0.0) == pytest.approx(1.0)
    assert gain_for_snr(0.1, 0.1, 20.0) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        gain_for_snr(0.0, 0.1, 0.0)
    with pytest.raises(ValueError):
        gain_for_snr(0.1, 1e-13, 0.0)


def test_gain_for_snr_on_mixture():
    rng = np.random.default_rng(3)
    ev = rng.standard_normal(4000)
    ev *= 0.05 / rms(ev)
    bg = rng.standard_normal(24000)
    bg *= 0.2 / rms(bg)
    g = gain_for_snr(0.05, 0.2, -10.0)
    mix = bg.copy()
    mix[1000:5000] += g * ev
    event_part = mix[1000:5000] - bg[1000:5000]
    measured = 20 * np.log10(rms(event_part) / rms(bg))
    assert abs(measured - (-10.0)) <= 0.1


# --- synthesize_clip ---

def background(seed=0, scene=S.Urban):
    return AudioClip(make_background(scene, np.random.default_rng(seed), 24000), 24000)


def test_zero_events_is_normalized_background(rir_bank):
    bg = background()
    out, labels = synthesize_clip(bg, [], S.Urban, rir_bank, 5)
    assert labels == []
    ref = np.repeat(bg.samples[:1], 4, axis=0) if bg.n_channels == 1 else bg.samples
    ref = ref * 0.99 / np.max(np.abs(ref))
    np.testing.assert_allclose(out.samples, ref, atol=1e-12)


def test_urban_tone_event(rir_bank):
    ev = AudioClip(tone(1000.0, 6000)[None], 24000)
    out, labels = synthesize_clip(background(1), [(ev, E.Siren)], S.Urban, rir_bank, 42)
    (lab,) = labels
    assert lab.azimuth_deg % 15 == 0 and 0 <= lab.azimuth_deg <= 345
    assert -10.0 <= lab.snr_db <= 5.0
    assert 0 <= lab.onset_s < lab.offset_s <= 1.0
    assert np.isclose(lab.offset_s - lab.onset_s, 0.25)
    assert np.max(np.abs(out.samples)) == pytest.approx(0.99)


def test_synthesis_is_deterministic(rir_bank):
    ev = AudioClip(tone(700.0, 8000)[None], 24000)
    a = synthesize_clip(background(2), [(ev, E.Dog)], S.Indoor, rir_bank, 11)
    b = synthesize_clip(background(2), [(ev, E.Dog)], S.Indoor, rir_bank, 11)
    assert a[0].samples.tobytes() == b[0].samples.tobytes() and a[1] == b[1]


def test_synthesis_rejects_out_of_context_class(rir_bank):
    ev = AudioClip(tone(500.0, 2000)[None], 24000)
    with pytest.raises(ValueError, match="not permitted"):
        synthesize_clip(background(), [(ev, E.Crying)], S.Urban, rir_bank, 0)
    with pytest.raises(ValueError, match="at most one"):
        synthesize_clip(background(), [(ev, E.Siren), (ev, E.Siren)], S.Urban, rir_bank, 0)


def test_synthesis_rejects_rate_mismatch(rir_bank):
    ev = AudioClip(tone(500.0, 2000)[None], 16000)
    with pytest.raises(ValueError, match="sample-rate"):
        synthesize_clip(background(), [(ev, E.Siren)], S.Urban, rir_bank, 0)


@pytest.mark.parametrize("seed", range(6))
def test_resynthesized_snr_matches_label(rir_bank, seed):
    rng = np.random.default_rng(seed)
    scene = S(seed % 3)
    classes = sorted(DEFAULT_POLICY[scene].classes)[:2]
    events = [(AudioClip(make_event(c, rng, 24000)[None], 24000), c) for c in classes]
    out, labels, stems = synthesize_clip(background(seed, scene), events, scene, rir_bank, seed, return_stems=True)
    np.testing.assert_allclose(out.samples, stems.background + sum(stems.events), atol=1e-12)
    for lab, stem, (a, b) in zip(labels, stems.events, stems.spans):
        assert abs(measure_snr(stem, stems.background, a, b) - lab.snr_db) <= 0.1
    assert stems.spans[0][0] == round(labels[0].onset_s * 24000)


# --- build_corpus ---

def test_stratified_small_build(tmp_path):
    cfg = CorpusConfig(n_train=9, n_test=3, seed=4, out_dir=str(tmp_path))
    man = build_corpus(cfg)
    train = man.split("train")
    assert len(train) == 9 and len(man.split("test")) == 3
    assert {s: sum(c.scene == s for c in train) for s in S} == {S.Indoor: 3, S.Nature: 3, S.Urban: 3}
    clip = read_wav(tmp_path / train[0].path)
    assert clip.samples.shape == (4, 24000) and clip.sample_rate == 24000
    assert (tmp_path / "manifest.csv").read_text() == man.to_csv()


def test_default_counts():
    cfg = CorpusConfig()
    assert (cfg.n_train, cfg.n_test) == (10800, 1800)
    man = build_corpus(cfg, render=False)
    assert len(man.split("train")) == 10800 and len(man.split("test")) == 1800
    validate_manifest(man)
    for clip in man.clips:
        for lab in clip.labels:
            assert lab.azimuth_deg % 15 == 0 and 0 <= lab.azimuth_deg <= 345
            lo, hi = DEFAULT_POLICY[clip.scene].snr_db
            assert lo <= lab.snr_db <= hi
            assert lab.event_class in DEFAULT_POLICY[clip.scene].classes


def test_rebuild_same_hash_and_parallel_equals_serial(tmp_path):
    a = build_corpus(CorpusConfig(n_train=12, n_test=3, seed=9, out_dir=str(tmp_path / "a")))
    b = build_corpus(CorpusConfig(n_train=12, n_test=3, seed=9, out_dir=str(tmp_path / "b"), workers=3))
    assert a.sha256() == b.sha256()
    for clip in a.clips:
        ha = hashlib.sha256((tmp_path / "a" / clip.path).read_bytes()).hexdigest()
        hb = hashlib.sha256((tmp_path / "b" / clip.path).read_bytes()).hexdigest()
        assert ha == hb
    c = build_corpus(CorpusConfig(n_train=12, n_test=3, seed=10), render=False)
    assert c.sha256() != a.sha256()


def test_manifest_only_labels_match_rendered(tmp_path):
    cfg = CorpusConfig(n_train=6, n_test=0, seed=3)
    rendered = build_corpus(cfg.updated({"out_dir": str(tmp_path)}))
    assert build_corpus(cfg, render=False).to_csv() == rendered.to_csv()


def test_manifest_csv_round_trip():
    man = build_corpus(CorpusConfig(n_train=12, n_test=6, seed=1), render=False)
    text = man.to_csv()
    assert text.splitlines()[0] == "clip_id,split,scene,event_class,azimuth_deg,onset_s,offset_s,snr_db"
    back = CorpusManifest.from_csv(text)
    assert back.to_csv() == text
    empty = [c for c in man.clips if not c.labels]
    if empty:
        assert f"{empty[0].clip_id},{empty[0].split},{empty[0].scene.name},,,,," in text


def test_manifest_rejects_bad_header():
    with pytest.raises(ValueError):
        CorpusManifest.from_csv("id,scene\nx,Urban\n")


def test_insufficient_sources_are_named(tmp_path):
    for cls in (E.Bicycle, E.CarHorn):
        (tmp_path / cls.name).mkdir()
        from seld_edge.audio import write_wav
        write_wav(tmp_path / cls.name / "a.wav", AudioClip(tone(440.0, 2400)[None], 24000))
    cfg = CorpusConfig(n_train=3, n_test=0, event_pool=str(tmp_path))
    with pytest.raises(InsufficientSourceError, match="scene=Indoor class=Crying"):
        build_corpus(cfg, render=False)


def test_config_text_round_trip():
    cfg = CorpusConfig.from_text("n_train=12\nn_test=3  # small\nseed=5\nsnr_urban=-5,0\n")
    assert (cfg.n_train, cfg.n_test, cfg.seed) == (12, 3, 5)
    assert cfg.policy[S.Urban].snr_db == (-5.0, 0.0)
    assert CorpusConfig.from_text(cfg.to_text()).to_text() == cfg.to_text()
    with pytest.raises(ValueError):
        CorpusConfig.from_text("colour=blue\n")


def test_snr_override_applies_to_labels():
    cfg = CorpusConfig.from_text("n_train=30\nn_test=0\nsnr_urban=-3,-2\n")
    man = build_corpus(cfg, render=False)
    urban = [lab for c in man.clips if c.scene == S.Urban for lab in c.labels]
    assert urban and all(-3 <= lab.snr_db <= -2 for lab in urban)
