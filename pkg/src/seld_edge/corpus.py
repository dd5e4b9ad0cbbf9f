"""Labeled spatial-audio corpus synthesis.

A clip is a 1 s background scene with 0-2 anechoic events, each convolved with
a four-channel RIR at one of 24 azimuths and mixed at a scene-dependent SNR.
"""
from __future__ import annotations

import csv
import hashlib
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal

from . import sources
from .audio import AudioClip, list_wavs, read_wav, rms, write_wav
from .rir import RirBank, load_rir_bank, procedural_rir_bank
from .taxonomy import (
    AZIMUTH_STEP_DEG,
    DEFAULT_POLICY,
    N_AZIMUTHS,
    EventClassId,
    SceneId,
    parse_class,
    parse_scene,
    policy_with_snr,
)

PEAK_TARGET = 0.99
MIN_RMS = 1e-12
MANIFEST_HEADER = ["clip_id", "split", "scene", "event_class", "azimuth_deg", "onset_s", "offset_s", "snr_db"]


class InsufficientSourceError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialEventLabel:
    clip_id: str
    event_class: EventClassId
    azimuth_deg: int
    onset_s: float
    offset_s: float
    snr_db: float

    def __post_init__(self):
        object.__setattr__(self, "event_class", parse_class(self.event_class))
        if not self.onset_s < self.offset_s:
            raise ValueError(f"onset {self.onset_s} must precede offset {self.offset_s}")
        if self.azimuth_deg % AZIMUTH_STEP_DEG or not 0 <= self.azimuth_deg < 360:
            raise ValueError(f"azimuth {self.azimuth_deg} is not on the {AZIMUTH_STEP_DEG} degree grid")


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    split: str
    scene: SceneId
    labels: tuple = ()

    @property
    def path(self) -> str:
        return f"{self.split}/{self.clip_id}.wav"


@dataclass
class CorpusManifest:
    clips: list
    seed: int = 0

    def __len__(self):
        return len(self.clips)

    def split(self, name: str) -> list:
        return [c for c in self.clips if c.split == name]

    def by_id(self) -> dict:
        return {c.clip_id: c for c in self.clips}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for c in self.clips:
            if not c.labels:
                w.writerow([c.clip_id, c.split, c.scene.name, "", "", "", "", ""])
            for lab in c.labels:
                w.writerow([c.clip_id, c.split, c.scene.name, lab.event_class.name, lab.azimuth_deg,
                            f"{lab.onset_s:.6f}", f"{lab.offset_s:.6f}", f"{lab.snr_db:.6f}"])
        return buf.getvalue()

    def sha256(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def read(cls, path) -> "CorpusManifest":
        return cls.from_csv(Path(path).read_text())

    @classmethod
    def from_csv(cls, text: str) -> "CorpusManifest":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ValueError(f"manifest header must be {','.join(MANIFEST_HEADER)}, got {header}")
        order, info, labels = [], {}, {}
        for row in reader:
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ValueError(f"malformed manifest row {row}")
            cid, split, scene = row[0], row[1], parse_scene(row[2])
            if cid not in info:
                order.append(cid)
                info[cid] = (split, scene)
                labels[cid] = []
            elif info[cid] != (split, scene):
                raise ValueError(f"clip {cid} has inconsistent split/scene rows")
            if row[3]:
                labels[cid].append(SpatialEventLabel(cid, parse_class(row[3]), int(row[4]), float(row[5]),
                                                     float(row[6]), float(row[7])))
        clips = [ClipRecord(c, info[c][0], info[c][1], tuple(labels[c])) for c in order]
        return cls(clips)


def validate_manifest(manifest: CorpusManifest, policy=None) -> None:
    policy = DEFAULT_POLICY if policy is None else policy
    for c in manifest.clips:
        seen = set()
        for lab in c.labels:
            if not policy[c.scene].permits(lab.event_class):
                raise ValueError(f"{c.clip_id}: {lab.event_class.name} not permitted in {c.scene.name}")
            if lab.event_class in seen:
                raise ValueError(f"{c.clip_id}: more than one {lab.event_class.name} instance")
            seen.add(lab.event_class)


def spatialize(event: AudioClip, rir) -> AudioClip:
    """Convolve a mono event with each RIR channel, truncated to the event length."""
    if not isinstance(rir, AudioClip):
        rir = AudioClip(np.asarray(rir, dtype=np.float64), event.sample_rate)
    if event.n_channels != 1:
        raise ValueError(f"event must be mono, got {event.n_channels} channels")
    if rir.n_channels != 4:
        raise ValueError(f"RIR must have 4 channels, got {rir.n_channels}")
    if rir.sample_rate != event.sample_rate:
        raise ValueError(f"sample-rate mismatch: event {event.sample_rate} Hz vs RIR {rir.sample_rate} Hz")
    x = event.samples[0].astype(np.float64)
    out = signal.oaconvolve(x[None, :], rir.samples.astype(np.float64), axes=1)[:, : x.size]
    return AudioClip(out, event.sample_rate)


def gain_for_snr(event_rms: float, background_rms: float, target_snr_db: float) -> float:
    """Gain g with 20*log10(g*event_rms/background_rms) == target_snr_db."""
    if not (event_rms > MIN_RMS and background_rms > MIN_RMS):
        raise ValueError(f"RMS too small for SNR scaling: event={event_rms}, background={background_rms}")
    return float(10 ** (target_snr_db / 20) * background_rms / event_rms)


def measure_snr(event_stem: np.ndarray, background_stem: np.ndarray, onset: int, offset: int) -> float:
    """SNR of an event stem over its active span against the whole background."""
    return 20 * np.log10(rms(event_stem[:, onset:offset]) / rms(background_stem))


def _background_4ch(background: AudioClip, n: int, rng) -> np.ndarray:
    x = background.samples.astype(np.float64)
    if x.shape[0] == 1:
        x = np.repeat(x, 4, axis=0)
    elif x.shape[0] != 4:
        raise ValueError(f"background must be mono or 4-channel, got {x.shape[0]}")
    if x.shape[1] > n:
        start = int(rng.integers(0, x.shape[1] - n + 1))
        x = x[:, start : start + n]
    elif x.shape[1] < n:
        x = np.tile(x, (1, -(-n // x.shape[1])))[:, :n] if x.shape[1] else np.zeros((4, n))
    return x


@dataclass
class SynthStems:
    background: np.ndarray
    events: list
    spans: list


def _draw_placements(events, scene, policy, sr: int, n: int, rng) -> list:
    """Validate events and draw (length, onset, azimuth index, snr) for each."""
    rule = policy[scene]
    seen = set()
    for ev, cls in events:
        cls = parse_class(cls)
        if not rule.permits(cls):
            raise ValueError(f"event class {cls.name} is not permitted in scene {scene.name}")
        if cls in seen:
            raise ValueError(f"at most one {cls.name} instance per clip")
        seen.add(cls)
        if ev.sample_rate != sr:
            raise ValueError(f"sample-rate mismatch: event {ev.sample_rate} Hz vs background {sr} Hz")
    lo, hi = rule.snr_db
    draws = []
    for ev, _ in events:
        length = min(ev.length, n)
        draws.append((length, int(rng.integers(0, n - length + 1)), int(rng.integers(0, N_AZIMUTHS)),
                      float(rng.uniform(lo, hi))))
    return draws


def _label(clip_id, cls, draw, sr) -> SpatialEventLabel:
    length, onset, k, snr = draw
    return SpatialEventLabel(clip_id, parse_class(cls), RirBank.azimuth_deg(k), onset / sr, (onset + length) / sr,
                             snr)


def plan_labels(events, scene, rng_seed, *, policy=None, clip_id: str = "", sample_rate: int = 24000,
                duration_s: float = 1.0) -> list:
    """Labels :func:`synthesize_clip` would emit for the same arguments, without mixing audio."""
    policy = DEFAULT_POLICY if policy is None else policy
    scene = parse_scene(scene)
    n = int(round(duration_s * sample_rate))
    draws = _draw_placements(events, scene, policy, sample_rate, n, np.random.default_rng(rng_seed))
    return [_label(clip_id, cls, d, sample_rate) for (_, cls), d in zip(events, draws)]


def synthesize_clip(background: AudioClip, events, scene, rir_bank: RirBank, rng_seed, *,
                    policy=None, clip_id: str = "", duration_s: float = 1.0, return_stems: bool = False):
    """Mix spatialized events into a background.

    ``events`` is a sequence of ``(AudioClip, EventClassId)``. Returns the
    4-channel clip and its labels; with ``return_stems`` a third element holds
    the normalized background and per-event stems so SNRs can be re-measured.
    """
    policy = DEFAULT_POLICY if policy is None else policy
    scene = parse_scene(scene)
    sr = background.sample_rate
    n = int(round(duration_s * sr))
    if rir_bank.sample_rate != sr:
        raise ValueError(f"sample-rate mismatch: background {sr} Hz vs RIR bank {rir_bank.sample_rate} Hz")
    rng = np.random.default_rng(rng_seed)
    draws = _draw_placements(events, scene, policy, sr, n, rng)
    # background crop is drawn last so labels do not depend on background length
    bg = _background_4ch(background, n, rng)
    bg_rms = rms(bg)
    mix = bg.copy()
    labels, stems, spans = [], [], []
    for (ev, cls), draw in zip(events, draws):
        length, onset, k, snr = draw
        spat = spatialize(AudioClip(ev.samples[:1, :length], sr), AudioClip(rir_bank[k], sr)).samples
        g = gain_for_snr(rms(spat), bg_rms, snr)
        placed = np.zeros((4, n))
        placed[:, onset : onset + length] = g * spat
        mix += placed
        stems.append(placed)
        spans.append((onset, onset + length))
        labels.append(_label(clip_id, cls, draw, sr))
    peak = float(np.max(np.abs(mix)))
    scale = PEAK_TARGET / peak if peak > 0 else 1.0
    out = AudioClip(mix * scale, sr)
    if return_stems:
        return out, labels, SynthStems(bg * scale, [s * scale for s in stems], spans)
    return out, labels


@dataclass
class CorpusConfig:
    n_train: int = 10800
    n_test: int = 1800
    seed: int = 0
    sample_rate: int = 24000
    clip_s: float = 1.0
    min_events: int = 0
    max_events: int = 2
    multi_instance: bool = False
    out_dir: str | None = None
    event_pool: str | None = None
    background_pool: str | None = None
    rir_dir: str | None = None
    rir_seed: int = 0
    workers: int = 1
    snr_overrides: dict = field(default_factory=dict)

    @property
    def policy(self):
        return policy_with_snr(self.snr_overrides)

    @classmethod
    def from_text(cls, text: str) -> "CorpusConfig":
        cfg = cls()
        return cfg.updated(parse_key_values(text))

    @classmethod
    def from_file(cls, path) -> "CorpusConfig":
        return cls.from_text(Path(path).read_text())

    def updated(self, kv: dict) -> "CorpusConfig":
        changes, snr = {}, dict(self.snr_overrides)
        ints = {"n_train", "n_test", "seed", "sample_rate", "min_events", "max_events", "rir_seed", "workers"}
        for key, value in kv.items():
            if key in ints:
                changes[key] = int(value)
            elif key == "clip_s":
                changes[key] = float(value)
            elif key == "multi_instance":
                changes[key] = str(value).lower() in ("1", "true", "yes")
            elif key in ("out_dir", "event_pool", "background_pool", "rir_dir"):
                changes[key] = str(value) or None
            elif key.startswith("snr_"):
                lo, hi = (float(v) for v in str(value).split(","))
                snr[parse_scene(key[4:])] = (lo, hi)
            else:
                raise ValueError(f"unknown corpus config key {key!r}")
        return replace(self, **changes, snr_overrides=snr)

    def to_text(self) -> str:
        lines = [f"{k}={'' if v is None else v}" for k, v in (
            ("n_train", self.n_train), ("n_test", self.n_test), ("seed", self.seed),
            ("sample_rate", self.sample_rate), ("clip_s", self.clip_s), ("min_events", self.min_events),
            ("max_events", self.max_events), ("multi_instance", self.multi_instance),
            ("event_pool", self.event_pool), ("background_pool", self.background_pool),
            ("rir_dir", self.rir_dir), ("rir_seed", self.rir_seed))]
        for scene, (lo, hi) in sorted(self.snr_overrides.items()):
            lines.append(f"snr_{scene.name.lower()}={lo},{hi}")
        return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> dict:
    """``key=value`` per line; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


class SourcePools:
    """Event and background material, from WAV folders or procedural generators.

    WAV layout: ``<event_pool>/<ClassName>/*.wav`` and ``<background_pool>/<SceneName>/*.wav``.
    """

    def __init__(self, sample_rate: int, event_pool=None, background_pool=None):
        self.sample_rate = sample_rate
        self.event_files = self._scan(event_pool, EventClassId) if event_pool else None
        self.background_files = self._scan(background_pool, SceneId) if background_pool else None

    @staticmethod
    def _scan(root, enum):
        root = Path(root)
        if not root.is_dir():
            raise InsufficientSourceError(f"source pool {root} does not exist")
        found = {}
        for member in enum:
            folder = root / member.name
            found[member] = list_wavs(folder) if folder.is_dir() else []
        return found

    def check(self, scenes, policy) -> None:
        for scene in scenes:
            if self.background_files is not None and not self.background_files[scene]:
                raise InsufficientSourceError(f"no background clips for scene={scene.name}")
            if self.event_files is not None:
                for cls in sorted(policy[scene].classes):
                    if not self.event_files[cls]:
                        raise InsufficientSourceError(
                            f"no event clips for scene={scene.name} class={cls.name}")

    def _load(self, path) -> AudioClip:
        clip = read_wav(path)
        if clip.sample_rate != self.sample_rate:
            raise ValueError(f"{path}: sample rate {clip.sample_rate} != {self.sample_rate}")
        return clip

    def event(self, cls, rng, max_len: int) -> AudioClip:
        if self.event_files is None:
            x = sources.make_event(cls, rng, self.sample_rate)
        else:
            files = self.event_files[cls]
            x = self._load(files[int(rng.integers(0, len(files)))]).samples.mean(axis=0)
        return AudioClip(x[None, :max_len], self.sample_rate)

    def event_length(self, cls, rng, max_len: int) -> int:
        """Length of the clip :meth:`event` would return for the same generator state."""
        if self.event_files is None:
            return min(max_len, sources.event_length(rng, self.sample_rate))
        return self.event(cls, rng, max_len).length

    def background(self, scene, rng, duration_s: float) -> AudioClip:
        if self.background_files is None:
            return AudioClip(sources.make_background(scene, rng, self.sample_rate, duration_s), self.sample_rate)
        files = self.background_files[scene]
        return self._load(files[int(rng.integers(0, len(files)))])


def _scene_schedule(n: int) -> list:
    return [SceneId(i % len(SceneId)) for i in range(n)]


def _clip_plan(cfg: CorpusConfig, index: int, scene: SceneId, pools: SourcePools):
    plan_ss, src_ss, mix_ss = np.random.SeedSequence([cfg.seed, index]).spawn(3)
    plan = np.random.default_rng(plan_ss)
    permitted = sorted(cfg.policy[scene].classes)
    hi = min(cfg.max_events, len(permitted))
    lo = min(cfg.min_events, hi)
    n_events = int(plan.integers(lo, hi + 1))
    chosen = sorted(plan.choice(permitted, size=n_events, replace=False).tolist())
    # one stream per event plus one for the background, so labels can be
    # planned from event lengths alone without synthesizing audio
    *event_ss, bg_ss = src_ss.spawn(n_events + 1)
    return [EventClassId(c) for c in chosen], [np.random.default_rng(e) for e in event_ss], \
        np.random.default_rng(bg_ss), mix_ss


def _render_clip(cfg, index, split, clip_id, scene, pools, bank, render):
    classes, event_rngs, bg_rng, mix_ss = _clip_plan(cfg, index, scene, pools)
    n = int(round(cfg.clip_s * cfg.sample_rate))
    if not render:
        stand_ins = [(AudioClip(np.zeros((1, pools.event_length(c, r, n))), cfg.sample_rate), c)
                     for c, r in zip(classes, event_rngs)]
        labels = plan_labels(stand_ins, scene, mix_ss, policy=cfg.policy, clip_id=clip_id,
                             sample_rate=cfg.sample_rate, duration_s=cfg.clip_s)
        return ClipRecord(clip_id, split, scene, tuple(labels))
    events = [(pools.event(c, r, n), c) for c, r in zip(classes, event_rngs)]
    background = pools.background(scene, bg_rng, cfg.clip_s)
    audio, labels = synthesize_clip(background, events, scene, bank, mix_ss, policy=cfg.policy,
                                    clip_id=clip_id, duration_s=cfg.clip_s)
    if render and cfg.out_dir:
        write_wav(Path(cfg.out_dir) / split / f"{clip_id}.wav", AudioClip(audio.samples.astype(np.float32),
                                                                          audio.sample_rate))
    return ClipRecord(clip_id, split, scene, tuple(labels))


def worker_cap(requested: int) -> int:
    env = os.environ.get("SELD_EDGE_THREADS")
    cap = int(env) if env and env.isdigit() and int(env) > 0 else requested
    return max(1, min(requested, cap))


def build_corpus(cfg: CorpusConfig, *, render: bool = True, rir_bank: RirBank | None = None) -> CorpusManifest:
    """Synthesize ``n_train + n_test`` clips with round-robin scene balance.

    With ``render=False`` only the manifest is produced; labels are identical
    to a rendered build because every random draw is keyed on (seed, clip index).
    """
    if cfg.multi_instance:
        raise NotImplementedError("multiple instances of one class per clip are not supported")
    pools = SourcePools(cfg.sample_rate, cfg.event_pool, cfg.background_pool)
    jobs = []
    for split, count in (("train", cfg.n_train), ("test", cfg.n_test)):
        for i, scene in enumerate(_scene_schedule(count)):
            jobs.append((len(jobs), split, f"{split}_{i:05d}", scene))
    pools.check(sorted({j[3] for j in jobs}), cfg.policy)
    if rir_bank is None:
        rir_bank = load_rir_bank(cfg.rir_dir) if cfg.rir_dir else procedural_rir_bank(cfg.sample_rate, cfg.rir_seed)
    if rir_bank.sample_rate != cfg.sample_rate:
        raise ValueError(f"RIR bank sample rate {rir_bank.sample_rate} != {cfg.sample_rate}")
    if render and cfg.out_dir:
        for split in ("train", "test"):
            (Path(cfg.out_dir) / split).mkdir(parents=True, exist_ok=True)

    def run(job):
        return _render_clip(cfg, *job, pools, rir_bank, render)

    workers = worker_cap(cfg.workers)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            clips = list(ex.map(run, jobs))
    else:
        clips = [run(j) for j in jobs]
    manifest = CorpusManifest(clips, cfg.seed)
    validate_manifest(manifest, cfg.policy)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest.write(out / "manifest.csv")
        (out / "corpus_config.txt").write_text(cfg.to_text())
    return manifest
