"""Three-thread streaming runtime: acquisition, scene classification, and
event localization/detection over bounded queues.

The acquisition thread hands each 1 s chunk to both workers. The scene worker
publishes its predictions into a shared cell; the SELD worker decodes chunk k
with the newest scene whose index is <= k. Results come back in input order.
"""
from __future__ import annotations

import csv
import io
import logging
import queue
import threading
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .accdoa import AccdoaFrameSeq, ThresholdMatrix, decode
from .audio import AudioClip, read_wav
from .corpus import parse_key_values
from .features import SELD_STFT, log_mel, salsa_lite
from .nn import Model, builtin_config, load_network, random_weights
from .nn.weights import WeightFile
from .taxonomy import SceneId

log = logging.getLogger(__name__)

_END = object()
REFERENCE_STAGE_MS = {
    ("ASC", "Feature extraction"): 7.6,
    ("ASC", "Model inference"): 5.5,
    ("ASC", "ASC total"): 13.1,
    ("SELD", "Feature extraction"): 18.5,
    ("SELD", "Model inference"): 19.5,
    ("SELD", "SELD total"): 38.0,
}


@dataclass(frozen=True)
class PipelineConfig:
    chunk_s: float = 1.0
    sample_rate: int = 24000
    queue_capacity: int = 4
    scene_policy: str = "latest"  # "latest" never waits; "sync" waits for the same chunk's scene
    max_scene_age: int | None = None  # in chunks; None = unlimited
    live: bool = False  # drop chunks on full queues instead of blocking
    seld_spec: str | None = None
    seld_weights: str | None = None
    asc_spec: str | None = None
    asc_weights: str | None = None
    thresholds: str | None = None
    weight_seed: int = 0

    def __post_init__(self):
        n = self.chunk_s * self.sample_rate
        if abs(n - round(n)) > 1e-9 or n <= 0:
            raise ValueError("chunk length x sample rate must be a positive integer")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if self.scene_policy not in ("latest", "sync"):
            raise ValueError(f"unknown scene policy {self.scene_policy!r}")

    @property
    def chunk_samples(self) -> int:
        return int(round(self.chunk_s * self.sample_rate))

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls().updated(parse_key_values(Path(path).read_text()))

    def updated(self, kv: dict) -> "PipelineConfig":
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, value in kv.items():
            if key not in types:
                raise ValueError(f"unknown pipeline config key {key!r}")
            t = str(types[key])
            if value in ("", "none", "None"):
                changes[key] = None
            elif key == "live":
                changes[key] = str(value).lower() in ("1", "true", "yes")
            elif t.startswith("float"):
                changes[key] = float(value)
            elif t.startswith("int"):
                changes[key] = int(value)
            else:
                changes[key] = str(value)
        return replace(self, **changes)


@dataclass
class StageTimings:
    asc_feature_ms: float = 0.0
    asc_infer_ms: float = 0.0
    seld_feature_ms: float = 0.0
    seld_infer_ms: float = 0.0
    decode_ms: float = 0.0
    end_to_end_ms: float = 0.0

    @property
    def asc_total_ms(self) -> float:
        return self.asc_feature_ms + self.asc_infer_ms

    @property
    def seld_total_ms(self) -> float:
        return self.seld_feature_ms + self.seld_infer_ms


@dataclass(frozen=True)
class Chunk:
    index: int
    samples: np.ndarray
    t_acquired: float


@dataclass
class ChunkResult:
    chunk_id: int
    detections: list
    scene: SceneId  # this chunk's scene prediction
    scene_used: SceneId | None  # scene the detections were decoded with
    scene_used_index: int | None
    timings: StageTimings
    asc_done_at: float = 0.0  # when this chunk's scene was published
    scene_read_at: float = 0.0  # when the SELD stage looked up a scene for this chunk


@dataclass
class StreamStats:
    submitted: int = 0
    processed: int = 0
    dropped: int = 0
    dropped_ids: list = field(default_factory=list)

    @property
    def overloaded(self) -> bool:
        return self.dropped > 0

    def overload_report(self) -> str:
        return (f"overload: dropped {self.dropped} of {self.submitted} chunks "
                f"(processed {self.processed}); first dropped ids {self.dropped_ids[:10]}")


class SceneCell:
    """Recent scene predictions, replaced wholesale under a condition variable."""

    def __init__(self, keep: int = 256):
        self._keep = keep
        self._entries: tuple = ()  # (index, scene, done_at), ascending index
        self._cond = threading.Condition()

    def publish(self, index: int, scene: SceneId) -> float:
        """Store a prediction; returns the publication time, stamped under the lock."""
        with self._cond:
            done_at = time.perf_counter()
            self._entries = (self._entries + ((index, scene, done_at),))[-self._keep :]
            self._cond.notify_all()
        return done_at

    def _find(self, k: int):
        for idx, scene, _ in reversed(self._entries):
            if idx <= k:
                return idx, scene
        return None

    def lookup(self, k: int):
        """``(newest (index, scene) with index <= k or None, read time)``."""
        with self._cond:
            return self._find(k), time.perf_counter()

    def latest(self, k: int):
        return self.lookup(k)[0]

    def wait_for(self, k: int, stop: threading.Event, timeout: float = 0.05):
        """Block until chunk k's scene is published; same return as :meth:`lookup`."""
        with self._cond:
            while not stop.is_set():
                if any(idx == k for idx, _, _ in self._entries):
                    break
                self._cond.wait(timeout)
            return self._find(k), time.perf_counter()


@dataclass
class PipelineModels:
    seld: Model
    asc: Model
    thresholds: ThresholdMatrix


def load_models(cfg: PipelineConfig) -> PipelineModels:
    """Models named in the config; missing weights fall back to seeded random
    weights (timing-only use)."""
    seld_spec = load_network(cfg.seld_spec or builtin_config("seldnet"))
    asc_spec = load_network(cfg.asc_spec or builtin_config("asc"))
    seld_w = WeightFile.load(cfg.seld_weights) if cfg.seld_weights else random_weights(seld_spec, cfg.weight_seed)
    asc_w = WeightFile.load(cfg.asc_weights) if cfg.asc_weights else random_weights(asc_spec, cfg.weight_seed + 1)
    tm = ThresholdMatrix.load(cfg.thresholds) if cfg.thresholds else ThresholdMatrix.filled()
    return PipelineModels(Model(seld_spec, seld_w), Model(asc_spec, asc_w), tm)


def _ms(a, b):
    return (b - a) * 1000.0


def _seld_frame_hop(model, cfg: PipelineConfig) -> float:
    return cfg.chunk_s / model.spec.output_shape[0]


class StreamingPipeline:
    def __init__(self, models: PipelineModels, cfg: PipelineConfig = PipelineConfig()):
        self.models = models
        self.cfg = cfg
        self.stats = StreamStats()

    def _asc_worker(self, inq, outq, cell, stop):
        asc = self.models.asc
        while True:
            item = inq.get()
            if item is _END or stop.is_set():
                outq.put(_END)
                return
            try:
                t0 = time.perf_counter()
                feat = log_mel(AudioClip(item.samples[:1], self.cfg.sample_rate))
                t1 = time.perf_counter()
                logits = asc.forward(feat)
                scene = SceneId(int(np.argmax(logits)))
                t2 = time.perf_counter()
                done_at = cell.publish(item.index, scene)
                outq.put((item.index, scene, _ms(t0, t1), _ms(t1, t2), done_at))
            except BaseException as exc:  # surfaced by the consumer; queued before stop is visible
                outq.put(exc)
                stop.set()
                return

    def _seld_worker(self, inq, outq, cell, stop):
        seld, tm, cfg = self.models.seld, self.models.thresholds, self.cfg
        hop = _seld_frame_hop(seld, cfg)
        while True:
            item = inq.get()
            if item is _END or stop.is_set():
                outq.put(_END)
                return
            try:
                t0 = time.perf_counter()
                feat = salsa_lite(AudioClip(item.samples, cfg.sample_rate), stft_cfg=SELD_STFT)
                t1 = time.perf_counter()
                seq = AccdoaFrameSeq.from_network(seld.forward(feat), hop)
                t2 = time.perf_counter()
                if cfg.scene_policy == "sync":
                    found, read_at = cell.wait_for(item.index, stop)
                else:
                    found, read_at = cell.lookup(item.index)
                if found is not None and cfg.max_scene_age is not None and item.index - found[0] > cfg.max_scene_age:
                    found = None
                t3 = time.perf_counter()
                dets = decode(seq, None if found is None else found[1], tm)
                t4 = time.perf_counter()
                outq.put((item.index, dets, found, _ms(t0, t1), _ms(t1, t2), _ms(t3, t4), read_at, t4))
            except BaseException as exc:
                outq.put(exc)
                stop.set()
                return

    def run(self, source):
        """Yield a :class:`ChunkResult` per processed chunk, in input order.

        ``source`` yields (4, chunk_samples) arrays or AudioClips.
        """
        cfg = self.cfg
        self.stats = stats = StreamStats()
        asc_in = queue.Queue(cfg.queue_capacity)
        seld_in = queue.Queue(cfg.queue_capacity)
        asc_out, seld_out = queue.Queue(), queue.Queue()
        cell, stop = SceneCell(), threading.Event()
        acquired = {}

        def put(q, item):
            while not stop.is_set():
                try:
                    q.put(item, timeout=0.05)
                    return True
                except queue.Full:
                    continue
            return False

        def acquire():
            try:
                for k, block in enumerate(source):
                    if stop.is_set():
                        break
                    x = block.samples if isinstance(block, AudioClip) else np.asarray(block)
                    if x.shape != (4, cfg.chunk_samples):
                        raise ValueError(f"chunk {k} has shape {x.shape}, expected (4, {cfg.chunk_samples})")
                    x = np.array(x, dtype=np.float64)
                    x.flags.writeable = False
                    stats.submitted += 1
                    if cfg.live and (asc_in.full() or seld_in.full()):
                        stats.dropped += 1
                        stats.dropped_ids.append(k)
                        continue
                    chunk = Chunk(k, x, time.perf_counter())
                    acquired[k] = chunk.t_acquired
                    if not (put(asc_in, chunk) and put(seld_in, chunk)):
                        break
            except BaseException as exc:
                stop.set()
                seld_out.put(exc)
            finally:
                for q in (asc_in, seld_in):
                    if not put(q, _END):
                        try:
                            q.put_nowait(_END)
                        except queue.Full:
                            pass

        threads = [
            threading.Thread(target=acquire, name="acquisition", daemon=True),
            threading.Thread(target=self._asc_worker, args=(asc_in, asc_out, cell, stop), name="asc", daemon=True),
            threading.Thread(target=self._seld_worker, args=(seld_in, seld_out, cell, stop), name="seld",
                             daemon=True),
        ]
        for t in threads:
            t.start()
        try:
            while True:
                s = seld_out.get()
                if isinstance(s, BaseException):
                    raise s
                if s is _END:
                    # a scene-worker failure also stops the SELD worker; report it
                    while True:
                        try:
                            a = asc_out.get_nowait()
                        except queue.Empty:
                            break
                        if isinstance(a, BaseException):
                            raise a
                    break
                a = asc_out.get()
                if isinstance(a, BaseException):
                    raise a
                if a is _END:
                    raise RuntimeError("scene worker ended before the SELD worker")
                idx, dets, found, f_ms, i_ms, d_ms, read_at, seld_done = s
                a_idx, scene, af_ms, ai_ms, asc_done = a
                if a_idx != idx:
                    raise RuntimeError(f"stage results out of step: scene {a_idx} vs seld {idx}")
                t0 = acquired.pop(idx)
                timings = StageTimings(af_ms, ai_ms, f_ms, i_ms, d_ms, _ms(t0, max(asc_done, seld_done)))
                stats.processed += 1
                yield ChunkResult(idx, dets, scene, None if found is None else found[1],
                                  None if found is None else found[0], timings, asc_done, read_at)
        finally:
            stop.set()
            for q in (asc_in, seld_in):
                try:
                    q.put_nowait(_END)
                except queue.Full:
                    pass
            for t in threads:
                t.join(timeout=5.0)
            if stats.dropped:
                log.warning(stats.overload_report())


def run_stream(source, cfg: PipelineConfig = PipelineConfig(), models: PipelineModels | None = None):
    """Generator of ChunkResults; see :class:`StreamingPipeline` for stats access."""
    pipe = StreamingPipeline(models or load_models(cfg), cfg)
    yield from pipe.run(source)


# --- sources --------------------------------------------------------------

def clip_chunks(clip: AudioClip, chunk_s: float = 1.0):
    n = int(round(chunk_s * clip.sample_rate))
    for start in range(0, clip.length - n + 1, n):
        yield clip.samples[:, start : start + n]


def wav_chunks(paths, chunk_s: float = 1.0):
    for p in paths:
        yield from clip_chunks(read_wav(p), chunk_s)


def noise_chunks(n: int, seed: int = 0, sample_rate: int = 24000, chunk_s: float = 1.0, level: float = 0.05):
    rng = np.random.default_rng(seed)
    m = int(round(chunk_s * sample_rate))
    for _ in range(n):
        yield level * rng.standard_normal((4, m))


class LiveSourceStub:
    """Replays chunks at a fixed period, like a capture device that cannot wait."""

    def __init__(self, chunks, period_s: float = 1.0):
        self.chunks = chunks
        self.period_s = period_s

    def __iter__(self):
        t_next = time.perf_counter()
        for chunk in self.chunks:
            delay = t_next - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            yield chunk
            t_next += self.period_s


# --- benchmark ------------------------------------------------------------

TIMING_FIELDS = ("asc_feature_ms", "asc_infer_ms", "asc_total_ms", "seld_feature_ms", "seld_infer_ms",
                 "seld_total_ms", "decode_ms", "end_to_end_ms")


@dataclass
class BenchmarkResult:
    records: list
    stats: StreamStats
    in_order: bool

    def _values(self, name):
        return np.array([getattr(r.timings, name) for r in self.records])

    def mean(self, name) -> float:
        return float(np.mean(self._values(name))) if self.records else 0.0

    def p95(self, name) -> float:
        return float(np.percentile(self._values(name), 95)) if self.records else 0.0

    def rows(self) -> list:
        layout = [
            ("ASC", "Feature extraction", "asc_feature_ms"),
            ("ASC", "Model inference", "asc_infer_ms"),
            ("ASC", "ASC total", "asc_total_ms"),
            ("SELD", "Feature extraction", "seld_feature_ms"),
            ("SELD", "Model inference", "seld_infer_ms"),
            ("SELD", "SELD total", "seld_total_ms"),
            ("Pipeline", "Decoding", "decode_ms"),
            ("Pipeline", "End-to-end", "end_to_end_ms"),
        ]
        return [(sec, stage, self.mean(f), self.p95(f), REFERENCE_STAGE_MS.get((sec, stage)))
                for sec, stage, f in layout]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "stage", "mean_ms", "p95_ms", "reference_ms"])
        for sec, stage, mean, p95, ref in self.rows():
            w.writerow([sec, stage, f"{mean:.3f}", f"{p95:.3f}", "" if ref is None else f"{ref:.1f}"])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'section':<9} {'stage':<19} {'mean ms':>9} {'p95 ms':>9} {'ref ms':>7}"]
        for sec, stage, mean, p95, ref in self.rows():
            lines.append(f"{sec:<9} {stage:<19} {mean:>9.2f} {p95:>9.2f} {'' if ref is None else f'{ref:.1f}':>7}")
        lines.append(f"chunks: {len(self.records)}  dropped: {self.stats.dropped}  in order: {self.in_order}")
        return "\n".join(lines)


def _gated(chunks, gate: threading.Semaphore):
    for chunk in chunks:
        gate.acquire()
        yield chunk


def benchmark(cfg: PipelineConfig = PipelineConfig(), n: int = 1000, *, models: PipelineModels | None = None,
              source=None, out_csv=None, seed: int = 0, closed_loop: bool = True) -> BenchmarkResult:
    """Push ``n`` chunks through the full pipeline and aggregate stage timings.

    ``closed_loop`` releases chunk k+1 only once chunk k has come out, so the
    end-to-end figure is single-input latency rather than queueing delay.
    """
    pipe = StreamingPipeline(models or load_models(cfg), cfg)
    src = source if source is not None else noise_chunks(n, seed, cfg.sample_rate, cfg.chunk_s)
    gate = threading.Semaphore(1)
    if closed_loop:
        src = _gated(src, gate)
    records = []
    for res in pipe.run(src):
        records.append(res)
        gate.release()
    ids = [r.chunk_id for r in records]
    result = BenchmarkResult(records, pipe.stats, ids == sorted(ids) and len(set(ids)) == len(ids))
    if out_csv:
        Path(out_csv).write_text(result.to_csv())
    return result


def format_stream_line(res: ChunkResult) -> str:
    """``chunk_id,scene,<Class@azimuth>...,e2e_ms``"""
    parts = [str(res.chunk_id), res.scene.name]
    parts += [f"{d.event_class.name}@{d.azimuth_deg:.1f}" for d in res.detections]
    parts.append(f"{res.timings.end_to_end_ms:.3f}")
    return ",".join(parts)
