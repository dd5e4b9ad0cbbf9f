"""Command-line entry point: ``seld-edge <subcommand> [flags]``.

Every subcommand writes ``run_manifest.json`` into its ``--out`` directory
with the seed, the resolved options and SHA-256 hashes of inputs and outputs.
Failures print one JSON line on stderr and exit with a kind-specific code.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import struct
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .accdoa import (DEFAULT_GRID, AccdoaFrameSeq, ThresholdMatrix, decode, predictions_from_csv,
                     predictions_to_csv, tune_thresholds)
from .audio import AudioClip, read_wav
from .corpus import CorpusConfig, CorpusManifest, build_corpus, parse_key_values, worker_cap
from .features import (FeatureTensor, Layout, SalsaLiteConfig, log_mel, read_features, salsa_lite,
                       write_features)
from .metrics import THETA_MAX, evaluate_corpus
from .nn import Model, builtin_config, load_network, random_weights
from .nn.complexity import REFERENCE_ASC, REFERENCE_SELD, count_macs, count_params
from .nn.spec import OutputContract
from .nn.stubs import stub_model
from .nn.weights import WeightFile
from .pipeline import (PipelineConfig, PipelineModels, StreamingPipeline, benchmark,
                       LiveSourceStub, format_stream_line, load_models, wav_chunks)
from .taxonomy import EventClassId, SceneId

log = logging.getLogger("seld_edge")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_FORMAT = 4
RUN_MANIFEST = "run_manifest.json"


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _need(path, what: str = "input") -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(EXIT_MISSING, "missing_file", f"{what} not found: {p}")
    return p


def _output_hashes(out: Path) -> dict:
    return {p.relative_to(out).as_posix(): _sha256(p)
            for p in sorted(out.rglob("*")) if p.is_file() and p.name != RUN_MANIFEST}


def _write_run_manifest(args, out: Path, inputs: list) -> None:
    skip = {"func", "out", "quiet"}
    options = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}
    files = {}
    for p in inputs:
        p = Path(p)
        if p.is_file():
            files[p.as_posix()] = _sha256(p)
    doc = {"subcommand": args.command, "seed": args.seed, "options": options, "inputs": files,
           "outputs": _output_hashes(out)}
    (out / RUN_MANIFEST).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _config_kv(args) -> dict:
    return parse_key_values(_need(args.config, "config file").read_text()) if args.config else {}


# --- synth ----------------------------------------------------------------

def cmd_synth(args, out: Path) -> list:
    inputs = [args.config] if args.config else []
    cfg = CorpusConfig().updated(_config_kv(args))
    kv = {"seed": args.seed, "out_dir": str(out)}
    for key in ("n_train", "n_test", "workers", "event_pool", "background_pool", "rir_dir"):
        value = getattr(args, key)
        if value is not None:
            kv[key] = value
    for key in ("event_pool", "background_pool", "rir_dir"):
        if kv.get(key):
            _need(kv[key], key.replace("_", " "))
    cfg = cfg.updated(kv)
    manifest = build_corpus(cfg, render=not args.manifest_only)
    print(f"seed={cfg.seed}")
    _say(args, f"clips: {len(manifest)} (train {len(manifest.split('train'))}, test {len(manifest.split('test'))})")
    _say(args, f"manifest: {out / 'manifest.csv'} sha256={manifest.sha256()}")
    return inputs


# --- features -------------------------------------------------------------

def _feature_jobs(args) -> list:
    if args.corpus:
        root = _need(args.corpus, "corpus directory")
        manifest = CorpusManifest.read(_need(root / "manifest.csv", "corpus manifest"))
        clips = manifest.clips if args.split == "all" else manifest.split(args.split)
        jobs = [(c.clip_id, root / c.path) for c in clips]
        extra = [root / "manifest.csv"]
    else:
        jobs = [(Path(w).stem, Path(w)) for w in args.wav]
        extra = []
    if not jobs:
        raise CliError(EXIT_USAGE, "usage", "features needs --corpus or at least one --wav")
    for _, path in jobs:
        _need(path, "audio file")
    return jobs, extra


def cmd_features(args, out: Path) -> list:
    jobs, extra = _feature_jobs(args)
    kv = _config_kv(args)
    unknown = set(kv) - {"ref_channel", "speed_of_sound", "mic_spacing", "f_alias", "max_bin"}
    if unknown:
        raise ValueError(f"unknown feature config keys {sorted(unknown)}")
    scfg = SalsaLiteConfig(**{k: (None if v in ("", "none") else (int(v) if k in ("ref_channel", "max_bin")
                                                                    else float(v))) for k, v in kv.items()})

    def run(job):
        clip_id, path = job
        clip = read_wav(path)
        if clip.n_channels != 4:
            raise ValueError(f"{path}: expected 4 channels, got {clip.n_channels}")
        write_features(out / f"{clip_id}.salsa.ftns", salsa_lite(clip, scfg))
        write_features(out / f"{clip_id}.logmel.ftns", log_mel(AudioClip(clip.samples[:1], clip.sample_rate)))

    workers = worker_cap(args.workers)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(run, jobs))
    else:
        for job in jobs:
            run(job)
    print(f"seed={args.seed}")
    _say(args, f"features: {len(jobs)} clips -> {out}")
    return extra + [p for _, p in jobs] + ([args.config] if args.config else [])


# --- infer ----------------------------------------------------------------

def _stub_text(value: str) -> str:
    if value.startswith("@"):
        return _need(value[1:], "stub script").read_text()
    return value


def _resolve_spec(value):
    p = Path(value)
    if p.exists():
        return load_network(p)
    try:
        return load_network(builtin_config(p.stem))
    except FileNotFoundError:
        raise CliError(EXIT_MISSING, "missing_file", f"network description not found: {value}") from None


def _build_model(kind: str, spec_arg, weights_arg, stub_arg, seed: int) -> Model:
    if stub_arg:
        spec, wf = stub_model(kind, _stub_text(stub_arg))
        return Model(spec, wf)
    spec = _resolve_spec(spec_arg or ("seldnet" if kind == "seld" else "asc"))
    if weights_arg:
        return Model(spec, WeightFile.load(_need(weights_arg, "weight file")))
    log.warning("no %s weights given; using random weights from seed %d", kind, seed)
    return Model(spec, random_weights(spec, seed if kind == "seld" else seed + 1))


def cmd_infer(args, out: Path) -> list:
    root = _need(args.features, "feature directory")
    salsa = sorted(root.glob("*.salsa.ftns"))
    mel = sorted(root.glob("*.logmel.ftns"))
    if not salsa and not mel:
        raise CliError(EXIT_MISSING, "missing_file", f"no .salsa.ftns or .logmel.ftns files in {root}")
    seld = _build_model("seld", args.seld_spec, args.seld_weights, args.seld_stub, args.seed) if salsa else None
    asc = _build_model("asc", args.asc_spec, args.asc_weights, args.asc_stub, args.seed) if mel else None

    def check(model, ft, path):
        if tuple(ft.shape) != tuple(model.spec.input_shape):
            raise ValueError(f"{path.name}: feature shape {ft.shape} != network input {model.spec.input_shape}")

    for path in salsa:
        ft = read_features(path)
        if ft.layout != Layout.SELD_SALSA_LITE:
            raise ValueError(f"{path.name}: expected SALSA-Lite layout, got {ft.layout.name}")
        check(seld, ft, path)
        y = seld.forward(ft)
        clip_id = path.name[: -len(".salsa.ftns")]
        write_features(out / f"{clip_id}.accdoa.ftns", FeatureTensor(Layout.ACCDOA, y[None], 1.0 / y.shape[0]))
    for path in mel:
        ft = read_features(path)
        if ft.layout != Layout.ASC_LOGMEL:
            raise ValueError(f"{path.name}: expected log-mel layout, got {ft.layout.name}")
        check(asc, ft, path)
        logits = asc.forward(ft)
        clip_id = path.name[: -len(".logmel.ftns")]
        write_features(out / f"{clip_id}.scene.ftns", FeatureTensor(Layout.SCENE_LOGITS, logits.reshape(1, 1, -1), 1.0))
    print(f"seed={args.seed}")
    _say(args, f"inference: {len(salsa)} SELD, {len(mel)} ASC inputs -> {out}")
    inputs = salsa + mel
    for p in (args.seld_spec, args.seld_weights, args.asc_spec, args.asc_weights):
        if p:
            inputs.append(Path(p))
    return inputs


# --- decode ---------------------------------------------------------------

def _read_accdoa(path: Path, chunk_s: float) -> AccdoaFrameSeq:
    ft = read_features(path)
    if ft.layout != Layout.ACCDOA or ft.shape[0] != 1 or ft.shape[2] != 2 * len(EventClassId):
        raise ValueError(f"{path.name}: not an ACCDOA tensor (layout {ft.layout.name}, shape {ft.shape})")
    return AccdoaFrameSeq.from_network(ft.data[0], chunk_s / ft.shape[1])


def _read_scene(path: Path) -> SceneId:
    ft = read_features(path)
    if ft.layout != Layout.SCENE_LOGITS or ft.data.size != len(SceneId):
        raise ValueError(f"{path.name}: not a scene-logit tensor")
    return SceneId(int(np.argmax(ft.data.ravel())))


def _accdoa_files(root: Path) -> dict:
    files = {p.name[: -len(".accdoa.ftns")]: p for p in sorted(root.glob("*.accdoa.ftns"))}
    if not files:
        raise CliError(EXIT_MISSING, "missing_file", f"no .accdoa.ftns files in {root}")
    return files


def cmd_decode(args, out: Path) -> list:
    root = _need(args.accdoa, "ACCDOA directory")
    files = _accdoa_files(root)
    tm = ThresholdMatrix.load(_need(args.thresholds, "threshold file")) if args.thresholds else ThresholdMatrix.filled()
    inputs = list(files.values()) + ([Path(args.thresholds)] if args.thresholds else [])
    truth = None
    if args.scene_source == "oracle":
        if not args.manifest:
            raise CliError(EXIT_USAGE, "usage", "--scene-source oracle needs --manifest")
        truth = CorpusManifest.read(_need(args.manifest, "manifest")).by_id()
        inputs.append(Path(args.manifest))
    preds, scenes = {}, {}
    for clip_id, path in files.items():
        seq = _read_accdoa(path, args.chunk_s)
        scene_path = root / f"{clip_id}.scene.ftns"
        if scene_path.exists():
            scenes[clip_id] = _read_scene(scene_path)
            inputs.append(scene_path)
        if args.scene_source == "asc":
            if clip_id not in scenes:
                raise CliError(EXIT_MISSING, "missing_file", f"no scene prediction {scene_path.name}")
            use = scenes[clip_id]
        elif args.scene_source == "oracle":
            if clip_id not in truth:
                raise ValueError(f"clip {clip_id} is not in the manifest")
            use = truth[clip_id].scene
        else:
            use = None
        preds[clip_id] = decode(seq, use, tm, gap=args.gap, min_frames=args.min_frames)
    (out / "preds.csv").write_text(predictions_to_csv(preds, scenes))
    print(f"seed={args.seed}")
    n = sum(len(v) for v in preds.values())
    _say(args, f"decoded {len(preds)} clips, {n} events (scene source: {args.scene_source}) -> {out / 'preds.csv'}")
    return inputs


# --- tune -----------------------------------------------------------------

def parse_grid(text: str) -> list:
    """``lo:hi:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 10) for i in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def _manifest_clips(path, split):
    manifest = CorpusManifest.read(_need(path, "manifest"))
    return manifest.clips if split == "all" else manifest.split(split)


def cmd_tune(args, out: Path) -> list:
    root = _need(args.accdoa, "ACCDOA directory")
    files = _accdoa_files(root)
    clips = _manifest_clips(args.manifest, args.split)
    missing = [c.clip_id for c in clips if c.clip_id not in files]
    if missing:
        raise CliError(EXIT_MISSING, "missing_file", f"no ACCDOA output for clips {missing[:5]}")
    grid = parse_grid(args.grid) if args.grid else list(DEFAULT_GRID)
    seqs = [_read_accdoa(files[c.clip_id], args.chunk_s) for c in clips]
    tm = tune_thresholds(seqs, [c.labels for c in clips], [c.scene for c in clips], grid,
                         theta_max=args.theta_max, gap=args.gap, min_frames=args.min_frames)
    tm.save(out / "thresholds.json")
    print(f"seed={args.seed}")
    if not args.quiet:
        print(f"{'scene':<8} " + " ".join(f"{c.name:>9}" for c in EventClassId))
        for s in SceneId:
            print(f"{s.name:<8} " + " ".join(f"{v:>9.2f}" for v in tm.tau[s]))
    return [Path(args.manifest)] + [files[c.clip_id] for c in clips]


# --- eval -----------------------------------------------------------------

def cmd_eval(args, out: Path) -> list:
    preds, scenes = predictions_from_csv(_need(args.preds, "predictions").read_text())
    clips = _manifest_clips(args.manifest, args.split)
    report = evaluate_corpus(clips, preds, scenes or None, theta_max=args.theta_max,
                             granularity=args.granularity, frame_hop_s=args.frame_hop_s)
    (out / "report.csv").write_text(report.to_csv())
    (out / "scene_accuracy.csv").write_text(report.scene_accuracy_csv())
    rows = ["scene,macro_f"] + [f"{s.name},{100 * r.macro_f:.2f}" for s, r in sorted(report.per_scene.items())]
    (out / "per_scene.csv").write_text("\n".join(rows) + "\n")
    print(f"seed={args.seed}")
    _say(args, report.table())
    return [Path(args.preds), Path(args.manifest)]


# --- stream / bench -------------------------------------------------------

def _pipeline_config(args) -> PipelineConfig:
    cfg = PipelineConfig().updated(_config_kv(args))
    kv = {"weight_seed": args.seed}
    if getattr(args, "thresholds", None):
        kv["thresholds"] = str(_need(args.thresholds, "threshold file"))
    if getattr(args, "live", False):
        kv["live"] = "true"
    if getattr(args, "scene_policy", None):
        kv["scene_policy"] = args.scene_policy
    for key in ("seld_spec", "seld_weights", "asc_spec", "asc_weights"):
        if getattr(cfg, key):
            _need(getattr(cfg, key), key.replace("_", " "))
    return cfg.updated(kv)


def _pipeline_models(args, cfg: PipelineConfig) -> PipelineModels:
    models = load_models(cfg)
    if args.seld_stub:
        models.seld = Model(*stub_model("seld", _stub_text(args.seld_stub)))
    if args.asc_stub:
        models.asc = Model(*stub_model("asc", _stub_text(args.asc_stub)))
    return models


def cmd_stream(args, out: Path) -> list:
    cfg = _pipeline_config(args)
    if args.corpus:
        root = _need(args.corpus, "corpus directory")
        clips = _manifest_clips(root / "manifest.csv", args.split)
        paths = [_need(root / c.path, "audio file") for c in clips]
    else:
        paths = [_need(w, "audio file") for w in args.wav]
    if not paths:
        raise CliError(EXIT_USAGE, "usage", "stream needs --corpus or at least one --wav")
    source = wav_chunks(paths, cfg.chunk_s)
    if args.max_chunks:
        source = (c for k, c in zip(range(args.max_chunks), source))
    if cfg.live:
        source = LiveSourceStub(source, args.period_s)
    pipe = StreamingPipeline(_pipeline_models(args, cfg), cfg)
    det_lines = ["chunk_id,scene,scene_used_index,event_class,azimuth_deg,onset_s,offset_s"]
    time_lines = ["chunk_id,asc_feature_ms,asc_infer_ms,seld_feature_ms,seld_infer_ms,decode_ms,end_to_end_ms"]
    print(f"seed={args.seed}")
    for res in pipe.run(source):
        used = "" if res.scene_used_index is None else res.scene_used_index
        if not res.detections:
            det_lines.append(f"{res.chunk_id},{res.scene.name},{used},,,,")
        for d in res.detections:
            det_lines.append(f"{res.chunk_id},{res.scene.name},{used},{d.event_class.name},{d.azimuth_deg:.4f},"
                             f"{d.onset_s:.6f},{d.offset_s:.6f}")
        t = res.timings
        time_lines.append(f"{res.chunk_id},{t.asc_feature_ms:.3f},{t.asc_infer_ms:.3f},{t.seld_feature_ms:.3f},"
                          f"{t.seld_infer_ms:.3f},{t.decode_ms:.3f},{t.end_to_end_ms:.3f}")
        print(format_stream_line(res))
    (out / "stream.csv").write_text("\n".join(det_lines) + "\n")
    (out / "stream_timings.csv").write_text("\n".join(time_lines) + "\n")
    if pipe.stats.overloaded:
        (out / "overload.txt").write_text(pipe.stats.overload_report() + "\n")
        log.warning(pipe.stats.overload_report())
    return paths + ([Path(args.config)] if args.config else [])


def cmd_bench(args, out: Path) -> list:
    cfg = _pipeline_config(args)
    result = benchmark(cfg, args.n, models=_pipeline_models(args, cfg), seed=args.seed,
                       out_csv=out / "benchmark.csv", closed_loop=not args.open_loop)
    print(f"seed={args.seed}")
    _say(args, result.table())
    if not result.in_order:
        raise RuntimeError("pipeline returned chunks out of order")
    return [Path(args.config)] if args.config else []


# --- complexity -----------------------------------------------------------

def cmd_complexity(args, out: Path) -> list:
    spec = _resolve_spec(args.spec)
    params, macs = count_params(spec), count_macs(spec)
    ref = REFERENCE_SELD if spec.output == OutputContract.ACCDOA_2D else REFERENCE_ASC
    (out / "complexity.csv").write_text(
        "network,params,macs,reference_params,reference_macs\n"
        f"{Path(args.spec).stem},{params},{macs},{int(ref['params_k'] * 1000)},{int(round(ref['macs_m'] * 1e6))}\n")
    print(f"seed={args.seed}")
    print(f"params: {params / 1e3:.1f} K (reference {ref['params_k']} K)")
    print(f"MACs:   {macs / 1e6:.1f} M (reference {ref['macs_m']} M)")
    return [Path(args.spec)] if Path(args.spec).exists() else []


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (integer, default 0)")
    common.add_argument("--config", metavar="FILE", help="key=value config file (path)")
    common.add_argument("--out", metavar="DIR", help="output directory (path, default runs/<subcommand>)")
    common.add_argument("--quiet", action="store_true", help="machine mode: suppress tables")

    parser = _Parser(prog="seld-edge", description="Scene-conditioned sound event localization and detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    def theta(p):
        p.add_argument("--theta-max", type=float, default=THETA_MAX,
                       help=f"angular match threshold (degrees, default {THETA_MAX})")

    def decode_opts(p):
        p.add_argument("--chunk-s", type=float, default=1.0, help="duration of each ACCDOA tensor (seconds)")
        p.add_argument("--gap", type=int, default=0, help="inactive frames bridged inside one event (frames)")
        p.add_argument("--min-frames", type=int, default=1, help="shortest kept event (frames)")

    def models(p):
        p.add_argument("--seld-stub", metavar="RULES", help="scripted SELD model rules (text, or @file)")
        p.add_argument("--asc-stub", metavar="RULES", help="scripted scene model rules (text, or @file)")

    p = add("synth", cmd_synth, "Synthesize a spatial audio corpus and its manifest.")
    p.add_argument("--n-train", type=int, help="training clips (count)")
    p.add_argument("--n-test", type=int, help="test clips (count)")
    p.add_argument("--event-pool", metavar="DIR", help="event WAVs as <DIR>/<Class>/*.wav (path)")
    p.add_argument("--background-pool", metavar="DIR", help="background WAVs as <DIR>/<Scene>/*.wav (path)")
    p.add_argument("--rir-dir", metavar="DIR", help="measured impulse responses, one WAV per azimuth (path)")
    p.add_argument("--workers", type=int, help="parallel clip renderers (threads, capped by SELD_EDGE_THREADS)")
    p.add_argument("--manifest-only", action="store_true", help="write labels without rendering audio")

    p = add("features", cmd_features, "Extract SALSA-Lite and log-mel features.")
    p.add_argument("--corpus", metavar="DIR", help="corpus directory containing manifest.csv (path)")
    p.add_argument("--split", choices=("train", "test", "all"), default="all", help="corpus split (name)")
    p.add_argument("--wav", nargs="*", default=[], metavar="FILE", help="4-channel 24 kHz WAV files (paths)")
    p.add_argument("--workers", type=int, default=1, help="parallel extractors (threads, capped by SELD_EDGE_THREADS)")

    p = add("infer", cmd_infer, "Run the SELD and scene networks over feature files.")
    p.add_argument("--features", metavar="DIR", required=True, help="directory of .ftns feature files (path)")
    p.add_argument("--seld-spec", metavar="FILE", help="SELD network description (path or built-in name)")
    p.add_argument("--seld-weights", metavar="FILE", help="SELD weight file (path)")
    p.add_argument("--asc-spec", metavar="FILE", help="scene network description (path or built-in name)")
    p.add_argument("--asc-weights", metavar="FILE", help="scene weight file (path)")
    models(p)

    p = add("decode", cmd_decode, "Threshold ACCDOA outputs into events.")
    p.add_argument("--accdoa", metavar="DIR", required=True, help="directory of .accdoa.ftns files (path)")
    p.add_argument("--thresholds", metavar="JSON", help="threshold matrix (path, default 0.5 everywhere)")
    p.add_argument("--scene-source", choices=("asc", "oracle", "none"), default="asc",
                   help="scene used to pick thresholds (none = global threshold)")
    p.add_argument("--manifest", metavar="CSV", help="ground truth for --scene-source oracle (path)")
    decode_opts(p)

    p = add("tune", cmd_tune, "Grid-search per-scene, per-class thresholds.")
    p.add_argument("--accdoa", metavar="DIR", required=True, help="directory of .accdoa.ftns files (path)")
    p.add_argument("--manifest", metavar="CSV", required=True, help="ground-truth manifest (path)")
    p.add_argument("--split", choices=("train", "test", "all"), default="train", help="manifest split (name)")
    p.add_argument("--grid", help="threshold grid, lo:hi:step or comma list (activity, default 0.3:0.8:0.05)")
    theta(p)
    decode_opts(p)

    p = add("eval", cmd_eval, "Score predictions with the location-dependent F-score.")
    p.add_argument("--preds", metavar="CSV", required=True, help="predictions from decode (path)")
    p.add_argument("--manifest", metavar="CSV", required=True, help="ground-truth manifest (path)")
    p.add_argument("--split", choices=("train", "test", "all"), default="all", help="manifest split (name)")
    p.add_argument("--granularity", choices=("event", "frame"), default="event", help="matching unit")
    p.add_argument("--frame-hop-s", type=float, default=0.1, help="frame length for frame granularity (seconds)")
    theta(p)

    p = add("stream", cmd_stream, "Run the three-thread streaming pipeline over audio.")
    p.add_argument("--corpus", metavar="DIR", help="corpus directory containing manifest.csv (path)")
    p.add_argument("--split", choices=("train", "test", "all"), default="test", help="corpus split (name)")
    p.add_argument("--wav", nargs="*", default=[], metavar="FILE", help="4-channel WAV files (paths)")
    p.add_argument("--thresholds", metavar="JSON", help="threshold matrix (path)")
    p.add_argument("--scene-policy", choices=("latest", "sync"), help="scene hand-off between threads")
    p.add_argument("--live", action="store_true", help="pace input in real time and drop chunks on overload")
    p.add_argument("--period-s", type=float, default=1.0, help="live chunk period (seconds)")
    p.add_argument("--max-chunks", type=int, help="stop after this many chunks (count)")
    models(p)

    p = add("bench", cmd_bench, "Time every pipeline stage over synthetic chunks.")
    p.add_argument("--n", type=int, default=1000, help="chunks to push through (count of 1 s chunks)")
    p.add_argument("--open-loop", action="store_true", help="feed chunks without waiting for results")
    p.add_argument("--thresholds", metavar="JSON", help="threshold matrix (path)")
    p.add_argument("--scene-policy", choices=("latest", "sync"), help="scene hand-off between threads")
    models(p)

    p = add("complexity", cmd_complexity, "Count parameters and multiply-accumulates of a network.")
    p.add_argument("--spec", metavar="FILE", required=True, help="network description (path or built-in name)")
    return parser


def _fail(err: CliError) -> int:
    print(json.dumps({"error": err.kind, "exit_code": err.code, "message": str(err)}), file=sys.stderr)
    return err.code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as err:
        return _fail(err)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    out = Path(args.out) if args.out else Path("runs") / args.command
    try:
        out.mkdir(parents=True, exist_ok=True)
        inputs = args.func(args, out)
        _write_run_manifest(args, out, inputs)
    except CliError as err:
        return _fail(err)
    except FileNotFoundError as exc:
        return _fail(CliError(EXIT_MISSING, "missing_file", str(exc)))
    except (ValueError, KeyError, struct.error, UnicodeDecodeError) as exc:
        return _fail(CliError(EXIT_FORMAT, "format", str(exc)))
    except Exception as exc:  # noqa: BLE001
        return _fail(CliError(EXIT_FAILURE, "failure", f"{type(exc).__name__}: {exc}"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
