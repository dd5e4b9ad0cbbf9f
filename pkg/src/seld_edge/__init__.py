"""Scene-conditioned sound event localization and detection for headphone arrays.

Submodules: ``corpus`` (spatial dataset synthesis), ``features`` (SALSA-Lite,
log-mel, FTNS files), ``nn`` (forward-pass engine), ``accdoa`` (decoding and
threshold tuning), ``metrics`` (location-dependent F-score), ``pipeline``
(streaming runtime) and ``cli``.
"""
from .accdoa import AccdoaFrameSeq, DetectionEvent, ThresholdMatrix, decode, tune_thresholds
from .audio import AudioClip, read_wav, write_wav
from .corpus import (ClipRecord, CorpusConfig, CorpusManifest, SpatialEventLabel, build_corpus,
                     synthesize_clip)
from .features import FeatureTensor, Layout, log_mel, read_features, salsa_lite, stft, write_features
from .metrics import EvalReport, evaluate_corpus, match_clip
from .pipeline import PipelineConfig, StreamingPipeline, benchmark, run_stream
from .rir import RirBank, load_rir_bank, procedural_rir_bank
from .taxonomy import DEFAULT_POLICY, EventClassId, SceneId

__version__ = "0.1.0"

__all__ = [
    "AccdoaFrameSeq", "AudioClip", "ClipRecord", "CorpusConfig", "CorpusManifest", "DEFAULT_POLICY",
    "DetectionEvent", "EvalReport", "EventClassId", "FeatureTensor", "Layout", "PipelineConfig", "RirBank",
    "SceneId", "SpatialEventLabel", "StreamingPipeline", "ThresholdMatrix", "benchmark", "build_corpus",
    "decode", "evaluate_corpus", "load_rir_bank", "log_mel", "match_clip", "procedural_rir_bank",
    "read_features", "read_wav", "run_stream", "salsa_lite", "stft", "synthesize_clip", "tune_thresholds",
    "write_features", "write_wav",
]
