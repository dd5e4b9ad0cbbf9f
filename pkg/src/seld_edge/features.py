"""STFT, log-mel (scene branch) and SALSA-Lite (event branch) features."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from .audio import AudioClip

POWER_FLOOR = 1e-10
LOG_FLOOR = float(np.log10(POWER_FLOOR))


class Layout(IntEnum):
    ASC_LOGMEL = 0
    SELD_SALSA_LITE = 1
    ACCDOA = 2
    SCENE_LOGITS = 3


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    win_size: int = 512
    hop: int = 300
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        if self.win_size > self.fft_size:
            raise ValueError("win_size must not exceed fft_size")
        if self.hop <= 0:
            raise ValueError("hop must be positive")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


SELD_STFT = StftConfig(512, 512, 300)
ASC_STFT = StftConfig(4096, 4096, 800)


@dataclass(frozen=True)
class SalsaLiteConfig:
    ref_channel: int = 0
    speed_of_sound: float = 343.0
    mic_spacing: float = 0.18
    f_alias: float = 1000.0
    # keep bins [0, max_bin); None keeps all fft_size/2 + 1 bins
    max_bin: int | None = None

    def __post_init__(self):
        nominal = self.speed_of_sound / (2 * self.mic_spacing)
        if abs(self.f_alias - nominal) > 0.05 * nominal:
            raise ValueError(f"f_alias {self.f_alias} Hz is not within 5% of c/(2d) = {nominal:.1f} Hz")


@dataclass(frozen=True)
class FeatureTensor:
    layout: Layout
    data: np.ndarray  # (channels, frames, bins)
    frame_hop_s: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise ValueError(f"feature data must be 3-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature data contains non-finite values")
        object.__setattr__(self, "layout", Layout(self.layout))
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape


def stft(clip: AudioClip, cfg: StftConfig = SELD_STFT) -> np.ndarray:
    """Complex STFT of every channel, shape (channels, ceil(len/hop), fft_size//2+1).

    Frame t is centred on sample t*hop (reflect padding at the edges).
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    n = x.shape[1]
    if n < 1:
        raise ValueError("empty clip")
    n_frames = -(-n // cfg.hop)
    half = cfg.fft_size // 2
    if cfg.center:
        mode = "reflect" if n > 1 else "constant"
        padded = np.pad(x, ((0, 0), (half, half)), mode=mode)
    else:
        padded = x
    need = (n_frames - 1) * cfg.hop + cfg.fft_size
    if padded.shape[1] < need:
        padded = np.pad(padded, ((0, 0), (0, need - padded.shape[1])))
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.fft_size, axis=1)[:, :: cfg.hop][:, :n_frames]
    win = np.zeros(cfg.fft_size)
    start = (cfg.fft_size - cfg.win_size) // 2
    win[start : start + cfg.win_size] = get_window(cfg.window, cfg.win_size, fftbins=True)
    return np.fft.rfft(frames * win, axis=-1)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, fft_size: int, n_mels: int, fmin: float = 0.0, fmax: float | None = None):
    """Triangular HTK-scale filters, each normalized to unit area in Hz. Shape (n_mels, fft_size//2+1)."""
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(up, down))
    return fb * (2.0 / (hi - lo))


_MEL_CACHE: dict = {}


def log_mel(clip: AudioClip, n_mels: int = 256, win: int = 4096, hop: int = 800) -> FeatureTensor:
    """Log10 mel power of a mono clip, shape (1, frames, n_mels)."""
    if clip.n_channels != 1:
        raise ValueError(f"log_mel expects a mono clip, got {clip.n_channels} channels (use channel 0)")
    cfg = StftConfig(win, win, hop)
    key = (clip.sample_rate, win, n_mels)
    fb = _MEL_CACHE.get(key)
    if fb is None:
        fb = _MEL_CACHE.setdefault(key, mel_filterbank(clip.sample_rate, win, n_mels))
    spec = stft(clip, cfg)[0]
    power = spec.real**2 + spec.imag**2
    mel = power @ fb.T
    return FeatureTensor(Layout.ASC_LOGMEL, np.log10(np.maximum(mel, POWER_FLOOR))[None], hop / clip.sample_rate)


def salsa_lite(clip: AudioClip, cfg: SalsaLiteConfig = SalsaLiteConfig(),
               stft_cfg: StftConfig = SELD_STFT) -> FeatureTensor:
    """Four log-power spectrograms followed by three normalized inter-channel
    phase differences against the reference mic, shape (7, frames, bins).

    The phase difference is expressed as a path-length difference in metres,
    positive when the sound reaches mic m after the reference. It is zeroed
    at DC and above ``f_alias``.
    """
    if clip.n_channels != 4:
        raise ValueError(f"SALSA-Lite needs 4 channels, got {clip.n_channels}")
    spec = stft(clip, stft_cfg)
    if cfg.max_bin is not None:
        spec = spec[..., : cfg.max_bin]
    power = spec.real**2 + spec.imag**2
    logpow = np.log10(np.maximum(power, POWER_FLOOR))

    freqs = np.arange(spec.shape[-1]) * clip.sample_rate / stft_cfg.fft_size
    valid = (freqs > 0) & (freqs <= cfg.f_alias)
    scale = np.zeros_like(freqs)
    scale[valid] = -cfg.speed_of_sound / (2 * np.pi * freqs[valid])
    ref = spec[cfg.ref_channel]
    others = [m for m in range(4) if m != cfg.ref_channel]
    other = spec[others]
    # arg(conj(X_ref) * X_m) from real parts so identical channels give exactly 0
    cross_re = ref.real * other.real + ref.imag * other.imag
    cross_im = ref.real * other.imag - ref.imag * other.real
    nipd = np.arctan2(cross_im, cross_re) * scale
    return FeatureTensor(Layout.SELD_SALSA_LITE, np.concatenate([logpow, nipd], axis=0),
                         stft_cfg.hop / clip.sample_rate)


# --- FTNS container -------------------------------------------------------

FTNS_MAGIC = b"FTNS"
FTNS_VERSION = 1
_HEADER = struct.Struct("<4sIB3I")

DEFAULT_HOP_S = {
    Layout.ASC_LOGMEL: 800 / 24000,
    Layout.SELD_SALSA_LITE: 300 / 24000,
}


def encode_features(ft: FeatureTensor) -> bytes:
    dims = ft.data.shape
    return _HEADER.pack(FTNS_MAGIC, FTNS_VERSION, int(ft.layout), *dims) + \
        np.ascontiguousarray(ft.data, dtype="<f4").tobytes()


def decode_features(blob: bytes, frame_hop_s: float | None = None) -> FeatureTensor:
    """Parse an FTNS blob. Frame hop is not stored; it defaults per layout, or
    to 1/frames (a 1 s chunk) for network outputs."""
    if len(blob) < _HEADER.size:
        raise ValueError("FTNS blob shorter than its header")
    magic, version, tag, d0, d1, d2 = _HEADER.unpack_from(blob)
    if magic != FTNS_MAGIC:
        raise ValueError(f"bad FTNS magic {magic!r}")
    if version != FTNS_VERSION:
        raise ValueError(f"unsupported FTNS version {version}")
    layout = Layout(tag)
    expected = _HEADER.size + 4 * d0 * d1 * d2
    if len(blob) != expected:
        raise ValueError(f"FTNS payload size mismatch: {len(blob)} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(d0, d1, d2).astype(np.float32)
    if frame_hop_s is None:
        frame_hop_s = DEFAULT_HOP_S.get(layout, 1.0 / max(d1, 1))
    return FeatureTensor(layout, data, frame_hop_s)


def write_features(path, ft: FeatureTensor) -> None:
    Path(path).write_bytes(encode_features(ft))


def read_features(path, frame_hop_s: float | None = None) -> FeatureTensor:
    return decode_features(Path(path).read_bytes(), frame_hop_s)
