"""Multi-channel audio carrier and float32 WAV I/O."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

DATASET_SR = 24000


@dataclass(frozen=True)
class AudioClip:
    """``samples`` is (channels, length), unit-scale floats."""

    samples: np.ndarray
    sample_rate: int = DATASET_SR

    def __post_init__(self):
        x = np.asarray(self.samples)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise ValueError(f"samples must be (channels, length), got shape {x.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate

    def channel(self, idx: int) -> "AudioClip":
        return AudioClip(self.samples[idx : idx + 1], self.sample_rate)


def write_wav(path, clip: AudioClip) -> None:
    """Write 32-bit float little-endian RIFF WAV."""
    data = np.ascontiguousarray(clip.samples.T.astype("<f4"))
    wavfile.write(str(path), clip.sample_rate, data)


def read_wav(path) -> AudioClip:
    sr, data = wavfile.read(str(path))
    data = np.asarray(data)
    if data.dtype.kind == "i":
        data = data.astype(np.float64) / float(np.iinfo(data.dtype).max + 1)
    elif data.dtype.kind == "u":
        data = (data.astype(np.float64) - 128.0) / 128.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[:, None]
    return AudioClip(data.T.copy(), int(sr))


def rms(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(x * x)))


def list_wavs(folder) -> list[Path]:
    return sorted(p for p in Path(folder).iterdir() if p.suffix.lower() == ".wav")
