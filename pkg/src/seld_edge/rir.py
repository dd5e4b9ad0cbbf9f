"""Four-microphone RIR banks on a 15 degree azimuth grid."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, list_wavs, read_wav, write_wav
from .taxonomy import AZIMUTH_STEP_DEG, N_AZIMUTHS

SPEED_OF_SOUND = 343.0
HEAD_SPACING = 0.18

# x forward, y left (metres). Front/rear pair on each ear cup; the diagonal
# pairs span exactly HEAD_SPACING.
_HALF_FB = 0.015
_HALF_LR = float(np.sqrt(HEAD_SPACING**2 - (2 * _HALF_FB) ** 2) / 2)
MIC_POSITIONS = np.array(
    [
        [_HALF_FB, _HALF_LR],
        [-_HALF_FB, _HALF_LR],
        [_HALF_FB, -_HALF_LR],
        [-_HALF_FB, -_HALF_LR],
    ]
)


@dataclass(frozen=True)
class RirBank:
    """``irs`` has shape (24, 4, taps); entry k is the response for azimuth 15*k."""

    irs: np.ndarray
    sample_rate: int

    def __post_init__(self):
        irs = np.asarray(self.irs, dtype=np.float64)
        if irs.ndim != 3 or irs.shape[0] != N_AZIMUTHS:
            raise ValueError(f"RIR bank needs shape ({N_AZIMUTHS}, channels, taps), got {irs.shape}")
        if irs.shape[1] != 4:
            raise ValueError(f"RIR bank must be 4-channel, got {irs.shape[1]}")
        object.__setattr__(self, "irs", irs)

    def __len__(self):
        return N_AZIMUTHS

    def __getitem__(self, k: int) -> np.ndarray:
        return self.irs[k]

    @staticmethod
    def azimuth_deg(k: int) -> int:
        return AZIMUTH_STEP_DEG * int(k)


def _frac_delay_kernel(delay, taps):
    n = np.arange(taps)
    h = np.sinc(n - delay)
    # Hann taper centred on the delay keeps the kernel compact
    w = 0.5 * (1 + np.cos(np.pi * np.clip((n - delay) / (taps / 2), -1, 1)))
    return h * w


def procedural_rir_bank(sample_rate: int = 24000, seed: int = 0, tail_s: float = 0.12,
                        tail_db: float = -18.0, rt60_s: float = 0.25) -> RirBank:
    """Direct path with per-mic fractional delay and mild head shadowing, plus a
    decaying diffuse tail that is independent per channel."""
    rng = np.random.default_rng(seed)
    base_delay = 32.0
    direct_taps = 96
    tail_len = int(round(tail_s * sample_rate))
    taps = direct_taps + tail_len
    irs = np.zeros((N_AZIMUTHS, 4, taps))
    mic_dirs = MIC_POSITIONS / np.linalg.norm(MIC_POSITIONS, axis=1, keepdims=True)
    decay = np.exp(-6.91 * np.arange(tail_len) / (rt60_s * sample_rate))
    for k in range(N_AZIMUTHS):
        theta = np.deg2rad(AZIMUTH_STEP_DEG * k)
        u = np.array([np.cos(theta), np.sin(theta)])
        for m in range(4):
            lead = MIC_POSITIONS[m] @ u / SPEED_OF_SOUND * sample_rate
            gain = 0.85 + 0.15 * float(mic_dirs[m] @ u)
            irs[k, m, :direct_taps] = gain * _frac_delay_kernel(base_delay - lead, direct_taps)
            tail = rng.standard_normal(tail_len) * decay
            tail *= 10 ** (tail_db / 20) / (np.sqrt(np.sum(tail**2)) + 1e-12)
            irs[k, m, direct_taps - 16 : direct_taps - 16 + tail_len] += tail
    return RirBank(irs, sample_rate)


_DEG_RE = re.compile(r"(\d+)(?!.*\d)")


def load_rir_bank(folder) -> RirBank:
    """Load 24 four-channel WAVs whose stems end in the azimuth in degrees
    (``rir_az015.wav`` and the like)."""
    by_deg = {}
    sr = None
    for path in list_wavs(folder):
        m = _DEG_RE.search(path.stem)
        if not m:
            continue
        deg = int(m.group(1))
        if deg % AZIMUTH_STEP_DEG or not 0 <= deg < 360:
            raise ValueError(f"{path.name}: azimuth {deg} is not on the {AZIMUTH_STEP_DEG} degree grid")
        clip = read_wav(path)
        if sr is None:
            sr = clip.sample_rate
        elif clip.sample_rate != sr:
            raise ValueError(f"{path.name}: sample rate {clip.sample_rate} != {sr}")
        by_deg[deg] = clip.samples
    missing = [d for d in range(0, 360, AZIMUTH_STEP_DEG) if d not in by_deg]
    if missing:
        raise ValueError(f"RIR bank in {folder} is missing azimuths {missing}")
    taps = max(v.shape[1] for v in by_deg.values())
    irs = np.zeros((N_AZIMUTHS, 4, taps))
    for deg, x in by_deg.items():
        if x.shape[0] != 4:
            raise ValueError(f"RIR for {deg} deg has {x.shape[0]} channels, expected 4")
        irs[deg // AZIMUTH_STEP_DEG, :, : x.shape[1]] = x
    return RirBank(irs, sr)


def save_rir_bank(bank: RirBank, folder) -> None:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    for k in range(N_AZIMUTHS):
        write_wav(folder / f"rir_az{bank.azimuth_deg(k):03d}.wav", AudioClip(bank[k], bank.sample_rate))
