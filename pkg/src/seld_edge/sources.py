"""Procedural stand-ins for the anechoic event and background-scene pools.

Each generator is a pure function of its ``numpy.random.Generator`` so corpus
builds stay reproducible.
"""
from __future__ import annotations

import numpy as np
from scipy import signal

from .taxonomy import EventClassId, SceneId


def _envelope(n, attack, release):
    env = np.ones(n)
    a = max(1, min(n // 2, attack))
    r = max(1, min(n // 2, release))
    env[:a] = np.linspace(0.0, 1.0, a)
    env[n - r :] = np.linspace(1.0, 0.0, r)
    return env


def _tone(freqs, n, sr, phase0=None):
    t = np.arange(n) / sr
    freqs = np.atleast_1d(freqs)
    phase0 = np.zeros(len(freqs)) if phase0 is None else phase0
    return sum(np.sin(2 * np.pi * f * t + p) / (k + 1) for k, (f, p) in enumerate(zip(freqs, phase0)))


def _bandnoise(rng, n, sr, lo, hi, order=4):
    sos = signal.butter(order, [lo, hi], btype="bandpass", fs=sr, output="sos")
    return signal.sosfilt(sos, rng.standard_normal(n))


def bicycle(rng, n, sr):
    # bell: inharmonic partials with exponential ring-down, repeated strikes
    t = np.arange(n) / sr
    f0 = rng.uniform(2500, 3500)
    out = np.zeros(n)
    strikes = rng.integers(1, 4)
    for k in range(strikes):
        start = int(k * n / strikes)
        tt = t[: n - start]
        ring = sum(np.sin(2 * np.pi * f0 * m * tt) * a for m, a in ((1.0, 1.0), (1.48, 0.5), (2.1, 0.3)))
        out[start:] += ring * np.exp(-tt * 12.0)
    return out


def car_horn(rng, n, sr):
    f0 = rng.uniform(380, 460)
    harm = [f0 * k for k in range(1, 7)] + [f0 * 1.25 * k for k in range(1, 5)]
    return _tone(harm, n, sr, rng.uniform(0, 2 * np.pi, len(harm))) * _envelope(n, sr // 100, sr // 50)


def crying(rng, n, sr):
    t = np.arange(n) / sr
    f0 = rng.uniform(350, 500)
    vib = f0 * (1 + 0.04 * np.sin(2 * np.pi * rng.uniform(4, 7) * t) - 0.15 * t / max(t[-1], 1e-9))
    phase = 2 * np.pi * np.cumsum(vib) / sr
    x = sum(np.sin(k * phase) / k for k in range(1, 6))
    return x * _envelope(n, sr // 20, sr // 10)


def dog(rng, n, sr):
    out = np.zeros(n)
    n_barks = rng.integers(1, 4)
    bark = min(n, int(0.12 * sr))
    for k in range(n_barks):
        start = int(k * n / n_barks)
        m = min(bark, n - start)
        if m <= 0:
            break
        tt = np.arange(m) / sr
        f0 = rng.uniform(300, 600)
        burst = np.sin(2 * np.pi * f0 * tt * (1 - 0.5 * tt / max(tt[-1], 1e-9))) + 0.5 * _bandnoise(rng, m, sr, 400, 2000)
        out[start : start + m] += burst * np.exp(-tt * 25.0)
    return out


def door_knock(rng, n, sr):
    out = np.zeros(n)
    n_knocks = rng.integers(2, 5)
    spacing = n // (n_knocks + 1)
    click = min(n, int(0.04 * sr))
    for k in range(n_knocks):
        start = (k + 1) * spacing - click // 2
        start = max(0, min(n - click, start))
        tt = np.arange(click) / sr
        out[start : start + click] += _bandnoise(rng, click, sr, 100, 1500) * np.exp(-tt * 120.0)
    return out


def siren(rng, n, sr):
    t = np.arange(n) / sr
    lo, hi = rng.uniform(550, 700), rng.uniform(1100, 1400)
    rate = rng.uniform(0.8, 3.0)
    freq = lo + (hi - lo) * 0.5 * (1 + np.sin(2 * np.pi * rate * t))
    phase = 2 * np.pi * np.cumsum(freq) / sr
    return (np.sin(phase) + 0.3 * np.sin(2 * phase)) * _envelope(n, sr // 50, sr // 50)


EVENT_GENERATORS = {
    EventClassId.Bicycle: bicycle,
    EventClassId.CarHorn: car_horn,
    EventClassId.Crying: crying,
    EventClassId.Dog: dog,
    EventClassId.DoorKnock: door_knock,
    EventClassId.Siren: siren,
}


def event_length(rng: np.random.Generator, sr: int) -> int:
    """First draw of :func:`make_event`: duration uniform in [0.2, 0.8] s, in samples."""
    return max(1, int(round(rng.uniform(0.2, 0.8) * sr)))


def make_event(cls: EventClassId, rng: np.random.Generator, sr: int, duration_s=None) -> np.ndarray:
    """Mono event, peak-normalized to 0.5. Duration drawn from [0.2, 0.8] s if not given."""
    n = event_length(rng, sr) if duration_s is None else max(1, int(round(duration_s * sr)))
    x = EVENT_GENERATORS[EventClassId(cls)](rng, n, sr)
    peak = np.max(np.abs(x))
    return x * (0.5 / peak) if peak > 0 else x


def make_background(scene: SceneId, rng: np.random.Generator, sr: int, duration_s=1.0) -> np.ndarray:
    """Mono scene ambience at roughly -30 dBFS RMS."""
    n = int(round(duration_s * sr))
    scene = SceneId(scene)
    if scene is SceneId.Indoor:
        x = _bandnoise(rng, n, sr, 80, 3000, order=2)
        x += 0.2 * np.std(x) * _tone([50.0, 100.0, 150.0], n, sr, rng.uniform(0, 2 * np.pi, 3))
    elif scene is SceneId.Nature:
        x = _bandnoise(rng, n, sr, 200, 8000, order=2)
        gust = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) * np.arange(n) / sr + rng.uniform(0, 6.28))
        x = x * gust
        for _ in range(rng.integers(0, 4)):
            m = int(0.05 * sr)
            s = rng.integers(0, max(1, n - m))
            tt = np.arange(m) / sr
            x[s : s + m] += np.std(x) * np.sin(2 * np.pi * rng.uniform(3000, 6000) * tt * (1 + 2 * tt)) * np.hanning(m)
    else:
        brown = np.cumsum(rng.standard_normal(n))
        brown -= np.linspace(brown[0], brown[-1], n)
        x = brown / (np.std(brown) + 1e-12) + 0.5 * _bandnoise(rng, n, sr, 50, 1000, order=2) / 0.3
    x = x - np.mean(x)
    return x * (0.0316 / (np.sqrt(np.mean(x * x)) + 1e-12))
