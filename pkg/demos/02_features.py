"""
SALSA-Lite and log-mel features
===============================

The SELD branch sees four log-power spectrograms and three normalized phase
differences; the scene branch sees a single-channel log-mel spectrogram.
"""
import numpy as np

from seld_edge.audio import AudioClip
from seld_edge.features import decode_features, encode_features, log_mel, salsa_lite

sr = 24000
t = np.arange(sr) / sr

# a 500 Hz tone that reaches channels 1-3 later than channel 0, by 5 cm of path
delay = 0.05 / 343.0
x = np.zeros((4, sr))
x[0] = np.cos(2 * np.pi * 500 * t)
x[1:] = np.cos(2 * np.pi * 500 * (t - delay))

ft = salsa_lite(AudioClip(x, sr))
print("SALSA-Lite", ft.shape, ft.layout.name)
k = int(round(500 * 512 / sr))  # nearest bin
print(f"NIPD at bin {k} ({k * sr / 512:.0f} Hz), middle frame: {ft.data[4:, 40, k].round(4)} m")
print("NIPD above 1 kHz is zeroed:", bool(np.all(ft.data[4:, :, 22:] == 0)))

mel = log_mel(AudioClip(x[:1], sr))
print("\nlog-mel", mel.shape, "range", mel.data.min().round(2), mel.data.max().round(2))
print("loudest band:", int(np.argmax(mel.data[0].mean(axis=0))))

# features round-trip through the binary tensor format without loss
blob = encode_features(ft)
back = decode_features(blob)
print(f"\nencoded {len(blob)} bytes, round trip exact: {np.array_equal(back.data, ft.data)}")
