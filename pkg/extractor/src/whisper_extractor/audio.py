"""Audio loading and the Whisper front end.

WAV files are decoded with scipy, mixed down to mono, and resampled to
16 kHz. The log-Mel front end pads or truncates to 30 seconds and returns
the 80x3000 spectrogram the encoder expects.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

TARGET_RATE = 16_000

_INT_SCALES = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
    np.dtype(np.uint8): 128.0,
}


def load_audio(path) -> np.ndarray:
    """Decode a WAV file to mono float32 at 16 kHz."""
    rate, data = wavfile.read(path)
    if data.dtype in _INT_SCALES:
        scale = _INT_SCALES[data.dtype]
        offset = scale if data.dtype == np.dtype(np.uint8) else 0.0
        data = (data.astype(np.float32) - offset) / scale
    else:
        data = data.astype(np.float32)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if rate != TARGET_RATE:
        g = math.gcd(int(rate), TARGET_RATE)
        data = resample_poly(data, TARGET_RATE // g, rate // g).astype(np.float32)
    return np.ascontiguousarray(data, dtype=np.float32)


@lru_cache(maxsize=1)
def _feature_extractor():
    from transformers import WhisperFeatureExtractor

    return WhisperFeatureExtractor()


def log_mel(audio: np.ndarray) -> np.ndarray:
    """80x3000 log-Mel spectrogram; input is padded/truncated to 30 s."""
    fx = _feature_extractor()
    out = fx(audio, sampling_rate=TARGET_RATE, return_tensors="np")
    return out.input_features[0]
