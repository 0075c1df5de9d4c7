"""Audio decoding and log-Mel front end."""

import numpy as np
import pytest
from scipy.io import wavfile

from whisper_extractor.audio import TARGET_RATE, load_audio, log_mel


def write_wav(path, seconds, rate=22050, stereo=False, freq=440.0):
    t = np.arange(int(seconds * rate)) / rate
    wave = (0.4 * np.sin(2 * np.pi * freq * t)).astype(np.float32)
    if stereo:
        wave = np.stack([wave, 0.5 * wave], axis=1)
    wavfile.write(path, rate, (wave * 32767).astype(np.int16))
    return path


class TestLoadAudio:
    def test_resamples_to_16k_mono(self, tmp_path):
        path = write_wav(tmp_path / "a.wav", seconds=2.0, rate=22050, stereo=True)
        audio = load_audio(path)
        assert audio.dtype == np.float32
        assert audio.ndim == 1
        assert abs(len(audio) - 2 * TARGET_RATE) <= 2

    def test_native_rate_passthrough_length(self, tmp_path):
        path = write_wav(tmp_path / "b.wav", seconds=1.0, rate=16000)
        audio = load_audio(path)
        assert len(audio) == TARGET_RATE

    def test_amplitude_scaled_to_unit_range(self, tmp_path):
        path = write_wav(tmp_path / "c.wav", seconds=0.5, rate=16000)
        audio = load_audio(path)
        assert np.abs(audio).max() <= 1.0
        assert np.abs(audio).max() > 0.3

    def test_undecodable_file_raises(self, tmp_path):
        path = tmp_path / "not_audio.wav"
        path.write_bytes(b"this is not a wav file")
        with pytest.raises(Exception):
            load_audio(path)


class TestLogMel:
    def test_short_clip_padded_to_30s_grid(self, tmp_path):
        audio = load_audio(write_wav(tmp_path / "short.wav", seconds=2.0))
        mel = log_mel(audio)
        assert mel.shape == (80, 3000)

    def test_long_clip_truncated_to_30s_grid(self, tmp_path):
        audio = load_audio(write_wav(tmp_path / "long.wav", seconds=35.0))
        mel = log_mel(audio)
        assert mel.shape == (80, 3000)

    def test_deterministic(self, tmp_path):
        audio = load_audio(write_wav(tmp_path / "d.wav", seconds=1.0))
        np.testing.assert_array_equal(log_mel(audio), log_mel(audio))
