"""Minimal WAV loading: stdlib ``wave`` for PCM files, mono mixdown,
linear resampling to the codec's expected rate."""

from __future__ import annotations

import wave

import numpy as np

_PCM_SCALE = {1: 127.0, 2: 32767.0, 4: 2147483647.0}
_PCM_DTYPE = {1: np.uint8, 2: np.int16, 4: np.int32}


def load_wav(path: str) -> tuple[np.ndarray, int]:
    """(float64 mono samples in [-1, 1], sample rate)."""
    with wave.open(path, "rb") as wf:
        n_channels = wf.getnchannels()
        width = wf.getsampwidth()
        rate = wf.getframerate()
        n_frames = wf.getnframes()
        raw = wf.readframes(n_frames)
    if width not in _PCM_DTYPE:
        raise ValueError(f"{path}: unsupported sample width {width}")
    data = np.frombuffer(raw, dtype=_PCM_DTYPE[width]).astype(np.float64)
    if width == 1:  # 8-bit WAV is unsigned
        data -= 128.0
    data /= _PCM_SCALE[width]
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    if data.size == 0:
        raise ValueError(f"{path}: empty audio")
    return data, rate


def resample(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    """Linear-interpolation resampling; adequate for feature extraction."""
    if rate == target_rate:
        return samples
    duration = samples.size / rate
    n_out = max(1, int(round(duration * target_rate)))
    t_out = np.arange(n_out) / target_rate
    t_in = np.arange(samples.size) / rate
    return np.interp(t_out, t_in, samples)
