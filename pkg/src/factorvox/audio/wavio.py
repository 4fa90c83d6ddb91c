import os

import numpy as np
from scipy.io import wavfile


def writeWav(path: str, wave, sampleRate: int = 16000):
    """Write mono PCM16; samples are clipped to [-1, 1]."""
    wave = np.asarray(wave, dtype=np.float64).reshape(-1)
    pcm = np.round(np.clip(wave, -1.0, 1.0) * 32767.0).astype(np.int16)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    wavfile.write(path, sampleRate, pcm)


def readWav(path: str, expectedRate: int | None = None) -> tuple:
    """Read a WAV file as float32 mono in [-1, 1]; returns (wave, sampleRate)."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"audio file not found: {path}")
    sampleRate, data = wavfile.read(path)
    if expectedRate is not None and sampleRate != expectedRate:
        raise ValueError(f"{path}: sample rate {sampleRate} Hz, expected {expectedRate} Hz")
    if data.ndim > 1:
        data = data.mean(axis=1)
    if np.issubdtype(data.dtype, np.integer):
        scale = float(np.iinfo(data.dtype).max)
        wave = data.astype(np.float64) / scale
    else:
        wave = data.astype(np.float64)
    return wave.astype(np.float32), sampleRate
