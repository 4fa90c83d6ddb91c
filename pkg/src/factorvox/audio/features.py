"""Acoustic features: differentiable log-mel spectra for losses, and numpy
trackers for per-frame F0 and energy used as targets and evaluation inputs."""

import numpy as np
from librosa.filters import mel as librosa_mel_fn
from scipy import signal as scisignal

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, ShapeError

melBasisCache = {}
stftKernelCache = {}


def melBasis(sampleRate: int, nFft: int, numMels: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    key = (sampleRate, nFft, numMels, fmin, fmax)
    if key not in melBasisCache:
        melBasisCache[key] = librosa_mel_fn(sr=sampleRate, n_fft=nFft, n_mels=numMels, fmin=fmin, fmax=fmax)
    return melBasisCache[key]


def stftKernels(nFft: int) -> tuple:
    """Hann-windowed DFT basis as conv weights, each [nFft // 2 + 1, 1, nFft]."""
    if nFft not in stftKernelCache:
        window = scisignal.get_window("hann", nFft)
        bins = np.arange(nFft // 2 + 1)[:, None]
        n = np.arange(nFft)[None, :]
        phase = 2.0 * np.pi * bins * n / nFft
        stftKernelCache[nFft] = (
            (window * np.cos(phase))[:, None, :],
            (-window * np.sin(phase))[:, None, :],
        )
    return stftKernelCache[nFft]


def logMelSpectrogram(wave, sampleRate: int, nFft: int, hop: int, numMels: int, eps: float = 1e-5):
    """wave [batch, samples] -> log-mel magnitude [batch, numMels, frames]."""
    wave = T.asTensor(wave)
    if wave.ndim != 2:
        raise ShapeError("log_mel", f"expected [batch, samples], got {wave.shape}")
    cosKernel, sinKernel = stftKernels(nFft)
    x = wave.reshape(wave.shape[0], 1, wave.shape[1])
    real = T.conv1d(x, Tensor(cosKernel, dtype=wave.dtype), stride=hop, padding=nFft // 2)
    imag = T.conv1d(x, Tensor(sinKernel, dtype=wave.dtype), stride=hop, padding=nFft // 2)
    magnitude = T.sqrt(real * real + imag * imag + 1e-9)
    mel = T.matmul(Tensor(melBasis(sampleRate, nFft, numMels), dtype=wave.dtype), magnitude)
    return T.log(mel + eps)


def multiResolutionMelLoss(generated, reference, sampleRate: int, resolutions) -> Tensor:
    """Mean over (nFft, hop, numMels) resolutions of the L1 distance between log-mel spectra."""
    total = None
    for nFft, hop, numMels in resolutions:
        diff = logMelSpectrogram(generated, sampleRate, nFft, hop, numMels) - logMelSpectrogram(reference, sampleRate, nFft, hop, numMels)
        term = T.mean(T.absolute(diff))
        total = term if total is None else total + term
    return total * (1.0 / len(resolutions))


def frameEnergyDb(wave: np.ndarray, hop: int = 160, floor: float = 1e-5) -> np.ndarray:
    """Per-frame RMS in dB over consecutive hop-sized frames."""
    wave = np.asarray(wave, dtype=np.float64)
    frames = wave[: len(wave) // hop * hop].reshape(-1, hop)
    rms = np.sqrt((frames ** 2).mean(axis=1))
    return 20.0 * np.log10(rms + floor)


def _normalizedAutocorrelation(frames: np.ndarray, minLag: int, maxLag: int) -> np.ndarray:
    length = frames.shape[1]
    result = np.zeros((frames.shape[0], maxLag + 1))
    for lag in range(minLag, maxLag + 1):
        head, tail = frames[:, : length - lag], frames[:, lag:]
        energy = np.sqrt((head ** 2).sum(axis=1) * (tail ** 2).sum(axis=1))
        result[:, lag] = (head * tail).sum(axis=1) / np.maximum(energy, 1e-12)
    return result


def trackF0(wave: np.ndarray,
            sampleRate: int = 16000,
            frameLength: int = 400,
            hop: int = 160,
            fmin: float = 60.0,
            fmax: float = 400.0,
            voicingThreshold: float = 0.5,
            peakRatio: float = 0.9) -> tuple:
    """Autocorrelation pitch tracker, one estimate per hop-sized frame.

    Frame i is centred on samples [i * hop, (i + 1) * hop). The chosen lag is
    the shortest local maximum reaching `peakRatio` of the best one, refined
    by parabolic interpolation. Returns (f0 in Hz, voiced mask); unvoiced
    frames carry f0 = 0.
    """
    wave = np.asarray(wave, dtype=np.float64)
    count = len(wave) // hop
    minLag = int(np.floor(sampleRate / fmax))
    maxLag = int(np.ceil(sampleRate / fmin))
    if frameLength <= maxLag:
        raise ValueError(f"frameLength {frameLength} must exceed the longest lag {maxLag}")
    left = (frameLength - hop) // 2
    padded = np.pad(wave, (left, frameLength))
    starts = np.arange(count) * hop
    frames = np.stack([padded[s:s + frameLength] for s in starts]) if count else np.zeros((0, frameLength))
    frames = frames - frames.mean(axis=1, keepdims=True)
    correlation = _normalizedAutocorrelation(frames, minLag, maxLag)

    f0 = np.zeros(count)
    voiced = np.zeros(count, dtype=bool)
    silent = (frames ** 2).mean(axis=1) < 1e-8
    for i in range(count):
        if silent[i]:
            continue
        r = correlation[i]
        lags = np.arange(minLag + 1, maxLag)
        peaks = lags[(r[lags] > r[lags - 1]) & (r[lags] >= r[lags + 1])]
        if peaks.size == 0:
            continue
        best = r[peaks].max()
        if best < voicingThreshold:
            continue
        lag = peaks[r[peaks] >= peakRatio * best][0]
        below, centre, above = r[lag - 1], r[lag], r[lag + 1]
        curvature = below - 2.0 * centre + above
        shift = 0.5 * (below - above) / curvature if curvature < 0 else 0.0
        f0[i] = sampleRate / (lag + shift)
        voiced[i] = True
    return f0, voiced
