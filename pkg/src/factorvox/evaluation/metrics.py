"""Metric kernels: code MI, DTW-aligned F0 metrics, SECS cosine and content error rate."""

import numpy as np
from scipy import stats as scistats
from dtw import dtw
from dtw.stepPattern import symmetric1

from ..audio.features import trackF0


# ── mutual information of discrete codes ─────────────────────────────
def tokenEntropy(tokens, correction: bool = True) -> float:
    """Plug-in entropy in nats, plus the Miller-Madow term (K - 1) / 2N when `correction`."""
    tokens = np.asarray(tokens).reshape(len(tokens), -1)
    if len(tokens) == 0:
        raise ValueError("entropy of an empty token sequence is undefined")
    _, counts = np.unique(tokens, axis=0, return_counts=True)
    entropy = float(scistats.entropy(counts))
    if correction:
        entropy += (len(counts) - 1) / (2.0 * len(tokens))
    return entropy


def codeMi(codesA, codesB, correction: bool = True) -> float:
    """I(A; B) = H(A) + H(B) - H(A, B) over paired per-utterance tokens, in nats."""
    codesA, codesB = np.asarray(codesA), np.asarray(codesB)
    if len(codesA) != len(codesB):
        raise ValueError(f"code MI needs paired samples, got {len(codesA)} and {len(codesB)}")
    joint = np.stack([codesA.reshape(len(codesA)), codesB.reshape(len(codesB))], axis=1)
    value = tokenEntropy(codesA, correction) + tokenEntropy(codesB, correction) - tokenEntropy(joint, correction)
    return max(0.0, value)


def utteranceCode(frameTokens) -> int:
    """Most frequent first-stage token of an utterance (lowest id on ties)."""
    frameTokens = np.asarray(frameTokens).reshape(-1)
    return int(np.bincount(frameTokens).argmax())


# ── pitch contours ───────────────────────────────────────────────────
def pearson(x, y) -> float | None:
    """Pearson correlation; None when either side is constant."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(scistats.pearsonr(x, y)[0])


def dtwAlign(a, b) -> tuple:
    """Symmetric-step DTW with L1 frame cost; returns (cost, indexA, indexB)."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError(f"DTW needs two non-empty sequences, got lengths {len(a)} and {len(b)}")
    cost = np.abs(a[:, None] - b[None, :])
    alignment = dtw(cost, step_pattern=symmetric1)
    return float(alignment.distance), np.asarray(alignment.index1), np.asarray(alignment.index2)


def contourMetrics(logF0A, logF0B) -> dict:
    """Log RMSE and Pearson correlation of two voiced log-F0 contours after DTW alignment."""
    _, indexA, indexB = dtwAlign(logF0A, logF0B)
    alignedA, alignedB = np.asarray(logF0A)[indexA], np.asarray(logF0B)[indexB]
    return {
        "logRmse": float(np.sqrt(np.mean((alignedA - alignedB) ** 2))),
        "corr": pearson(alignedA, alignedB),
        "pathLength": int(len(indexA)),
    }


def voicedLogF0(wave, sampleRate: int, hop: int) -> np.ndarray:
    f0, voiced = trackF0(wave, sampleRate=sampleRate, hop=hop)
    return np.log(f0[voiced])


def f0Metrics(generated, reference, sampleRate: int = 16000, hop: int = 160, minVoicedFrames: int = 5) -> dict | None:
    """DTW-aligned F0 metrics of two waveforms; None when either has too few voiced frames."""
    a = voicedLogF0(generated, sampleRate, hop)
    b = voicedLogF0(reference, sampleRate, hop)
    if len(a) < minVoicedFrames or len(b) < minVoicedFrames:
        return None
    return contourMetrics(a, b)


# ── speaker similarity ───────────────────────────────────────────────
def cosine(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64).reshape(-1), np.asarray(b, dtype=np.float64).reshape(-1)
    denominator = np.linalg.norm(a) * np.linalg.norm(b)
    if denominator == 0:
        return 0.0
    return float(np.clip(a @ b / denominator, -1.0, 1.0))


# ── content recognition ──────────────────────────────────────────────
def fitTokenSymbolMap(tokenSequences, symbolSequences, codebookSize: int, alphabetSize: int) -> np.ndarray:
    """Majority symbol for every content token; tokens never seen map to -1."""
    counts = np.zeros((codebookSize, alphabetSize), dtype=np.int64)
    for tokens, symbols in zip(tokenSequences, symbolSequences):
        length = min(len(tokens), len(symbols))
        np.add.at(counts, (np.asarray(tokens[:length]), np.asarray(symbols[:length])), 1)
    mapping = counts.argmax(axis=1)
    mapping[counts.sum(axis=1) == 0] = -1
    return mapping


def decodeSymbols(frameTokens, tokenMap: np.ndarray, framesPerSymbol: int) -> np.ndarray:
    """Vote the mapped frame symbols within each symbol span."""
    mapped = tokenMap[np.asarray(frameTokens)]
    spans = len(mapped) // framesPerSymbol
    decoded = np.full(spans, -1, dtype=np.int64)
    for i in range(spans):
        votes = mapped[i * framesPerSymbol:(i + 1) * framesPerSymbol]
        votes = votes[votes >= 0]
        if votes.size:
            decoded[i] = np.bincount(votes).argmax()
    return decoded


def editDistance(hypothesis, reference) -> int:
    hypothesis, reference = list(hypothesis), list(reference)
    previous = np.arange(len(reference) + 1)
    for i, h in enumerate(hypothesis, start=1):
        current = np.empty_like(previous)
        current[0] = i
        for j, r in enumerate(reference, start=1):
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (h != r))
        previous = current
    return int(previous[-1])


def symbolErrorRate(hypothesis, reference) -> float:
    if len(reference) == 0:
        raise ValueError("symbol error rate needs a non-empty reference")
    return editDistance(hypothesis, reference) / len(reference)
