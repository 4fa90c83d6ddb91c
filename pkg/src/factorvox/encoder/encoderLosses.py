import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor

FACTORS = ("timbre", "emotion", "content")


def supervisedContrastive(z, labels, temperature: float = 0.1):
    """Supervised contrastive loss over L2-normalized rows of z [batch, dim].

    For anchor i the positives are the other rows sharing its label and the
    denominator runs over every k != i. Anchors without a positive are
    skipped; a batch where every anchor is skipped is an error.
    """
    if temperature <= 0:
        raise ValueError(f"contrastive temperature must be positive, got {temperature}")
    z = T.asTensor(z)
    labels = np.asarray(labels)
    batch = z.shape[0]
    if labels.shape[0] != batch:
        raise ValueError(f"{labels.shape[0]} labels for a batch of {batch}")
    offDiagonal = ~np.eye(batch, dtype=bool)
    positives = (labels[:, None] == labels[None, :]) & offDiagonal
    counts = positives.sum(axis=1)
    anchors = counts > 0
    if not anchors.any():
        raise ValueError("contrastive batch has no positive pair for any anchor")

    normalized = z / T.l2Norm(z, axis=1, keepdims=True)
    similarity = T.matmul(normalized, normalized.transpose(1, 0)) * (1.0 / temperature)
    masked = similarity + Tensor(np.where(offDiagonal, 0.0, -1e9), dtype=z.dtype)
    logProb = masked - T.logSumExp(masked, axis=1, keepdims=True)
    weights = positives / np.maximum(counts, 1)[:, None]
    perAnchor = -T.sumOp(logProb * Tensor(weights, dtype=z.dtype), axis=1)
    selected = Tensor(anchors / anchors.sum(), dtype=z.dtype)
    return T.sumOp(perAnchor * selected)


def prosodyLoss(predictedLogF0, predictedEnergy, trueLogF0, voiced, trueEnergy):
    """MSE of log-F0 (log-Hz) over voiced frames plus MSE of per-frame RMS energy (dB) over all frames."""
    predictedLogF0, predictedEnergy = T.asTensor(predictedLogF0), T.asTensor(predictedEnergy)
    mask = np.asarray(voiced, dtype=np.float64)
    energyDiff = predictedEnergy - Tensor(trueEnergy, dtype=predictedEnergy.dtype)
    loss = T.mean(energyDiff * energyDiff)
    if mask.sum() > 0:
        f0Diff = predictedLogF0 - Tensor(trueLogF0, dtype=predictedLogF0.dtype)
        loss = loss + T.sumOp(f0Diff * f0Diff * Tensor(mask / mask.sum(), dtype=predictedLogF0.dtype))
    return loss


def encoderTotalLoss(components: dict, weights: dict, alpha: float):
    """sum_f lc*Lcom_f + sum_f lw*Lw_f + lp*Lp + alpha * sum_pairs MI.

    components: {"contrastive": {factor: loss}, "commitment": {factor: loss},
    "prosody": loss, "mi": {pair: loss}}. Zero-weighted terms are never
    touched, so they add neither value nor gradient path.
    """
    total = Tensor(0.0)
    if weights["contrastive"] != 0:
        for value in components.get("contrastive", {}).values():
            total = total + T.asTensor(value) * weights["contrastive"]
    if weights["commitment"] != 0:
        for factor in FACTORS:
            total = total + T.asTensor(components["commitment"][factor]) * weights["commitment"]
    if weights["prosody"] != 0:
        total = total + T.asTensor(components["prosody"]) * weights["prosody"]
    if alpha != 0:
        for value in components["mi"].values():
            total = total + T.asTensor(value) * alpha
    return total
