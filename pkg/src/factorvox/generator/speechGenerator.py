"""Factor-conditioned generator: gated fusion, style parameters, HSAN backbone.

The backbone predicts codec features; the stage-1 codec decoder turns them
into a waveform.
"""

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, ShapeError
from ..nn.modules import Module, Linear, Conv1d
from ..nn.blocks import MLP, CrossAttentionPool, MultiScaleResBlock, instanceNorm


def hsan(x, gamma, beta, alpha, lam: float = 0.1):
    """y = IN(x) * (1 + tanh(gamma)) + beta + lam * tanh(alpha) * x, style vectors [batch, channel]."""
    x = T.asTensor(x)
    if x.ndim != 3:
        raise ShapeError("hsan", f"expected x [batch, channel, time], got {x.shape}")
    for name, param in (("gamma", gamma), ("beta", beta), ("alpha", alpha)):
        if tuple(param.shape) != tuple(x.shape[:2]):
            raise ShapeError("hsan", f"{name} has shape {param.shape}, expected {x.shape[:2]}", axes=(1,))

    def expand(p):
        return T.asTensor(p).reshape(x.shape[0], x.shape[1], 1)

    return (instanceNorm(x) * (1.0 + T.tanh(expand(gamma)))
            + expand(beta)
            + T.tanh(expand(alpha)) * x * lam)


class DynamicFusion(Module):
    """Per-frame softmax gate over projected content, emotion and timbre streams."""

    def __init__(self, dims: dict, width: int, rng):
        self.contentProjection = Linear(dims["content"], width, rng)
        self.emotionProjection = Linear(dims["emotion"], width, rng)
        self.timbreProjection = Linear(dims["timbre"], width, rng)
        self.gate = MLP([3 * width, width, 3], rng)

    def forward(self, content, emotion, timbre, fixedGates: bool = False) -> tuple:
        """content [B, F, dc], emotion [B, F, de], timbre [B, dt] -> (fused [B, F, W], weights [B, F, 3])."""
        if content.shape[:2] != emotion.shape[:2]:
            raise ShapeError("dynamic_fuse", f"content {content.shape[:2]} and emotion {emotion.shape[:2]} time axes differ", axes=(1,))
        batch, frames = content.shape[0], content.shape[1]
        c = self.contentProjection(content)
        e = self.emotionProjection(emotion)
        t = self.timbreProjection(timbre)
        t = T.broadcastTo(t.reshape(batch, 1, t.shape[1]), c.shape)
        if fixedGates:
            weights = Tensor(np.full((batch, frames, 3), 1.0 / 3.0), dtype=c.dtype)
        else:
            weights = T.softmax(self.gate(T.concat([c, e, t], axis=2)), axis=2)
        fused = c * weights[:, :, 0:1] + e * weights[:, :, 1:2] + t * weights[:, :, 2:3]
        return fused, weights


class StyleInjection(Module):
    """Cross-attention of emotion frames over the timbre sequence, pooled, then per-layer (gamma, beta, alpha) heads."""

    def __init__(self, dims: dict, width: int, heads: int, layerChannels: list, rng):
        self.emotionProjection = Linear(dims["emotion"], width, rng)
        self.timbreProjection = Linear(dims["timbre"], width, rng)
        self.crossAttention = CrossAttentionPool(width, heads, rng, zeroInitOutput=True)
        self.layerChannels = list(layerChannels)
        self.heads = [Linear(width, 3 * channels, rng, zeroInit=True) for channels in self.layerChannels]

    def attend(self, timbre, emotion):
        """timbre [B, dt], emotion [B, F, de] -> [B, F, width]; queries are emotion frames, context is timbre only."""
        query = self.emotionProjection(emotion)
        context = self.timbreProjection(timbre).reshape(timbre.shape[0], 1, query.shape[2])
        return self.crossAttention(query, context)

    def forward(self, timbre, emotion) -> list:
        """timbre [B, dt], emotion [B, F, de] -> one (gamma, beta, alpha) triple per layer."""
        style = T.mean(self.attend(timbre, emotion), axis=1)
        params = []
        for channels, head in zip(self.layerChannels, self.heads):
            out = head(style)
            params.append((out[:, :channels], out[:, channels:2 * channels], out[:, 2 * channels:]))
        return params


class SpeechGenerator(Module):

    def __init__(self, modelConfig: dict, rng):
        enc = modelConfig["encoder"]
        gen = modelConfig["generator"]
        dims = {"content": enc["contentDim"], "emotion": enc["emotionDim"], "timbre": enc["timbreDim"]}
        width = gen["width"]
        self.hsanLambda = gen["hsanLambda"]
        self.fusion = DynamicFusion(dims, width, rng)
        self.style = StyleInjection(dims, width, gen["heads"], [width] * gen["blocks"], rng)
        self.blocks = [MultiScaleResBlock(width, rng) for _ in range(gen["blocks"])]
        self.output = Conv1d(width, modelConfig["codec"]["featureDim"], 3, rng)

    def forward(self, content, emotion, timbre, noDyGate: bool = False, noHsan: bool = False) -> dict:
        """Codeword embeddings -> predicted codec features [B, featureDim, F] plus gate weights."""
        for name, stream in (("content", content), ("emotion", emotion), ("timbre", timbre)):
            if stream is None:
                raise ValueError(f"generate: the {name} stream is missing; all three factors are required")
        fused, weights = self.fusion(content, emotion, timbre, fixedGates=noDyGate)
        x = fused.transpose(0, 2, 1)
        styleParams = None if noHsan else self.style(timbre, emotion)
        for i, block in enumerate(self.blocks):
            if styleParams is None:
                x = block(x, norm=instanceNorm)
            else:
                gamma, beta, alpha = styleParams[i]
                x = block(x, norm=lambda h, g=gamma, b=beta, a=alpha: hsan(h, g, b, a, self.hsanLambda))
        return {"features": self.output(x), "gates": weights, "styleParams": styleParams}


def stretchFrames(sequence: np.ndarray, frames: int, axis: int = -1) -> np.ndarray:
    """Nearest-neighbour time stretch of `sequence` along `axis` to `frames` steps."""
    length = sequence.shape[axis]
    if length == frames:
        return sequence
    index = np.minimum((np.arange(frames) * length / frames).astype(np.int64), length - 1)
    return np.take(sequence, index, axis=axis)
