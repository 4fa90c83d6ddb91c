"""Three-stream factor encoder over frozen codec features.

content: conv refiner -> RVQ (per frame)
emotion: two conv blocks -> F0/energy heads -> centred prosody -> conv block -> RVQ (per frame)
timbre:  conv front-end -> attention pooling -> RVQ (per utterance)
"""

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, noGrad
from ..nn.modules import Module, Conv1d, Linear
from ..nn.blocks import ConvStack, AttentionPool
from ..quantizer.rvq import ResidualVectorQuantizer

F0_BIAS = float(np.log(150.0))
ENERGY_BIAS = -25.0           # dB


class ContentStream(Module):

    def __init__(self, featureDim: int, width: int, contentDim: int, rng):
        self.refiner = ConvStack([featureDim, width, contentDim], 3, rng)

    def forward(self, features):
        return self.refiner(features).transpose(0, 2, 1)


class EmotionStream(Module):
    """The embedding sees the input only through the predicted F0 and energy."""

    def __init__(self, featureDim: int, width: int, emotionDim: int, rng):
        self.block1 = Conv1d(featureDim, width, 3, rng)
        self.block2 = Conv1d(width, width, 3, rng)
        self.prosodyHead = Conv1d(width, 2, 1, rng)
        self.prosodyHead.bias.data[:] = [F0_BIAS, ENERGY_BIAS]
        self.block3 = ConvStack([2, width, emotionDim], 3, rng)

    def forward(self, features):
        h = T.leakyRelu(self.block1(features))
        h = T.leakyRelu(self.block2(h))
        prosody = self.prosodyHead(h)
        centred = prosody - T.mean(prosody, axis=2, keepdims=True)
        embedding = self.block3(centred).transpose(0, 2, 1)
        return embedding, prosody[:, 0, :], prosody[:, 1, :]


class TimbreStream(Module):

    def __init__(self, featureDim: int, width: int, heads: int, timbreDim: int, rng):
        self.front = ConvStack([featureDim, width, width], 3, rng, linearOut=False)
        self.pool = AttentionPool(width, heads, rng)
        self.projection = Linear(width, timbreDim, rng)

    def forward(self, features):
        h = self.front(features).transpose(0, 2, 1)
        return self.projection(self.pool(h))


class FactorEncoder(Module):

    def __init__(self, modelConfig: dict, rng):
        featureDim = modelConfig["codec"]["featureDim"]
        enc = modelConfig["encoder"]
        rvq = modelConfig["rvq"]
        for factor, dimKey in (("content", "contentDim"), ("emotion", "emotionDim"), ("timbre", "timbreDim")):
            if rvq[factor]["codeDim"] != enc[dimKey]:
                raise ValueError(f"{factor} RVQ codeDim {rvq[factor]['codeDim']} != encoder {dimKey} {enc[dimKey]}")
        self.featureDim = featureDim
        self.content = ContentStream(featureDim, enc["width"], enc["contentDim"], rng)
        self.emotion = EmotionStream(featureDim, enc["width"], enc["emotionDim"], rng)
        self.timbre = TimbreStream(featureDim, enc["width"], enc["heads"], enc["timbreDim"], rng)
        self.contentQuantizer = ResidualVectorQuantizer(rvq["content"], rng)
        self.emotionQuantizer = ResidualVectorQuantizer(rvq["emotion"], rng)
        self.timbreQuantizer = ResidualVectorQuantizer(rvq["timbre"], rng)

    def quantizers(self) -> dict:
        return {"content": self.contentQuantizer, "emotion": self.emotionQuantizer, "timbre": self.timbreQuantizer}

    def forward(self, features, initializeRng=None) -> dict:
        """features [batch, featureDim, frames] -> per-factor embeddings, RVQ results and prosody."""
        if features.ndim != 3 or features.shape[2] == 0:
            raise ValueError(f"encoder needs a non-empty [batch, {self.featureDim}, frames] feature tensor, got {features.shape}")
        embeddings = {"content": self.content(features)}
        embeddings["emotion"], logF0, energy = self.emotion(features)
        embeddings["timbre"] = self.timbre(features)

        outputs = {"logF0": logF0, "energy": energy}
        for factor, quantizer in self.quantizers().items():
            if initializeRng is not None and not quantizer.isInitialized():
                quantizer.initializeFromData(embeddings[factor].data, initializeRng)
            outputs[factor] = {"embedding": embeddings[factor], "quant": quantizer.quantize(embeddings[factor])}
        return outputs

    def encode(self, features) -> dict:
        """Encode one utterance's features [frames, featureDim] into FactorCodes."""
        features = np.asarray(features)
        if features.ndim != 2 or features.shape[0] == 0:
            raise ValueError(f"encode: expected a non-empty [frames, featureDim] array, got shape {features.shape}")
        with noGrad():
            out = self.forward(Tensor(features.T[None]))
        return factorCodesFromOutputs(out, 0)


def factorCodesFromOutputs(out: dict, index: int) -> dict:
    """FactorCodes for batch item `index`: tokens [stages, ...] plus pre-quantization embeddings."""
    return {
        "content": {
            "tokens": out["content"]["quant"]["tokens"][:, index],
            "embedding": out["content"]["embedding"].data[index],
        },
        "emotion": {
            "tokens": out["emotion"]["quant"]["tokens"][:, index],
            "embedding": out["emotion"]["embedding"].data[index],
            "logF0": out["logF0"].data[index],
            "energy": out["energy"].data[index],
        },
        "timbre": {
            "tokens": out["timbre"]["quant"]["tokens"][:, index],
            "embedding": out["timbre"]["embedding"].data[index],
        },
    }


def pooledEmbeddings(out: dict, useCodewords: bool = False) -> dict:
    """Per-utterance vectors: time-mean for content and emotion, timbre as is."""
    pooled = {}
    for factor in ("content", "emotion", "timbre"):
        value = out[factor]["quant"]["quantized"] if useCodewords else out[factor]["embedding"]
        pooled[factor] = T.mean(value, axis=1) if value.ndim == 3 else value
    return pooled
