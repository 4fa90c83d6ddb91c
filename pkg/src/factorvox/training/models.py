"""Model construction and the inference paths shared by the CLI and evaluation."""

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, noGrad
from ..encoder.factorEncoder import FactorEncoder, factorCodesFromOutputs
from ..generator.speechGenerator import SpeechGenerator, stretchFrames
from ..adversary.discriminators import MultiScaleDiscriminator
from ..mutualinfo.estimators import buildEstimators
from .codec import Codec

# Sub-seeds keep each module's initialization independent of the others
MODULE_SEEDS = {"codec": 1, "discriminator": 2, "encoder": 3, "club": 4, "mine": 5, "generator": 6, "speaker": 7}


def moduleRng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), MODULE_SEEDS[name]])


def buildCodec(modelConfig: dict, seed: int) -> Codec:
    return Codec(modelConfig, moduleRng(seed, "codec"))


def buildDiscriminator(modelConfig: dict, seed: int) -> MultiScaleDiscriminator:
    return MultiScaleDiscriminator(modelConfig["discriminator"], moduleRng(seed, "discriminator"))


def buildEncoder(modelConfig: dict, seed: int) -> FactorEncoder:
    return FactorEncoder(modelConfig, moduleRng(seed, "encoder"))


def buildGenerator(modelConfig: dict, seed: int) -> SpeechGenerator:
    return SpeechGenerator(modelConfig, moduleRng(seed, "generator"))


def factorDims(modelConfig: dict) -> dict:
    enc = modelConfig["encoder"]
    return {"content": enc["contentDim"], "emotion": enc["emotionDim"], "timbre": enc["timbreDim"]}


def buildMiEstimators(modelConfig: dict, seed: int) -> tuple:
    """(CLUB estimators minimized by the encoder, MINE estimators for monitoring)."""
    mi = modelConfig["mi"]
    dims = factorDims(modelConfig)
    club = buildEstimators(dims, moduleRng(seed, "club"), "club", mi["hidden"], mi["learningRate"])
    mine = buildEstimators(dims, moduleRng(seed, "mine"), "mine", mi["hidden"], mi["learningRate"])
    return club, mine


def encodeWaveform(codec, encoder, wave) -> dict:
    """Waveform samples -> FactorCodes of one utterance (trailing partial frame dropped)."""
    wave = np.asarray(wave, dtype=np.float32).reshape(-1)
    usable = len(wave) // codec.encoder.hop * codec.encoder.hop
    if usable == 0:
        raise ValueError(f"waveform of {len(wave)} samples is shorter than one frame")
    with noGrad():
        features = codec.encoder(Tensor(wave[None, :usable]))
        out = encoder(features)
    return factorCodesFromOutputs(out, 0)


def codesToEmbeddings(encoder, codes: dict) -> dict:
    """Codeword embeddings for FactorCodes; emotion is stretched to the content length."""
    for factor in ("content", "emotion", "timbre"):
        if factor not in codes or codes[factor] is None:
            raise ValueError(f"generate: the {factor} stream is missing; all three factors are required")
    quantizers = encoder.quantizers()
    contentTokens = np.asarray(codes["content"]["tokens"])
    frames = contentTokens.shape[-1]
    emotionTokens = stretchFrames(np.asarray(codes["emotion"]["tokens"]), frames, axis=-1)
    timbreTokens = np.asarray(codes["timbre"]["tokens"]).reshape(-1)
    return {
        "content": quantizers["content"].lookup(contentTokens),
        "emotion": quantizers["emotion"].lookup(emotionTokens),
        "timbre": quantizers["timbre"].lookup(timbreTokens),
    }


def generateWaveform(codec, encoder, generator, codes: dict, noDyGate: bool = False, noHsan: bool = False) -> np.ndarray:
    """FactorCodes -> waveform; deterministic, length = content frames * hop."""
    embeddings = codesToEmbeddings(encoder, codes)
    with noGrad():
        out = generator(
            Tensor(embeddings["content"][None]),
            Tensor(embeddings["emotion"][None]),
            Tensor(embeddings["timbre"][None]),
            noDyGate=noDyGate,
            noHsan=noHsan,
        )
        wave = codec.decoder(out["features"])
    return wave.data[0]


def styleEmbeddings(out: dict) -> dict:
    """Timbre vector and time-pooled emotion vector from encoder outputs."""
    return {"timbre": out["timbre"]["embedding"], "emotion": T.mean(out["emotion"]["embedding"], axis=1)}
