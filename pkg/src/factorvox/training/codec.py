"""Stage-1 waveform codec: strided conv encoder to hop-rate features and a frame-wise decoder."""

from ..autodiff import tensor as T
from ..autodiff.tensor import ShapeError
from ..nn.modules import Module, Conv1d
from ..nn.blocks import ConvStack


class CodecEncoder(Module):
    """[batch, samples] -> [batch, featureDim, samples // hop]."""

    def __init__(self, config: dict, hop: int, rng):
        self.hop = hop
        self.analysis = Conv1d(1, config["channels"], 2 * hop, rng, stride=hop, padding=(hop // 2, hop // 2))
        self.refine = ConvStack([config["channels"], config["featureDim"], config["featureDim"]], 3, rng)

    def forward(self, wave):
        if wave.ndim != 2 or wave.shape[1] % self.hop != 0:
            raise ShapeError("codec_encode", f"expected [batch, samples] with samples a multiple of {self.hop}, got {wave.shape}")
        x = wave.reshape(wave.shape[0], 1, wave.shape[1])
        return self.refine(T.leakyRelu(self.analysis(x)))


class CodecDecoder(Module):
    """[batch, featureDim, frames] -> [batch, frames * hop] in (-1, 1)."""

    def __init__(self, config: dict, hop: int, rng):
        self.hop = hop
        self.body = ConvStack([config["featureDim"], config["decoderChannels"], config["decoderChannels"]], 3, rng, linearOut=False)
        self.synthesis = Conv1d(config["decoderChannels"], hop, 1, rng)

    def forward(self, features):
        frames = self.synthesis(self.body(features))
        batch, _, count = frames.shape
        return T.tanh(frames.transpose(0, 2, 1).reshape(batch, count * self.hop))


class Codec(Module):

    def __init__(self, modelConfig: dict, rng):
        self.encoder = CodecEncoder(modelConfig["codec"], modelConfig["hop"], rng)
        self.decoder = CodecDecoder(modelConfig["codec"], modelConfig["hop"], rng)

    def forward(self, wave):
        return self.decoder(self.encoder(wave))
