"""Multi-scale waveform discriminators with hinge and feature-matching losses."""

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import noGrad
from ..nn.modules import Module, Conv1d


class ScaleDiscriminator(Module):
    """Strided conv stack on one waveform scale; every hidden activation is a tap."""

    def __init__(self, channels: list, rng):
        widths = [1] + list(channels)
        kernels = [15] + [11] * (len(channels) - 1)
        strides = [1] + [4] * (len(channels) - 1)
        self.layers = [
            Conv1d(widths[i], widths[i + 1], kernels[i], rng, stride=strides[i])
            for i in range(len(channels))
        ]
        self.output = Conv1d(widths[-1], 1, 3, rng)

    def forward(self, x):
        taps = []
        for layer in self.layers:
            x = T.leakyRelu(layer(x))
            taps.append(x)
        return self.output(x), taps


class MultiScaleDiscriminator(Module):
    """K sub-discriminators; scale k sees the waveform average-pooled k - 1 times by 2."""

    def __init__(self, config: dict, rng):
        if config["scales"] < 1:
            raise ValueError(f"discriminator needs >= 1 scale, got {config['scales']}")
        self.discriminators = [ScaleDiscriminator(config["channels"], rng) for _ in range(config["scales"])]

    def forward(self, wave) -> tuple:
        x = wave.reshape(wave.shape[0], 1, wave.shape[1])
        scores, taps = [], []
        for k, disc in enumerate(self.discriminators):
            if k > 0:
                x = T.avgPool1d(x, 4, 2, 1)
            score, features = disc(x)
            scores.append(score)
            taps.append(features)
        return scores, taps


def hingeDiscriminatorLoss(realScores: list, fakeScores: list):
    """(1/K) sum_k [mean max(0, 1 - D_k(x)) + mean max(0, 1 + D_k(x_hat))]."""
    total = None
    for real, fake in zip(realScores, fakeScores):
        term = T.mean(T.relu(1.0 - real)) + T.mean(T.relu(1.0 + fake))
        total = term if total is None else total + term
    return total * (1.0 / len(realScores))


def generatorHingeLoss(fakeScores: list):
    """(1/K) sum_k mean max(0, 1 - D_k(x_hat))."""
    total = None
    for fake in fakeScores:
        term = T.mean(T.relu(1.0 - fake))
        total = term if total is None else total + term
    return total * (1.0 / len(fakeScores))


def featureMatching(realTaps: list, fakeTaps: list):
    """Mean over scales and layers of mean|fake - real| / mean|real|; real taps are constants."""
    if len(realTaps) != len(fakeTaps):
        raise ValueError(f"feature matching: {len(realTaps)} real scales vs {len(fakeTaps)} fake scales")
    total, count = None, 0
    for scale, (realLayers, fakeLayers) in enumerate(zip(realTaps, fakeTaps)):
        if len(realLayers) != len(fakeLayers):
            raise ValueError(f"feature matching: scale {scale} has {len(realLayers)} real taps vs {len(fakeLayers)} fake taps")
        for real, fake in zip(realLayers, fakeLayers):
            real = T.asTensor(real).detach()
            magnitude = max(float(np.abs(real.data).mean()), 1e-8)
            term = T.mean(T.absolute(fake - real)) * (1.0 / magnitude)
            total = term if total is None else total + term
            count += 1
    return total * (1.0 / count)


def cropPair(real, fake) -> tuple:
    length = min(real.shape[1], fake.shape[1])
    return real[:, :length], fake[:, :length]


def discLoss(bank: MultiScaleDiscriminator, real, fake):
    """Discriminator-side hinge loss; the fake waveform is detached."""
    real, fake = cropPair(T.asTensor(real), T.asTensor(fake))
    realScores, _ = bank(real.detach())
    fakeScores, _ = bank(fake.detach())
    return hingeDiscriminatorLoss(realScores, fakeScores)


def genAdvLoss(bank: MultiScaleDiscriminator, real, fake) -> dict:
    """Generator-side adversarial hinge term and feature matching against real taps.

    Callers freeze `bank` so only the generator accumulates gradient.
    """
    real, fake = cropPair(T.asTensor(real), T.asTensor(fake))
    with noGrad():
        _, realTaps = bank(real.detach())
    fakeScores, fakeTaps = bank(fake)
    return {
        "adversarial": generatorHingeLoss(fakeScores),
        "featureMatching": featureMatching(realTaps, fakeTaps),
        "scores": [float(s.data.mean()) for s in fakeScores],
    }
