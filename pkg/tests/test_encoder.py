import numpy as np
import pytest

from factorvox.autodiff import Tensor
from factorvox.encoder import FactorEncoder, pooledEmbeddings, supervisedContrastive, prosodyLoss, encoderTotalLoss
from factorvox.mutualinfo import FACTOR_PAIRS, pairKey

FACTORS = ("timbre", "emotion", "content")


def test_contrastive_hand_infonce():
    z = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    loss = supervisedContrastive(z, [0, 0, 1, 2], temperature=1.0).item()
    assert loss == pytest.approx(-np.log(np.e / (np.e + 2)), abs=1e-5)
    assert loss == pytest.approx(0.5514, abs=1e-4)


def test_contrastive_identical_embeddings_is_log_batch_minus_one():
    z = np.ones((6, 3))
    loss = supervisedContrastive(z, [0, 0, 1, 1, 2, 2], temperature=0.5).item()
    assert loss == pytest.approx(np.log(5), abs=1e-5)


def test_contrastive_separated_classes_is_small():
    z = np.array([[1.0, 0.0], [0.99, 0.05], [-1.0, 0.0], [-0.99, -0.05]])
    assert supervisedContrastive(z, [0, 0, 1, 1], temperature=0.1).item() < 0.1


def test_contrastive_random_embeddings_near_log_negatives():
    rng = np.random.default_rng(2)
    values = [supervisedContrastive(rng.normal(size=(8, 16)), np.repeat(np.arange(4), 2), 1.0).item() for _ in range(50)]
    assert abs(np.mean(values) - np.log(7)) < 0.25


def test_contrastive_needs_a_positive():
    with pytest.raises(ValueError):
        supervisedContrastive(np.eye(3), [0, 1, 2])
    with pytest.raises(ValueError):
        supervisedContrastive(np.eye(3), [0, 0, 1], temperature=0.0)


def test_prosody_loss_examples():
    f0 = np.log(np.array([[120.0, 130.0, 140.0]]))
    energy = np.array([[-2.0, -1.5, -1.0]])
    voiced = np.array([[True, True, False]])
    assert prosodyLoss(f0, energy, f0, voiced, energy).item() == pytest.approx(0.0)
    assert prosodyLoss(f0 + 0.1, energy, f0, voiced, energy).item() == pytest.approx(0.01, rel=1e-4)
    unvoiced = np.zeros_like(voiced)
    loss = prosodyLoss(f0 + 5.0, energy + 0.2, f0, unvoiced, energy).item()
    assert loss == pytest.approx(0.04, rel=1e-4)


def unitComponents(value: float) -> dict:
    return {
        "contrastive": {f: value for f in FACTORS},
        "commitment": {f: value for f in FACTORS},
        "prosody": value,
        "mi": {pairKey(a, b): value for a, b in FACTOR_PAIRS},
    }


def test_total_loss_with_default_weights():
    weights = {"contrastive": 5.0, "commitment": 1.0, "prosody": 2.0}
    assert encoderTotalLoss(unitComponents(0.0), weights, 1.0).item() == 0.0
    assert encoderTotalLoss(unitComponents(1.0), weights, 1.0).item() == pytest.approx(23.0)
    assert encoderTotalLoss(unitComponents(1.0), weights, 0.0).item() == pytest.approx(20.0)


def test_encoder_output_shapes(tinyModelConfig, rng):
    encoder = FactorEncoder(tinyModelConfig, rng)
    out = encoder(Tensor(rng.normal(size=(2, 8, 10))), initializeRng=rng)
    assert out["content"]["embedding"].shape == (2, 10, 8)
    assert out["emotion"]["embedding"].shape == (2, 10, 4)
    assert out["timbre"]["embedding"].shape == (2, 8)
    assert out["content"]["quant"]["tokens"].shape == (2, 2, 10)
    assert out["timbre"]["quant"]["tokens"].shape == (1, 2)
    assert out["logF0"].shape == (2, 10)
    pooled = pooledEmbeddings(out)
    assert pooled["content"].shape == (2, 8) and pooled["emotion"].shape == (2, 4)


def test_encode_is_deterministic(tinyModelConfig, rng):
    encoder = FactorEncoder(tinyModelConfig, rng)
    features = rng.normal(size=(12, 8))
    first, second = encoder.encode(features), encoder.encode(features)
    for factor in FACTORS:
        assert np.array_equal(first[factor]["tokens"], second[factor]["tokens"])


def test_emotion_stream_sees_only_prosody(tinyModelConfig, rng):
    encoder = FactorEncoder(tinyModelConfig, rng)
    features = Tensor(rng.normal(size=(1, 8, 10)), requiresGrad=True)
    out = encoder(features)
    (out["emotion"]["embedding"] * 1.0).sum().backward()
    assert encoder.emotion.prosodyHead.weight.grad is not None
    assert encoder.content.refiner.layers[0].weight.grad is None


def test_encoder_rejects_bad_input(tinyModelConfig, rng):
    encoder = FactorEncoder(tinyModelConfig, rng)
    with pytest.raises(ValueError):
        encoder.encode(np.zeros((0, 8)))
    broken = dict(tinyModelConfig, encoder=dict(tinyModelConfig["encoder"], emotionDim=5))
    with pytest.raises(ValueError):
        FactorEncoder(broken, rng)
