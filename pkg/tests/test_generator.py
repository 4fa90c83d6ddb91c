import numpy as np
import pytest

from factorvox.autodiff import Tensor, ShapeError, float64Mode
from factorvox.generator import (SpeechGenerator, DynamicFusion, StyleInjection, hsan, stretchFrames,
                                 gateEntropyLoss, similarityLoss, generatorTotalLoss, GENERATOR_TERMS)
from factorvox.nn import instanceNorm

DIMS = {"content": 3, "emotion": 2, "timbre": 2}


def streams(rng, batch: int = 1, frames: int = 4) -> tuple:
    return (Tensor(rng.normal(size=(batch, frames, 3))), Tensor(rng.normal(size=(batch, frames, 2))),
            Tensor(rng.normal(size=(batch, 2))))


def setGateLogits(fusion: DynamicFusion, logits):
    last = fusion.gate.layers[-1]
    last.weight.data[:] = 0.0
    last.bias.data[:] = logits


def test_equal_logits_average_the_projections(rng):
    fusion = DynamicFusion(DIMS, 4, rng)
    setGateLogits(fusion, [0.0, 0.0, 0.0])
    content, emotion, timbre = streams(rng)
    fused, weights = fusion(content, emotion, timbre)
    assert np.allclose(weights.data, 1 / 3, atol=1e-6)
    c = fusion.contentProjection(content).data
    e = fusion.emotionProjection(emotion).data
    t = fusion.timbreProjection(timbre).data[:, None, :]
    assert np.allclose(fused.data, (c + e + t) / 3, atol=1e-5)


def test_hand_set_gate_logits(rng):
    fusion = DynamicFusion(DIMS, 4, rng)
    setGateLogits(fusion, [np.log(2.0), 0.0, 0.0])
    _, weights = fusion(*streams(rng))
    assert np.allclose(weights.data[0, 0], [0.5, 0.25, 0.25], atol=1e-6)


def test_fixed_gates_receive_no_gradient(rng):
    fusion = DynamicFusion(DIMS, 4, rng)
    fused, weights = fusion(*streams(rng), fixedGates=True)
    assert np.allclose(weights.data, 1 / 3)
    fused.sum().backward()
    assert all(p.grad is None for p in fusion.gate.parameters())
    assert fusion.contentProjection.weight.grad is not None


def test_fusion_rejects_mismatched_frames(rng):
    fusion = DynamicFusion(DIMS, 4, rng)
    with pytest.raises(ShapeError):
        fusion(Tensor(np.ones((1, 4, 3))), Tensor(np.ones((1, 5, 2))), Tensor(np.ones((1, 2))))


def test_style_heads_start_at_zero(rng):
    style = StyleInjection(DIMS, 4, 2, [4, 4], rng)
    _, emotion, timbre = streams(rng)
    params = style(timbre, emotion)
    assert len(params) == 2
    for gamma, beta, alpha in params:
        for value in (gamma, beta, alpha):
            assert value.shape == (1, 4)
            assert np.allclose(value.data, 0.0)


def test_style_params_are_deterministic(rng):
    style = StyleInjection(DIMS, 4, 2, [4], rng)
    style.heads[0].weight.data[:] = rng.normal(size=style.heads[0].weight.shape)
    _, emotion, timbre = streams(rng)
    first, second = style(timbre, emotion), style(timbre, emotion)
    for a, b in zip(first[0], second[0]):
        assert np.array_equal(a.data, b.data)


def test_style_params_match_dense_oracle():
    rng = np.random.default_rng(21)
    with float64Mode():
        style = StyleInjection(DIMS, 4, 1, [3], rng)
        style.heads[0].weight.data[:] = rng.normal(size=style.heads[0].weight.shape)
        emotion, timbre = rng.normal(size=(1, 5, 2)), rng.normal(size=(1, 2))
        gamma, beta, alpha = style(Tensor(timbre), Tensor(emotion))[0]

    def project(layer, x):
        return x @ layer.weight.data + layer.bias.data

    attention = style.crossAttention.attention
    query = project(style.emotionProjection, emotion[0])
    context = project(style.timbreProjection, timbre[0])[None, :]
    scores = project(attention.query, query) @ project(attention.key, context).T / np.sqrt(4)
    scores = np.exp(scores - scores.max(axis=1, keepdims=True))
    scores /= scores.sum(axis=1, keepdims=True)
    pooled = (query + project(attention.output, scores @ project(attention.value, context))).mean(axis=0)
    out = project(style.heads[0], pooled)
    assert np.allclose(np.concatenate([gamma.data[0], beta.data[0], alpha.data[0]]), out, atol=1e-10)


def test_single_timbre_context_adds_one_vector_to_every_frame():
    rng = np.random.default_rng(5)
    with float64Mode():
        style = StyleInjection(DIMS, 4, 2, [4], rng)
        attention = style.crossAttention.attention
        attention.output.weight.data[:] = rng.normal(size=attention.output.weight.shape)
        attention.output.bias.data[:] = rng.normal(size=attention.output.bias.shape)
        timbre = rng.normal(size=(1, 2))
        emotions = [rng.normal(size=(1, 6, 2)), 3.0 * rng.normal(size=(1, 6, 2))]
        attended = [style.attend(Tensor(timbre), Tensor(e)).data[0] for e in emotions]

    def project(layer, x):
        return x @ layer.weight.data + layer.bias.data

    added = project(attention.output, project(attention.value, project(style.timbreProjection, timbre[0])))
    for emotion, frames in zip(emotions, attended):
        query = project(style.emotionProjection, emotion[0])
        assert frames.shape == (6, 4)
        assert np.allclose(frames, query + added[None, :], atol=1e-10)


def test_hsan_examples():
    x = Tensor([[[1.0, 2.0, 3.0]]])
    zero = Tensor([[0.0]])
    assert np.allclose(hsan(x, zero, zero, zero).data, instanceNorm(x).data)
    assert np.allclose(hsan(x, zero, Tensor([[1.0]]), zero).data, instanceNorm(x).data + 1.0)
    out = hsan(x, zero, zero, Tensor([[50.0]]), lam=0.1).data[0, 0]
    assert np.allclose(out, [-1.1247, 0.2, 1.5247], atol=1e-4)


def test_hsan_rejects_wrong_style_shape():
    with pytest.raises(ShapeError):
        hsan(Tensor(np.ones((1, 2, 3))), Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))))


def test_generator_forward(tinyModelConfig, rng):
    generator = SpeechGenerator(tinyModelConfig, rng)
    content, emotion, timbre = (Tensor(rng.normal(size=(2, 6, 8))), Tensor(rng.normal(size=(2, 6, 4))),
                                Tensor(rng.normal(size=(2, 8))))
    out = generator(content, emotion, timbre)
    assert out["features"].shape == (2, 8, 6)
    assert out["gates"].shape == (2, 6, 3)
    assert all(np.allclose(p.data, 0.0) for triple in out["styleParams"] for p in triple)
    ablated = generator(content, emotion, timbre, noDyGate=True, noHsan=True)
    assert ablated["styleParams"] is None
    assert np.allclose(ablated["gates"].data, 1 / 3)


def test_generator_needs_all_three_streams(tinyModelConfig, rng):
    generator = SpeechGenerator(tinyModelConfig, rng)
    with pytest.raises(ValueError):
        generator(Tensor(np.ones((1, 4, 8))), None, Tensor(np.ones((1, 8))))


def test_gate_entropy_is_zero_for_balanced_gates():
    balanced = Tensor(np.full((2, 5, 3), 1 / 3))
    assert gateEntropyLoss(balanced).item() == pytest.approx(0.0, abs=1e-6)
    peaked = Tensor(np.tile([0.98, 0.01, 0.01], (2, 5, 1)))
    assert gateEntropyLoss(peaked).item() > 0.5
    assert gateEntropyLoss(peaked, fixedGates=True).item() == 0.0


def test_similarity_loss_zero_for_matching_style(rng):
    style = {"timbre": rng.normal(size=(2, 4)), "emotion": rng.normal(size=(2, 3))}
    assert similarityLoss(style, style).item() == pytest.approx(0.0, abs=1e-6)
    flipped = {k: -v for k, v in style.items()}
    assert similarityLoss(flipped, style).item() == pytest.approx(4.0, abs=1e-5)


def test_generator_total_with_default_weights():
    weights = {"gate": 1.0, "adversarial": 3.0, "featureMatching": 3.0, "time": 0.1, "frequency": 1.0, "similarity": 1.0}
    assert generatorTotalLoss({term: 0.0 for term in GENERATOR_TERMS}, weights).item() == 0.0
    assert generatorTotalLoss({term: 1.0 for term in GENERATOR_TERMS}, weights).item() == pytest.approx(9.1)
    partial = {term: 1.0 for term in GENERATOR_TERMS if term != "similarity"}
    assert generatorTotalLoss(partial, weights | {"similarity": 0.0}).item() == pytest.approx(8.1)


def test_stretch_frames():
    sequence = np.array([[1, 2, 3]])
    assert stretchFrames(sequence, 6).tolist() == [[1, 1, 2, 2, 3, 3]]
    assert stretchFrames(sequence, 3) is sequence
    assert stretchFrames(np.arange(6), 3).tolist() == [0, 2, 4]


def test_generated_features_follow_hsan_style(tinyModelConfig, rng):
    generator = SpeechGenerator(tinyModelConfig, rng)
    for head in generator.style.heads:
        head.bias.data[:] = rng.normal(size=head.bias.shape)
    content, emotion, timbre = (Tensor(rng.normal(size=(1, 6, 8))), Tensor(rng.normal(size=(1, 6, 4))),
                                Tensor(rng.normal(size=(1, 8))))
    styled = generator(content, emotion, timbre)["features"].data
    plain = generator(content, emotion, timbre, noHsan=True)["features"].data
    assert not np.allclose(styled, plain)
