import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from factorvox.autodiff import Tensor, float64Mode
from factorvox.quantizer import ResidualVectorQuantizer, nearestCodeword


def makeQuantizer(books, decay: float = 0.99, commitment: float = 0.25):
    books = np.asarray(books, dtype=np.float64)
    config = {"numStages": books.shape[0], "codebookSize": books.shape[1], "codeDim": books.shape[2],
              "commitmentWeight": commitment, "emaDecay": decay, "deadCodeSteps": 200}
    quantizer = ResidualVectorQuantizer(config, np.random.default_rng(0))
    quantizer.setCodebooks(books)
    return quantizer


def test_exact_codeword_single_stage():
    quantizer = makeQuantizer([[[0.0, 0.0], [1.0, 1.0]]])
    result = quantizer.quantize(Tensor([[1.0, 1.0]]))
    assert result["tokens"].tolist() == [[1]]
    assert np.allclose(result["residualNorms"], 0.0)
    assert result["commitLoss"].item() == pytest.approx(0.0)


def test_two_stage_hand_example():
    quantizer = makeQuantizer([[[0.0, 0.0], [1.0, 1.0]], [[0.0, 0.0], [-0.1, 0.2]]])
    with float64Mode():
        result = quantizer.quantize(Tensor([[0.9, 1.2]]))
    assert result["tokens"][:, 0].tolist() == [1, 1]
    assert np.allclose(result["quantized"].data, [[0.9, 1.2]])
    assert result["residualNorms"][-1, 0] == pytest.approx(0.0, abs=1e-12)


def test_commitment_loss_hand_value():
    quantizer = makeQuantizer([[[0.0, 0.0], [5.0, 5.0]]], commitment=0.25)
    result = quantizer.quantize(Tensor([[1.0, 1.0]]))
    assert result["tokens"].tolist() == [[0]]
    assert result["commitLoss"].item() == pytest.approx(0.5)


def test_straight_through_gradient_is_identity():
    quantizer = makeQuantizer([[[0.0, 0.0], [1.0, 1.0]]], commitment=0.0)
    x = Tensor([[0.8, 1.3], [0.1, -0.2]], requiresGrad=True)
    result = quantizer.quantize(x)
    (result["quantized"] * Tensor([[1.0, 2.0], [3.0, 4.0]])).sum().backward()
    assert np.allclose(x.grad, [[1.0, 2.0], [3.0, 4.0]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 4), st.integers(2, 6))
def test_residual_norms_never_grow(seed, stages, size):
    rng = np.random.default_rng(seed)
    books = rng.normal(size=(stages, size, 3))
    books[:, 0] = 0.0
    quantizer = makeQuantizer(books)
    x = rng.normal(size=(10, 3))
    with float64Mode():
        result = quantizer.quantize(Tensor(x))
    norms = np.vstack([np.linalg.norm(x, axis=1)[None], result["residualNorms"]])
    assert np.all(np.diff(norms, axis=0) <= 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_tokens_match_exhaustive_nearest_neighbour(seed):
    rng = np.random.default_rng(seed)
    books = rng.normal(size=(2, 4, 2))
    books[:, 0] = 0.0
    quantizer = makeQuantizer(books)
    x = rng.normal(size=(6, 2))
    with float64Mode():
        tokens = quantizer.quantize(Tensor(x))["tokens"]
    residual = x.copy()
    for stage in range(2):
        expected = [int(np.argmin([np.sum((r - c) ** 2) for c in books[stage]])) for r in residual]
        assert tokens[stage].tolist() == expected
        residual = residual - books[stage][expected]


def test_tokens_are_deterministic():
    rng = np.random.default_rng(4)
    books = rng.normal(size=(2, 8, 3))
    books[:, 0] = 0.0
    x = Tensor(rng.normal(size=(5, 3)))
    assert np.array_equal(makeQuantizer(books).quantize(x)["tokens"], makeQuantizer(books).quantize(x)["tokens"])


def test_nearest_codeword_ties_go_to_lowest_index():
    assert nearestCodeword(np.array([[0.5]]), np.array([[0.0], [1.0]])).tolist() == [0]


@pytest.mark.parametrize("decay, expected", [(0.0, [2.0, 2.0]), (1.0, [0.0, 0.0]), (0.5, [1.0, 1.0])])
def test_ema_update(decay, expected):
    quantizer = makeQuantizer([[[0.0, 0.0], [0.0, 0.0], [3.0, 3.0]]], decay=decay)
    vectors = np.array([[2.0, 2.0], [2.0, 2.0]])
    quantizer.emaUpdate([(vectors, np.array([1, 1]))])
    assert np.allclose(quantizer.codebooks[0].data[1], expected)
    assert np.allclose(quantizer.codebooks[0].data[0], 0.0)
    assert np.allclose(quantizer.codebooks[0].data[2], [3.0, 3.0])


def test_dead_codes_are_reseeded():
    quantizer = makeQuantizer([[[0.0, 0.0], [9.0, 9.0]]])
    quantizer.config["deadCodeSteps"] = 2
    vectors = np.array([[0.1, 0.1]])
    for _ in range(2):
        quantizer.emaUpdate([(vectors, np.array([0]))], np.random.default_rng(0))
    assert np.allclose(quantizer.codebooks[0].data[1], [0.1, 0.1])


def test_lookup_sums_stage_codewords():
    quantizer = makeQuantizer([[[0.0, 0.0], [1.0, 1.0]], [[0.0, 0.0], [-0.1, 0.2]]])
    assert np.allclose(quantizer.lookup(np.array([[1], [1]])), [[0.9, 1.2]])
    with pytest.raises(ValueError):
        quantizer.lookup(np.array([[2], [0]]))


def test_config_and_codebook_validation():
    with pytest.raises(ValueError):
        makeQuantizer(np.ones((1, 2, 2)))
    config = {"numStages": 0, "codebookSize": 4, "codeDim": 2, "commitmentWeight": 0.25, "emaDecay": 0.99}
    with pytest.raises(ValueError):
        ResidualVectorQuantizer(config, np.random.default_rng(0))
    with pytest.raises(ValueError):
        ResidualVectorQuantizer(config | {"numStages": 1, "emaDecay": 1.5}, np.random.default_rng(0))
