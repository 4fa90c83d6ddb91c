import copy

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from factorvox.core import settings as factorSettings
from factorvox.data.toyCorpus import synthesizeSample
from factorvox.evaluation.metrics import (tokenEntropy, codeMi, utteranceCode, pearson, dtwAlign, contourMetrics,
                                          f0Metrics, cosine, fitTokenSymbolMap, decodeSymbols, editDistance,
                                          symbolErrorRate)

contours = st.lists(st.floats(-3.0, 3.0, allow_nan=False), min_size=2, max_size=12)


def dtwOracle(a, b) -> float:
    g = np.full((len(a) + 1, len(b) + 1), np.inf)
    g[0, 0] = 0.0
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            g[i, j] = abs(a[i - 1] - b[j - 1]) + min(g[i - 1, j - 1], g[i - 1, j], g[i, j - 1])
    return g[-1, -1]


@settings(max_examples=60, deadline=None)
@given(contours, contours)
def test_dtw_cost_matches_dynamic_programme(a, b):
    cost, indexA, indexB = dtwAlign(a, b)
    assert cost == pytest.approx(dtwOracle(a, b), abs=1e-9)
    assert indexA[0] == 0 and indexB[0] == 0
    assert indexA[-1] == len(a) - 1 and indexB[-1] == len(b) - 1
    assert np.all(np.diff(indexA) >= 0) and np.all(np.diff(indexB) >= 0)


def test_dtw_rejects_empty():
    with pytest.raises(ValueError):
        dtwAlign([], [1.0])


def test_pearson_invariances():
    a = np.array([0.1, 0.5, 0.2, 0.9, 0.4])
    assert pearson(a, 2.0 * a + 3.0) == pytest.approx(1.0)
    assert pearson(a, -a) == pytest.approx(-1.0)
    assert pearson(a, np.ones(5)) is None
    assert pearson([1.0], [2.0]) is None


def test_contour_metrics_identical_and_time_warped():
    a = np.log(np.array([110.0, 115.0, 125.0, 140.0, 130.0, 120.0]))
    same = contourMetrics(a, a)
    assert same["logRmse"] == pytest.approx(0.0)
    assert same["corr"] == pytest.approx(1.0)
    warped = contourMetrics(a, np.repeat(a, 2))
    assert warped["logRmse"] == pytest.approx(0.0)
    assert warped["pathLength"] >= 2 * len(a)


def test_contour_metrics_constant_offset():
    a = np.log(np.array([100.0, 160.0, 220.0, 280.0, 340.0, 400.0]))
    shifted = contourMetrics(a, a + 0.05)
    assert shifted["logRmse"] == pytest.approx(0.05, abs=1e-9)
    assert shifted["corr"] == pytest.approx(1.0)


def test_f0_metrics_on_synthetic_speech():
    spec = copy.deepcopy(factorSettings.defaultCorpusSpec)
    wave = synthesizeSample(spec, 1, 1, [3, 4, 5, 6, 2, 1], seed=0)["waveform"]
    metrics = f0Metrics(wave, wave)
    assert metrics["logRmse"] == pytest.approx(0.0)
    assert metrics["corr"] == pytest.approx(1.0)
    assert f0Metrics(np.zeros_like(wave), wave) is None


def test_entropy_of_uniform_codes():
    tokens = np.repeat(np.arange(4), 25)
    assert tokenEntropy(tokens, correction=False) == pytest.approx(np.log(4))
    assert tokenEntropy(tokens) == pytest.approx(np.log(4) + 3 / 200)
    with pytest.raises(ValueError):
        tokenEntropy([])


def test_code_mi_of_identical_and_relabelled_codes():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 6, size=500)
    assert codeMi(a, a) == pytest.approx(tokenEntropy(a))
    relabelled = np.array([5, 3, 1, 0, 2, 4])[a]
    assert codeMi(a, relabelled) == pytest.approx(tokenEntropy(a))


def test_code_mi_of_independent_codes_is_near_zero():
    rng = np.random.default_rng(1)
    a, b = rng.integers(0, 4, size=20_000), rng.integers(0, 4, size=20_000)
    assert codeMi(a, b) < 0.02
    with pytest.raises(ValueError):
        codeMi(a, b[:10])


def test_utterance_code_is_the_mode():
    assert utteranceCode([3, 3, 1, 1, 2]) == 1
    assert utteranceCode([[7, 7, 2]]) == 7


def test_cosine():
    assert cosine([1.0, 0.0], [2.0, 0.0]) == pytest.approx(1.0)
    assert cosine([1.0, 0.0], [0.0, 3.0]) == pytest.approx(0.0)
    assert cosine([1.0, 2.0], [-1.0, -2.0]) == pytest.approx(-1.0)
    assert cosine([0.0, 0.0], [1.0, 1.0]) == 0.0


def test_token_symbol_map_and_decoding():
    mapping = fitTokenSymbolMap([[0, 0, 1, 1, 2]], [[5, 5, 6, 6, 6]], codebookSize=4, alphabetSize=8)
    assert mapping.tolist() == [5, 6, 6, -1]
    assert decodeSymbols([0, 0, 1, 1, 3, 3], mapping, framesPerSymbol=2).tolist() == [5, 6, -1]
    assert decodeSymbols([0, 1, 1, 1], mapping, framesPerSymbol=4).tolist() == [6]


def test_symbol_error_rate():
    reference = [1, 2, 3, 4]
    assert symbolErrorRate(reference, reference) == 0.0
    assert symbolErrorRate([1, 2, 9, 4], reference) == pytest.approx(0.25)
    assert symbolErrorRate([1, 2, 4], reference) == pytest.approx(0.25)
    assert symbolErrorRate([], reference) == pytest.approx(1.0)
    assert editDistance("kitten", "sitting") == 3
    with pytest.raises(ValueError):
        symbolErrorRate([1], [])
