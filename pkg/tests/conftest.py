import copy
import os

import numpy as np
import pytest

from factorvox.core import customlogger
from factorvox.core.utils import defaultConfig, deepMerge

TINY_MODEL = {
    "codec": {"channels": 8, "featureDim": 8, "decoderChannels": 8},
    "encoder": {"width": 8, "heads": 2, "contentDim": 8, "emotionDim": 4, "timbreDim": 8},
    "rvq": {
        "content": {"numStages": 2, "codebookSize": 8, "codeDim": 8,
                    "commitmentWeight": 0.25, "emaDecay": 0.99, "deadCodeSteps": 200},
        "emotion": {"numStages": 1, "codebookSize": 4, "codeDim": 4,
                    "commitmentWeight": 0.25, "emaDecay": 0.99, "deadCodeSteps": 200},
        "timbre": {"numStages": 1, "codebookSize": 4, "codeDim": 8,
                   "commitmentWeight": 0.25, "emaDecay": 0.99, "deadCodeSteps": 200},
    },
    "generator": {"width": 8, "blocks": 2, "heads": 2, "hsanLambda": 0.1},
    "discriminator": {"scales": 2, "channels": [4, 8]},
    "mi": {"hidden": 8, "estimatorSteps": 1},
    "speakerEmbedder": {"channels": 8, "dim": 8, "steps": 2},
}

TINY_CORPUS = {"minSymbols": 4, "maxSymbols": 6}

TINY_STAGE = {"steps": 3, "batchSize": 4, "segmentFrames": 8, "checkpointEvery": 2,
              "keepLast": 1, "logEvery": 1, "prefetch": 1}


def makeTinyConfig(runDir: str, seed: int = 0) -> dict:
    config = defaultConfig()
    deepMerge(config, {
        "seed": seed,
        "runDir": str(runDir),
        "corpusDir": os.path.join(str(runDir), "corpus"),
        "corpus": TINY_CORPUS,
        "splits": {"train": 12, "seen": 16, "unseen": 8},
        "model": copy.deepcopy(TINY_MODEL),
        "stages": {"1": TINY_STAGE, "2": TINY_STAGE, "3": TINY_STAGE | {"batchSize": 2}},
        "melResolutions": [[256, 64, 20]],
        "evaluation": {"reconstructionTriples": 2, "compositionalTriples": 2, "workers": 1},
    })
    return config


@pytest.fixture
def tinyModelConfig():
    config = defaultConfig()["model"]
    deepMerge(config, copy.deepcopy(TINY_MODEL), "model.")
    return config


@pytest.fixture
def tinyConfig(tmp_path):
    return makeTinyConfig(tmp_path / "run")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def logger():
    return customlogger.setupLogger(toFile=False)
