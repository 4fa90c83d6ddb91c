import os

import numpy as np
import pytest

from factorvox.autodiff import Tensor
from factorvox.autodiff.optim import Adam
from factorvox.nn import Module, Linear
from factorvox.training import checkpoints as ckpt


class Scaled(Module):

    def __init__(self, rng):
        self.linear = Linear(3, 2, rng)
        self.scale = Tensor(np.array([2.0, 0.5]))

    def forward(self, x):
        return self.linear(x) * self.scale


def trainedPair(rng) -> tuple:
    model = Scaled(rng)
    optimizer = Adam(model.namedParameters(), learningRate=1e-2)
    (model(Tensor(rng.normal(size=(4, 3)))) ** 2).sum().backward()
    optimizer.step()
    return model, optimizer


def test_save_and_load_restore_state(tmp_path, rng):
    model, optimizer = trainedPair(rng)
    path = str(tmp_path / "stage1" / "final")
    digest = ckpt.saveCheckpoint(path, {"model": model}, {"model": optimizer}, 1, {"model": {}}, 1)
    assert digest == ckpt.modulesHash({"model": model})

    fresh = Scaled(np.random.default_rng(99))
    fresh.scale.data[:] = 0.0
    freshOptimizer = Adam(fresh.namedParameters(), learningRate=1e-2)
    manifest = ckpt.loadCheckpoint(path, {"model": fresh}, {"model": freshOptimizer})
    assert manifest["step"] == 1 and manifest["hash"] == digest
    assert ckpt.modulesHash({"model": fresh}) == digest
    assert np.allclose(fresh.scale.data, [2.0, 0.5])
    assert freshOptimizer.state.step == 1
    for key, value in optimizer.stateDict().items():
        assert np.array_equal(freshOptimizer.stateDict()[key], value)
    assert os.path.isfile(os.path.join(path, "config.snapshot.json"))


def test_missing_checkpoint_and_module(tmp_path, rng):
    model, _ = trainedPair(rng)
    with pytest.raises(FileNotFoundError, match="missing prerequisite checkpoint"):
        ckpt.loadCheckpoint(str(tmp_path / "absent"), {"model": model})
    path = str(tmp_path / "ckpt")
    ckpt.saveCheckpoint(path, {"model": model}, {}, 0, {"model": {}}, 1)
    with pytest.raises(KeyError):
        ckpt.loadCheckpoint(path, {"other": model})


def test_prune_keeps_the_latest(tmp_path, rng):
    model, _ = trainedPair(rng)
    runDir = str(tmp_path)
    for step in (2, 4, 6):
        ckpt.saveCheckpoint(ckpt.stepCheckpointPath(runDir, 1, step), {"model": model}, {}, step, {"model": {}}, 1)
    assert ckpt.latestCheckpoint(runDir, 1).endswith("step-0000006")
    ckpt.pruneCheckpoints(runDir, 1, keepLast=2)
    assert [os.path.basename(p) for p in ckpt.listStepCheckpoints(runDir, 1)] == ["step-0000004", "step-0000006"]
    assert ckpt.latestCheckpoint(runDir, 3) is None


def test_rewrite_replaces_previous_checkpoint(tmp_path, rng):
    model, _ = trainedPair(rng)
    path = str(tmp_path / "final")
    first = ckpt.saveCheckpoint(path, {"model": model}, {}, 1, {"model": {}}, 1)
    model.linear.weight.data += 1.0
    second = ckpt.saveCheckpoint(path, {"model": model}, {}, 2, {"model": {}}, 1)
    assert first != second
    assert ckpt.loadCheckpoint(path, {"model": Scaled(rng)})["hash"] == second
