import json
import os

import numpy as np
import pytest

from factorvox.core.utils import (defaultConfig, deepMerge, parseOverride, resolveConfig, stateHash, stepRng,
                                  writeSnapshot, atomicDirectory)


def test_defaults_carry_reference_loss_weights():
    config = resolveConfig()
    assert config["encoderLossWeights"]["contrastive"] == 5.0
    assert config["encoderLossWeights"]["prosody"] == 2.0
    assert config["generatorLossWeights"]["adversarial"] == 3.0
    assert config["generatorLossWeights"]["time"] == 0.1
    assert config["profile"] == "desk"
    assert config["corpusDir"] == os.path.join(config["runDir"], "corpus")


def test_overrides_parse_json_values():
    assert parseOverride("stages.1.steps=10") == (["stages", "1", "steps"], 10)
    assert parseOverride("runDir=runs/a") == (["runDir"], "runs/a")
    assert parseOverride("stages.3.noHsan=true")[1] is True
    with pytest.raises(ValueError):
        parseOverride("steps")
    with pytest.raises(ValueError):
        parseOverride("=3")


def test_precedence_file_then_overrides_then_seed(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 3, "stages": {"1": {"steps": 40}}, "runDir": "runs/file"}))
    config = resolveConfig(str(path), ["stages.1.steps=7"], seed=11)
    assert config["stages"]["1"]["steps"] == 7
    assert config["stages"]["1"]["batchSize"] == defaultConfig()["stages"]["1"]["batchSize"]
    assert config["runDir"] == "runs/file"
    assert config["seed"] == 11


def test_full_profile_sets_full_scale_iterations():
    config = resolveConfig(overrides=["profile=full"])
    assert config["stages"]["1"]["steps"] == 92000
    assert config["stages"]["3"]["batchSize"] == 72
    assert resolveConfig(overrides=["profile=full", "stages.1.steps=5"])["stages"]["1"]["steps"] == 5
    with pytest.raises(ValueError):
        resolveConfig(overrides=["profile=huge"])


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(KeyError):
        resolveConfig(overrides=["learningRate=3"])
    with pytest.raises(KeyError, match="stages.2.noMI"):
        resolveConfig(overrides=["stages.2.noMI=true"])
    with pytest.raises(KeyError, match="stages.1.steps.max"):
        resolveConfig(overrides=["stages.1.steps.max=3"])
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"epochs": 3}))
    with pytest.raises(KeyError):
        resolveConfig(str(path))
    path.write_text(json.dumps({"stages": {"3": {"noDYGate": True}}}))
    with pytest.raises(KeyError, match="stages.3.noDYGate"):
        resolveConfig(str(path))
    path.write_text("{not json")
    with pytest.raises(ValueError):
        resolveConfig(str(path))
    with pytest.raises(FileNotFoundError):
        resolveConfig(str(tmp_path / "missing.json"))


def test_deep_merge_keeps_siblings():
    base = {"a": {"x": 1, "y": 2}, "b": 3}
    assert deepMerge(base, {"a": {"y": 5}}) == {"a": {"x": 1, "y": 5}, "b": 3}


def test_state_hash_tracks_values_and_names():
    tensors = {"w": np.arange(6.0).reshape(2, 3), "b": np.zeros(3)}
    assert stateHash(tensors) == stateHash({"b": np.zeros(3), "w": np.arange(6.0).reshape(2, 3)})
    assert stateHash(tensors) != stateHash({"w": np.arange(6.0).reshape(3, 2), "b": np.zeros(3)})
    assert stateHash(tensors) != stateHash({"w2": tensors["w"], "b": tensors["b"]})


def test_step_rng_is_replayable():
    assert np.array_equal(stepRng(0, 1, 5).normal(size=4), stepRng(0, 1, 5).normal(size=4))
    assert not np.array_equal(stepRng(0, 1, 5).normal(size=4), stepRng(0, 1, 6).normal(size=4))


def test_snapshot_is_written(tmp_path):
    path = writeSnapshot(str(tmp_path / "run"), {"seed": 2})
    with open(path) as f:
        assert json.load(f) == {"seed": 2}


def test_atomic_directory_replaces_target(tmp_path):
    target = str(tmp_path / "ckpt")

    def write(contents):
        def writer(directory):
            with open(os.path.join(directory, "data.txt"), "w") as f:
                f.write(contents)
        return writer

    atomicDirectory(target, write("first"))
    atomicDirectory(target, write("second"))
    with open(os.path.join(target, "data.txt")) as f:
        assert f.read() == "second"
    assert sorted(os.listdir(tmp_path)) == ["ckpt"]


def test_atomic_directory_leaves_target_on_failure(tmp_path):
    target = str(tmp_path / "ckpt")
    os.makedirs(target)

    def broken(directory):
        raise RuntimeError("disk full")

    with pytest.raises(RuntimeError):
        atomicDirectory(target, broken)
    assert sorted(os.listdir(tmp_path)) == ["ckpt"]


def test_nested_overrides_reach_existing_flags():
    config = resolveConfig(overrides=["stages.2.noMi=true", "model.rvq.content.codebookSize=16"])
    assert config["stages"]["2"]["noMi"] is True
    assert "noMI" not in config["stages"]["2"]
    assert config["model"]["rvq"]["content"]["codebookSize"] == 16
