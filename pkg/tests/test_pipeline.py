import os

import numpy as np
import pytest

from conftest import makeTinyConfig
from factorvox.core import tensorio
from factorvox.data.toyCorpus import buildCorpus, contentPairs, loadManifest
from factorvox.evaluation import harness
from factorvox.training import checkpoints as ckpt
from factorvox.training import models, pipeline


def synthesize(config: dict):
    buildCorpus(config["corpus"], config["splits"], config["seed"], config["corpusDir"])


def finalHash(config: dict, stage: int) -> str:
    return tensorio.readJson(os.path.join(ckpt.finalCheckpoint(config["runDir"], stage), "manifest.json"))["hash"]


@pytest.fixture(scope="module")
def trainedRun(tmp_path_factory):
    from factorvox.core import customlogger
    logger = customlogger.setupLogger(toFile=False)
    config = makeTinyConfig(tmp_path_factory.mktemp("trained"))
    synthesize(config)
    for stage in (1, 2, 3):
        pipeline.stageTrainers[stage](config, logger)
    return config, logger


def test_stage_three_needs_earlier_checkpoints(tinyConfig, logger):
    with pytest.raises(pipeline.PrerequisiteError, match="missing prerequisite checkpoint: stage 1"):
        pipeline.trainStage3(tinyConfig, logger)
    with pytest.raises(pipeline.PrerequisiteError):
        pipeline.loadEncoder(tinyConfig)


def test_divergence_names_the_last_good_checkpoint():
    with pytest.raises(pipeline.TrainingDiverged, match="step-0000004"):
        pipeline.checkFinite(2, 5, {"total": float("nan"), "prosody": 0.1}, "runs/x/stage2/step-0000004")
    pipeline.checkFinite(2, 5, {"total": 1.0}, None)


def test_divergence_rolls_back_to_the_last_good_checkpoint(tmp_path, logger, rng):
    from factorvox.nn.modules import Linear
    layer = Linear(2, 2, rng)
    initial = layer.weight.data.copy()
    config = {"runDir": str(tmp_path / "run"), "model": {}}
    cfg = {"steps": 6, "checkpointEvery": 2, "keepLast": 2, "logEvery": 0, "prefetch": 1}

    def stepFn(step, batch):
        layer.weight.data += 1.0
        return {"total": float("nan") if step == 3 else 1.0}

    with pytest.raises(pipeline.TrainingDiverged, match="step-0000002"):
        pipeline._loop(config, 2, cfg, 0, lambda step: step, stepFn, {"layer": layer}, {}, logger)
    assert np.allclose(layer.weight.data, initial + 2.0)
    assert not os.path.isdir(ckpt.finalCheckpoint(config["runDir"], 2))


def test_batch_energy_targets_stay_in_decibels():
    hop, frames = 4, 6
    energyDb = np.linspace(-42.0, -12.0, frames)
    sample = {"waveform": np.zeros(frames * hop), "logF0": np.full(frames, np.log(120.0)),
              "voiced": np.ones(frames, dtype=bool), "energyDb": energyDb,
              "speaker": 0, "emotion": 1, "contentGroup": 0}
    batch = pipeline.makeBatch([sample], 1, 0, {"segmentFrames": frames, "batchSize": 2}, 0, hop)
    assert batch["energy"].shape == (2, frames)
    assert np.array_equal(batch["energy"][0], energyDb)
    assert np.array_equal(batch["energy"][1], energyDb)


def test_shared_optimizer_parameters_are_rejected(tinyModelConfig):
    from factorvox.autodiff.optim import Adam
    codec = models.buildCodec(tinyModelConfig, 0)
    with pytest.raises(RuntimeError):
        pipeline.assertDisjoint(Adam(codec.namedParameters()), Adam(codec.decoder.namedParameters()))


@pytest.mark.slow
def test_batches_are_deterministic_and_paired(tinyConfig):
    synthesize(tinyConfig)
    samples = pipeline.loadTrainingSet(tinyConfig)
    groups = {}
    for index, sample in enumerate(samples):
        groups.setdefault(sample["contentGroup"], []).append(index)
    cfg = tinyConfig["stages"]["2"]
    first = pipeline.makeBatch(samples, 2, 5, cfg, 0, 160, groups)
    second = pipeline.makeBatch(samples, 2, 5, cfg, 0, 160, groups)
    assert np.array_equal(first["wave"], second["wave"])
    assert first["wave"].shape == (cfg["batchSize"], cfg["segmentFrames"] * 160)
    groupsInBatch = first["contentGroup"]
    assert all(groupsInBatch[i] == groupsInBatch[i + 1] for i in range(0, len(groupsInBatch), 2))
    assert len(contentPairs(loadManifest(tinyConfig["corpusDir"], "train"))) == 6


@pytest.mark.slow
def test_trained_run_produces_all_checkpoints(trainedRun):
    config, _ = trainedRun
    for stage in (1, 2, 3):
        manifest = tensorio.readJson(os.path.join(ckpt.finalCheckpoint(config["runDir"], stage), "manifest.json"))
        assert manifest["step"] == 3 and manifest["stage"] == stage
        assert len(ckpt.listStepCheckpoints(config["runDir"], stage)) == 1
        assert os.path.isfile(os.path.join(ckpt.stageDir(config["runDir"], stage), "train.log"))


@pytest.mark.slow
def test_generation_is_deterministic_and_sized(trainedRun):
    config, _ = trainedRun
    inference = pipeline.loadInferenceModels(config)
    samples = harness.loadSplit(config, "seen")
    codes = [models.encodeWaveform(inference["codec"], inference["encoder"], s["waveform"]) for s in samples[:3]]
    composed = {"content": codes[0]["content"], "emotion": codes[1]["emotion"], "timbre": codes[2]["timbre"]}
    args = (inference["codec"], inference["encoder"], inference["generator"], composed)
    wave = models.generateWaveform(*args)
    assert np.array_equal(wave, models.generateWaveform(*args))
    frames = np.asarray(codes[0]["content"]["tokens"]).shape[-1]
    assert len(wave) == frames * config["model"]["hop"]
    assert np.all(np.isfinite(wave))
    with pytest.raises(ValueError):
        models.generateWaveform(*args[:3], {"content": codes[0]["content"], "timbre": codes[2]["timbre"]})


@pytest.mark.slow
def test_evaluation_report_and_exports(trainedRun, tmp_path):
    config, logger = trainedRun
    report = harness.evaluate(config, logger, "seen")
    assert report["utterances"] == 16
    dis = report["disentanglement"]
    assert set(dis["codeMi"]) == {"timbre:emotion", "timbre:content", "emotion:content"}
    assert all(value >= 0.0 for value in dis["codeMi"].values())
    assert dis["miWarning"] is True
    for row in dis["probeMatrix"].values():
        assert all(0.0 <= accuracy <= 1.0 for accuracy in row.values())
    assert report["generation"]["reconstruction"]["count"] == 2
    assert report["generation"]["compositional"]["count"] == 2

    path = harness.writeReport(report, str(tmp_path / "seen.json"), str(tmp_path / "seen.csv"))
    assert tensorio.readJson(path)["split"] == "seen"
    exported = harness.exportEmbeddings(config, "unseen", "timbre", str(tmp_path / "timbre.mft"))
    assert exported["rows"] == 8 and exported["dim"] == config["model"]["encoder"]["timbreDim"]
    assert len(tensorio.readJson(str(tmp_path / "timbre.mft.json"))["labels"]) == 8


@pytest.mark.slow
def test_stage_one_is_reproducible_and_resumable(tmp_path, logger):
    straight = makeTinyConfig(tmp_path / "straight")
    synthesize(straight)
    pipeline.trainStage1(straight, logger)

    again = makeTinyConfig(tmp_path / "again")
    again["corpusDir"] = straight["corpusDir"]
    pipeline.trainStage1(again, logger)
    assert finalHash(again, 1) == finalHash(straight, 1)

    resumed = makeTinyConfig(tmp_path / "resumed")
    resumed["corpusDir"] = straight["corpusDir"]
    resumed["stages"]["1"]["steps"] = 2
    pipeline.trainStage1(resumed, logger)
    resumed["stages"]["1"] |= {"steps": 3, "resume": True}
    pipeline.trainStage1(resumed, logger)
    assert finalHash(resumed, 1) == finalHash(straight, 1)


@pytest.mark.slow
def test_zero_steps_keep_the_initialization(tmp_path, logger):
    config = makeTinyConfig(tmp_path / "zero")
    synthesize(config)
    config["stages"]["1"]["steps"] = 0
    pipeline.trainStage1(config, logger)
    fresh = {"codec": models.buildCodec(config["model"], 0), "discriminator": models.buildDiscriminator(config["model"], 0)}
    assert finalHash(config, 1) == ckpt.modulesHash(fresh)


@pytest.mark.slow
def test_earlier_stages_stay_frozen(tmp_path, logger):
    config = makeTinyConfig(tmp_path / "frozen")
    synthesize(config)
    pipeline.trainStage1(config, logger)
    codecBefore = ckpt.modulesHash({"codec": pipeline.loadCodec(config)})
    pipeline.trainStage2(config, logger)
    assert ckpt.modulesHash({"codec": pipeline.loadCodec(config)}) == codecBefore

    config["stages"]["3"]["unfreezeFraction"] = 1.0
    pipeline.trainStage3(config, logger)
    decoder = pipeline.loadInferenceModels(config)["codec"].decoder
    assert ckpt.modulesHash({"decoder": decoder}) == ckpt.modulesHash({"decoder": pipeline.loadCodec(config).decoder})


@pytest.mark.slow
def test_ablations_train(tmp_path, logger):
    config = makeTinyConfig(tmp_path / "ablated")
    synthesize(config)
    config["stages"]["2"] |= {"noMi": True, "noContrastive": True, "noProsody": True}
    config["stages"]["3"] |= {"noDyGate": True, "noHsan": True}
    records = []
    pipeline.trainStage1(config, logger)
    pipeline.trainStage2(config, logger, onStep=lambda step, modules: records.append(step))
    pipeline.trainStage3(config, logger)
    assert records == [0, 1, 2]
    generator = models.buildGenerator(config["model"], 0)
    ckpt.loadCheckpoint(ckpt.finalCheckpoint(config["runDir"], 3), {"generator": generator})
    initial = models.buildGenerator(config["model"], 0)
    assert np.array_equal(generator.fusion.gate.layers[-1].weight.data, initial.fusion.gate.layers[-1].weight.data)
