"""Three-stage training: codec (stage 1), factor encoder (stage 2), generator (stage 3)."""

import contextlib
import os
import math
import queue
import threading

import numpy as np
from alive_progress import alive_bar

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, noGrad
from ..autodiff.optim import Adam
from ..nn.modules import frozen
from ..core import customlogger
from ..core.utils import stageConfig, stepRng, writeSnapshot
from ..data.toyCorpus import loadManifest, loadSample
from ..audio.features import multiResolutionMelLoss
from ..adversary.discriminators import discLoss, genAdvLoss
from ..encoder.factorEncoder import pooledEmbeddings
from ..encoder.encoderLosses import FACTORS, supervisedContrastive, prosodyLoss, encoderTotalLoss
from ..generator.generatorLosses import gateEntropyLoss, timeDomainLoss, similarityLoss, generatorTotalLoss
from ..mutualinfo.estimators import WarmupSchedule, miPairBounds, FACTOR_PAIRS, pairKey
from . import checkpoints as ckpt
from . import models

BALANCE_RANGE = (0.05, 2.0)


class PrerequisiteError(RuntimeError):
    """A stage was started without the checkpoints of the stages before it."""


class TrainingDiverged(RuntimeError):
    """A loss became non-finite."""


# ── data ─────────────────────────────────────────────────────────────
def loadTrainingSet(config: dict) -> list:
    manifest = loadManifest(config["corpusDir"], "train")
    fps = config["corpus"]["framesPerSymbol"]
    return [loadSample(config["corpusDir"], row, fps) for _, row in manifest.iterrows()]


def _crop(sample: dict, start: int, frames: int, hop: int) -> dict:
    end = start + frames
    return {
        "wave": sample["waveform"][start * hop:end * hop],
        "logF0": sample["logF0"][start:end],
        "voiced": sample["voiced"][start:end],
        "energy": sample["energyDb"][start:end],
        "speaker": sample["speaker"],
        "emotion": sample["emotion"],
        "contentGroup": sample["contentGroup"],
    }


def makeBatch(samples: list, stage: int, step: int, cfg: dict, seed: int, hop: int, groups: dict | None = None) -> dict:
    """Deterministic batch for (seed, stage, step).

    Stage 2 draws content-parallel pairs cropped at a shared offset, so every
    content anchor has a positive. Other stages draw independent crops.
    """
    rng = stepRng(seed, stage, step)
    frames = cfg["segmentFrames"]
    batchSize = cfg["batchSize"]
    picks = []
    if groups:
        names = sorted(groups)
        chosen = rng.choice(len(names), size=max(1, batchSize // 2), replace=len(names) < batchSize // 2)
        for g in chosen:
            members = rng.choice(groups[names[g]], size=2, replace=False)
            length = min(samples[m]["logF0"].shape[0] for m in members)
            start = int(rng.integers(0, max(1, length - frames + 1)))
            picks.extend((int(m), start) for m in members)
    else:
        for index in rng.integers(0, len(samples), size=batchSize):
            length = samples[index]["logF0"].shape[0]
            picks.append((int(index), int(rng.integers(0, max(1, length - frames + 1)))))

    crops = [_crop(samples[i], start, frames, hop) for i, start in picks]
    frames = min(len(c["logF0"]) for c in crops)
    return {
        "wave": np.stack([c["wave"][:frames * hop] for c in crops]).astype(np.float32),
        "logF0": np.stack([c["logF0"][:frames] for c in crops]),
        "voiced": np.stack([c["voiced"][:frames] for c in crops]),
        "energy": np.stack([c["energy"][:frames] for c in crops]),
        "speaker": np.array([c["speaker"] for c in crops]),
        "emotion": np.array([c["emotion"] for c in crops]),
        "contentGroup": np.array([c["contentGroup"] for c in crops]),
        "rng": rng,
    }


class Prefetcher():
    """Builds batches for steps [start, stop) on a helper thread into a bounded queue."""

    def __init__(self, build, start: int, stop: int, depth: int = 2):
        self.queue = queue.Queue(maxsize=max(1, depth))
        self.stopEvent = threading.Event()
        self.thread = threading.Thread(target=self._run, args=(build, start, stop), daemon=True)
        self.thread.start()

    def _run(self, build, start, stop):
        for step in range(start, stop):
            if self.stopEvent.is_set():
                return
            try:
                item = build(step)
            except Exception as e:
                item = e
            self.queue.put(item)

    def next(self) -> dict:
        item = self.queue.get()
        if isinstance(item, Exception):
            raise RuntimeError(f"batch preparation failed: {str(item)}")
        return item

    def close(self):
        self.stopEvent.set()
        while self.thread.is_alive():
            try:
                self.queue.get_nowait()
            except queue.Empty:
                self.thread.join(timeout=0.05)


# ── shared helpers ───────────────────────────────────────────────────
def checkFinite(stage: int, step: int, values: dict, lastGood: str | None):
    bad = [name for name, value in values.items() if not math.isfinite(value)]
    if bad:
        raise TrainingDiverged(
            f"stage {stage} diverged at step {step}: non-finite {', '.join(bad)}; "
            f"last good checkpoint: {lastGood or 'none'}")


def assertDisjoint(*optimizers):
    seen = {}
    for index, optimizer in enumerate(optimizers):
        for name, param in optimizer.parameters.items():
            if id(param) in seen:
                raise RuntimeError(f"parameter '{name}' is registered with two optimizers ({seen[id(param)]} and {index})")
            seen[id(param)] = index


def assertUnchanged(label: str, before: str, modules: dict):
    after = ckpt.modulesHash(modules)
    if after != before:
        raise RuntimeError(f"stage isolation violated: {label} parameters changed during training")


def requireCheckpoint(runDir: str, stage: int) -> str:
    path = ckpt.finalCheckpoint(runDir, stage)
    if not os.path.isfile(os.path.join(path, "manifest.json")):
        raise PrerequisiteError(f"missing prerequisite checkpoint: stage {stage} ({path})")
    return path


def _resumeOrStart(config: dict, stage: int, cfg: dict, modules: dict, optimizers: dict, logger) -> int:
    if not cfg.get("resume"):
        return 0
    latest = ckpt.latestCheckpoint(config["runDir"], stage)
    if latest is None:
        logger.info(f"Stage {stage}: resume requested but no checkpoint found, starting fresh")
        return 0
    manifest = ckpt.loadCheckpoint(latest, modules, optimizers)
    logger.info(f"Stage {stage}: resumed from {latest} at step {manifest['step']}")
    return int(manifest["step"])


def _checkpoint(config, stage, cfg, step, modules, optimizers, final: bool = False) -> str:
    path = ckpt.finalCheckpoint(config["runDir"], stage) if final else ckpt.stepCheckpointPath(config["runDir"], stage, step)
    ckpt.saveCheckpoint(path, modules, optimizers, step, config, stage)
    if not final:
        ckpt.pruneCheckpoints(config["runDir"], stage, cfg["keepLast"])
    return path


def _logStep(logger, stage: int, step: int, cfg: dict, record: dict):
    if cfg["logEvery"] > 0 and step % cfg["logEvery"] == 0:
        logger.info({"stage": stage, "step": step} | {k: round(v, 5) for k, v in record.items()})
        if "discriminator" in record and step >= cfg["steps"] // 10:
            low, high = BALANCE_RANGE
            if not low < record["discriminator"] < high:
                logger.warning(f"Stage {stage} step {step}: discriminator loss {record['discriminator']:.4f} outside ({low}, {high}), possible collapse")


def _loop(config, stage, cfg, start, build, stepFn, modules, optimizers, logger, onStep=None) -> dict:
    """Run steps [start, steps) with prefetching, logging, checkpointing and divergence checks.

    On divergence the modules and optimizers are rolled back to the last good
    step checkpoint of this run before TrainingDiverged propagates.
    """
    lastGood = ckpt.latestCheckpoint(config["runDir"], stage) if start > 0 else None
    record = {}
    if start >= cfg["steps"]:
        _checkpoint(config, stage, cfg, cfg["steps"], modules, optimizers, final=True)
        return record
    prefetcher = Prefetcher(build, start, cfg["steps"], cfg.get("prefetch", 2))
    try:
        with alive_bar(cfg["steps"] - start, title=f"stage {stage}") as bar:
            for step in range(start, cfg["steps"]):
                record = stepFn(step, prefetcher.next())
                try:
                    checkFinite(stage, step, record, lastGood)
                except TrainingDiverged:
                    if lastGood is not None:
                        ckpt.loadCheckpoint(lastGood, modules, optimizers)
                        logger.error(f"Stage {stage}: restored {lastGood} after divergence at step {step}")
                    raise
                _logStep(logger, stage, step, cfg, record)
                if onStep is not None:
                    onStep(step, modules)
                if cfg["checkpointEvery"] > 0 and (step + 1) % cfg["checkpointEvery"] == 0:
                    lastGood = _checkpoint(config, stage, cfg, step + 1, modules, optimizers)
                bar()
    finally:
        prefetcher.close()
    _checkpoint(config, stage, cfg, cfg["steps"], modules, optimizers, final=True)
    return record


def _stageLogfile(config: dict, stage: int, logger):
    customlogger.setLogfile(logger, os.path.join(ckpt.stageDir(config["runDir"], stage), "train.log"))
    writeSnapshot(ckpt.stageDir(config["runDir"], stage), config)


# ── stage 1 ──────────────────────────────────────────────────────────
def trainStage1(config: dict, logger, samples: list | None = None, onStep=None) -> str:
    """Adversarial codec training: waveform -> features -> waveform."""
    cfg = stageConfig(config, 1)
    seed, hop = config["seed"], config["model"]["hop"]
    _stageLogfile(config, 1, logger)
    samples = samples if samples is not None else loadTrainingSet(config)

    codec = models.buildCodec(config["model"], seed)
    disc = models.buildDiscriminator(config["model"], seed)
    codecOpt = Adam(codec.namedParameters(), learningRate=cfg["learningRate"])
    discOpt = Adam(disc.namedParameters(), learningRate=cfg["discLearningRate"])
    assertDisjoint(codecOpt, discOpt)
    modules = {"codec": codec, "discriminator": disc}
    optimizers = {"codec": codecOpt, "discriminator": discOpt}
    weights = dict(config["generatorLossWeights"], gate=0.0, similarity=0.0)
    resolutions = config["melResolutions"]
    rate = config["model"]["sampleRate"]

    def step(stepIndex, batch):
        wave = Tensor(batch["wave"])
        recon = codec(wave)

        discOpt.zeroGrad()
        dLoss = discLoss(disc, wave, recon)
        dLoss.backward()
        discOpt.step()

        codecOpt.zeroGrad()
        with frozen(disc):
            adv = genAdvLoss(disc, wave, recon)
            components = {
                "adversarial": adv["adversarial"],
                "featureMatching": adv["featureMatching"],
                "time": timeDomainLoss(recon, wave),
                "frequency": multiResolutionMelLoss(recon, wave, rate, resolutions),
            }
            total = generatorTotalLoss(components, weights)
            total.backward()
        codecOpt.step()
        return {"total": total.item(), "discriminator": dLoss.item()} | {k: v.item() for k, v in components.items()}

    start = _resumeOrStart(config, 1, cfg, modules, optimizers, logger)
    build = lambda s: makeBatch(samples, 1, s, cfg, seed, hop)
    _loop(config, 1, cfg, start, build, step, modules, optimizers, logger, onStep)
    logger.info(f"Stage 1 finished after {cfg['steps']} steps")
    return ckpt.finalCheckpoint(config["runDir"], 1)


def loadCodec(config: dict) -> models.Codec:
    codec = models.buildCodec(config["model"], config["seed"])
    ckpt.loadCheckpoint(requireCheckpoint(config["runDir"], 1), {"codec": codec})
    return codec


# ── stage 2 ──────────────────────────────────────────────────────────
def warmupSchedule(config: dict, numSamples: int) -> tuple:
    cfg = stageConfig(config, 2)
    stepsPerEpoch = max(1, math.ceil(numSamples / cfg["batchSize"]))
    epochs = max(1, math.ceil(cfg["steps"] / stepsPerEpoch))
    mi = config["model"]["mi"]
    ramp = max(1, round(mi["warmupFraction"] * epochs))
    return WarmupSchedule(ramp, mi["maxWeight"]), stepsPerEpoch


def estimatorModules(prefix: str, estimators: dict) -> dict:
    return {f"{prefix}-{key.replace(':', '-')}": est for key, est in estimators.items()}


def trainStage2(config: dict, logger, samples: list | None = None, onStep=None) -> str:
    """Factor encoder under contrastive, commitment, prosody and MI objectives."""
    cfg = stageConfig(config, 2)
    seed, hop = config["seed"], config["model"]["hop"]
    codec = loadCodec(config)
    _stageLogfile(config, 2, logger)
    samples = samples if samples is not None else loadTrainingSet(config)
    groups = {}
    for index, sample in enumerate(samples):
        groups.setdefault(sample["contentGroup"], []).append(index)
    groups = {name: members for name, members in groups.items() if len(members) >= 2}
    if not groups:
        raise ValueError("training split has no content-parallel pairs")

    encoder = models.buildEncoder(config["model"], seed)
    club, mine = models.buildMiEstimators(config["model"], seed)
    encoderOpt = Adam(encoder.namedParameters(), learningRate=cfg["learningRate"])
    assertDisjoint(encoderOpt, *[e.optimizer for e in club.values()], *[e.optimizer for e in mine.values()])

    modules = {"encoder": encoder} | estimatorModules("club", club) | estimatorModules("mine", mine)
    optimizers = {"encoder": encoderOpt} | {name: m.optimizer for name, m in modules.items() if name != "encoder"}
    codecHash = ckpt.modulesHash({"codec": codec})

    weights = dict(config["encoderLossWeights"])
    if cfg["noContrastive"]:
        weights["contrastive"] = 0.0
    if cfg["noProsody"]:
        weights["prosody"] = 0.0
    temperature = weights["temperature"]
    schedule, stepsPerEpoch = warmupSchedule(config, len(samples))
    miCfg = config["model"]["mi"]

    def step(stepIndex, batch):
        rng = batch["rng"]
        with noGrad():
            features = codec.encoder(Tensor(batch["wave"]))
        out = encoder(features, initializeRng=rng)
        pooled = pooledEmbeddings(out, miCfg["miOnCodewords"])
        alpha = 0.0 if cfg["noMi"] else schedule(stepIndex // stepsPerEpoch)

        record = {"alpha": alpha}
        if not cfg["noMi"]:
            for a, b in FACTOR_PAIRS:
                key = pairKey(a, b)
                for _ in range(miCfg["estimatorSteps"]):
                    club[key].trainStep(pooled[a].data, pooled[b].data)
                mine[key].trainStep(pooled[a].data, pooled[b].data, rng)
                record[f"mine:{key}"] = mine[key].estimate(pooled[a].data, pooled[b].data, rng)

        components = {"commitment": {f: out[f]["quant"]["commitLoss"] for f in ("timbre", "emotion", "content")}, "mi": {}}
        if weights["contrastive"] != 0:
            labels = {"timbre": batch["speaker"], "emotion": batch["emotion"], "content": batch["contentGroup"]}
            # a factor whose labels are all distinct in this batch has no positive pair
            components["contrastive"] = {
                factor: supervisedContrastive(pooled[factor], labels[factor], temperature)
                for factor in FACTORS if len(np.unique(labels[factor])) < len(labels[factor])
            }
        if weights["prosody"] != 0:
            components["prosody"] = prosodyLoss(out["logF0"], out["energy"], batch["logF0"], batch["voiced"], batch["energy"])
        if alpha != 0:
            with frozen(*club.values()):
                components["mi"] = miPairBounds(pooled, club)

        encoderOpt.zeroGrad()
        total = encoderTotalLoss(components, weights, alpha)
        total.backward()
        encoderOpt.step()
        for factor, quantizer in encoder.quantizers().items():
            quantizer.emaUpdate(out[factor]["quant"]["assignments"], rng)

        record["total"] = total.item()
        for group in ("contrastive", "commitment", "mi"):
            for name, value in components.get(group, {}).items():
                record[f"{group}:{name}"] = value.item()
        if "prosody" in components:
            record["prosody"] = components["prosody"].item()
        return record

    start = _resumeOrStart(config, 2, cfg, modules, optimizers, logger)
    build = lambda s: makeBatch(samples, 2, s, cfg, seed, hop, groups)
    _loop(config, 2, cfg, start, build, step, modules, optimizers, logger, onStep)
    assertUnchanged("stage-1 codec", codecHash, {"codec": codec})
    logger.info(f"Stage 2 finished after {cfg['steps']} steps")
    return ckpt.finalCheckpoint(config["runDir"], 2)


def loadEncoder(config: dict) -> models.FactorEncoder:
    encoder = models.buildEncoder(config["model"], config["seed"])
    ckpt.loadCheckpoint(requireCheckpoint(config["runDir"], 2), {"encoder": encoder})
    return encoder


# ── stage 3 ──────────────────────────────────────────────────────────
def generatorParameters(generator, noDyGate: bool, noHsan: bool) -> dict:
    """Trainable generator parameters for the active ablations (unused paths are left out)."""
    params = generator.namedParameters()
    if noDyGate:
        params = {k: v for k, v in params.items() if not k.startswith("fusion.gate.")}
    if noHsan:
        params = {k: v for k, v in params.items() if not k.startswith("style.")}
    return params


def trainStage3(config: dict, logger, samples: list | None = None, onStep=None) -> str:
    """Generator on reconstruction triples with the adversary and a phased decoder unfreeze."""
    cfg = stageConfig(config, 3)
    seed, hop = config["seed"], config["model"]["hop"]
    requireCheckpoint(config["runDir"], 1)
    requireCheckpoint(config["runDir"], 2)
    codec = loadCodec(config)
    encoder = loadEncoder(config)
    _stageLogfile(config, 3, logger)
    samples = samples if samples is not None else loadTrainingSet(config)

    disc = models.buildDiscriminator(config["model"], seed)
    ckpt.loadCheckpoint(ckpt.finalCheckpoint(config["runDir"], 1), {"discriminator": disc})
    generator = models.buildGenerator(config["model"], seed)
    noDyGate, noHsan = cfg["noDyGate"], cfg["noHsan"]

    generatorOpt = Adam(generatorParameters(generator, noDyGate, noHsan), learningRate=cfg["learningRate"])
    decoderOpt = Adam(codec.decoder.namedParameters(), learningRate=cfg["learningRate"] * cfg["decoderLrScale"])
    discOpt = Adam(disc.namedParameters(), learningRate=cfg["discLearningRate"])
    assertDisjoint(generatorOpt, decoderOpt, discOpt)

    modules = {"generator": generator, "decoder": codec.decoder, "discriminator": disc}
    optimizers = {"generator": generatorOpt, "decoder": decoderOpt, "discriminator": discOpt}
    frozenHash = ckpt.modulesHash({"encoder": encoder, "codecEncoder": codec.encoder})
    unfreezeAt = int(cfg["unfreezeFraction"] * cfg["steps"])
    weights = dict(config["generatorLossWeights"])
    rate = config["model"]["sampleRate"]

    def step(stepIndex, batch):
        wave = Tensor(batch["wave"])
        with noGrad():
            reference = encoder(codec.encoder(wave))
        decoderTrainable = stepIndex >= unfreezeAt

        with contextlib.ExitStack() as stack:
            if not decoderTrainable:
                stack.enter_context(frozen(codec.decoder))
            out = generator(
                Tensor(reference["content"]["quant"]["codewords"]),
                Tensor(reference["emotion"]["quant"]["codewords"]),
                Tensor(reference["timbre"]["quant"]["codewords"]),
                noDyGate=noDyGate,
                noHsan=noHsan,
            )
            generated = codec.decoder(out["features"])

            discOpt.zeroGrad()
            dLoss = discLoss(disc, wave, generated)
            dLoss.backward()
            discOpt.step()

            generatorOpt.zeroGrad()
            decoderOpt.zeroGrad()
            with frozen(disc, codec.encoder, encoder):
                adv = genAdvLoss(disc, wave, generated)
                components = {
                    "gate": gateEntropyLoss(out["gates"], fixedGates=noDyGate),
                    "adversarial": adv["adversarial"],
                    "featureMatching": adv["featureMatching"],
                    "time": timeDomainLoss(generated, wave),
                    "frequency": multiResolutionMelLoss(generated, wave, rate, config["melResolutions"]),
                }
                if weights["similarity"] != 0:
                    regenerated = encoder(codec.encoder(generated))
                    components["similarity"] = similarityLoss(models.styleEmbeddings(regenerated),
                                                              models.styleEmbeddings(reference))
                total = generatorTotalLoss(components, weights)
                total.backward()
        generatorOpt.step()
        if decoderTrainable:
            decoderOpt.step()
        return {"total": total.item(), "discriminator": dLoss.item(), "decoderTrainable": float(decoderTrainable)} | {
            k: T.asTensor(v).item() for k, v in components.items()}

    start = _resumeOrStart(config, 3, cfg, modules, optimizers, logger)
    build = lambda s: makeBatch(samples, 3, s, cfg, seed, hop)
    _loop(config, 3, cfg, start, build, step, modules, optimizers, logger, onStep)
    assertUnchanged("encoder", frozenHash, {"encoder": encoder, "codecEncoder": codec.encoder})
    logger.info(f"Stage 3 finished after {cfg['steps']} steps")
    return ckpt.finalCheckpoint(config["runDir"], 3)


def loadInferenceModels(config: dict) -> dict:
    """Codec (decoder from stage 3), encoder and generator, all from final checkpoints."""
    codec = loadCodec(config)
    encoder = loadEncoder(config)
    generator = models.buildGenerator(config["model"], config["seed"])
    ckpt.loadCheckpoint(requireCheckpoint(config["runDir"], 3), {"generator": generator, "decoder": codec.decoder})
    return {"codec": codec, "encoder": encoder, "generator": generator}


stageTrainers = {1: trainStage1, 2: trainStage2, 3: trainStage3}
