"""One handler per subcommand: handler(experiment, options) -> machine-readable result dict."""

import os

import numpy as np

from . import tensorio
from .utils import writeSnapshot, fileHash
from ..audio.wavio import readWav, writeWav
from ..data.toyCorpus import buildCorpus
from ..training import models, pipeline
from ..evaluation import harness
from ..autodiff import suite

FACTORS = ("content", "emotion", "timbre")


def synthData(experiment, options: dict) -> dict:
    config, logger = experiment.config, experiment.logger
    outDir = options.get("out") or config["corpusDir"]
    manifests = buildCorpus(config["corpus"], config["splits"], config["seed"], outDir, logger)
    writeSnapshot(outDir, config)
    return {"corpusDir": outDir, "utterances": {split: len(m) for split, m in manifests.items()}}


def train(experiment, options: dict) -> dict:
    config, logger = experiment.config, experiment.logger
    stages = [1, 2, 3] if options.get("stage") in (None, "all") else [int(options["stage"])]
    results = {}
    for stage in stages:
        if stage not in pipeline.stageTrainers:
            raise ValueError(f"unknown stage {stage}, expected 1, 2, 3 or all")
        logger.info(f"Starting stage {stage}")
        path = pipeline.stageTrainers[stage](config, logger)
        manifest = tensorio.readJson(os.path.join(path, "manifest.json"))
        results[str(stage)] = {"checkpoint": path, "step": manifest["step"], "hash": manifest["hash"]}
        logger.info(f"Finished stage {stage}")
    return {"stages": results}


def _loadEncoding(config: dict) -> tuple:
    return pipeline.loadCodec(config), pipeline.loadEncoder(config)


def _readWave(config: dict, path: str) -> np.ndarray:
    wave, _ = readWav(path, expectedRate=config["model"]["sampleRate"])
    return wave


def encode(experiment, options: dict) -> dict:
    """WAV -> three token files {out}.{factor}.mft with JSON sidecars."""
    config = experiment.config
    source = options["input"]
    prefix = options.get("out") or os.path.splitext(source)[0]
    codec, encoder = _loadEncoding(config)
    codes = models.encodeWaveform(codec, encoder, _readWave(config, source))
    paths = {}
    for factor in FACTORS:
        tokens = np.asarray(codes[factor]["tokens"])
        paths[factor] = f"{prefix}.{factor}.mft"
        tensorio.writeTokens(paths[factor], tokens, {"factor": factor, "source": source, "shape": list(tokens.shape)})
    writeSnapshot(os.path.dirname(os.path.abspath(prefix)), config)
    return {"tokens": paths, "frames": int(np.asarray(codes["content"]["tokens"]).shape[-1])}


def _factorCodes(config: dict, codec, encoder, role: str, path: str) -> dict:
    """One factor's codes from a WAV (encoded on the fly) or from a token file."""
    if path.endswith(".mft"):
        tokens, sidecar = tensorio.readTokens(path)
        if sidecar.get("factor", role) != role:
            raise ValueError(f"--{role} got a {sidecar['factor']} token file: {path}")
        return {"tokens": tokens}
    return models.encodeWaveform(codec, encoder, _readWave(config, path))[role]


def generate(experiment, options: dict) -> dict:
    config = experiment.config
    missing = [role for role in FACTORS if not options.get(role)]
    if missing:
        raise ValueError(f"generate: missing --{', --'.join(missing)}; all three factors are required")
    inference = pipeline.loadInferenceModels(config)
    codes = {role: _factorCodes(config, inference["codec"], inference["encoder"], role, options[role]) for role in FACTORS}
    stage3 = config["stages"]["3"]
    wave = models.generateWaveform(inference["codec"], inference["encoder"], inference["generator"], codes,
                                   noDyGate=stage3["noDyGate"], noHsan=stage3["noHsan"])
    out = options.get("out") or os.path.join(config["runDir"], "generated.wav")
    writeWav(out, wave, config["model"]["sampleRate"])
    writeSnapshot(os.path.dirname(os.path.abspath(out)), config)
    return {"wav": out, "samples": int(len(wave)), "sha256": fileHash(out)}


def evaluate(experiment, options: dict) -> dict:
    config = experiment.config
    report = harness.evaluate(config, experiment.logger, options.get("split"))
    out = options.get("out") or os.path.join(config["runDir"], "eval", f"{report['split']}.report.json")
    harness.writeReport(report, out, options.get("csv"))
    writeSnapshot(os.path.dirname(os.path.abspath(out)), config)
    return {"report": out, "csv": options.get("csv"), "disentanglement": report["disentanglement"],
            "generation": report["generation"]}


def exportEmbeddings(experiment, options: dict) -> dict:
    config = experiment.config
    split = options.get("split") or config["evaluation"]["split"]
    factor = options.get("factor") or "timbre"
    out = options.get("out") or os.path.join(config["runDir"], "embeddings", f"{split}.{factor}.mft")
    result = harness.exportEmbeddings(config, split, factor, out)
    writeSnapshot(os.path.dirname(os.path.abspath(out)), config)
    return result


def gradcheck(experiment, options: dict) -> dict:
    seeds = int(options.get("seeds") or experiment.config["gradcheckSeeds"])
    summary = suite.runSuite(seeds, options.get("checks"), experiment.logger)
    return {"passed": all(item["passed"] for item in summary.values()), "seeds": seeds, "checks": summary}

