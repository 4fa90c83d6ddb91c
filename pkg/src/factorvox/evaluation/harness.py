"""Objective evaluation: probe matrix, code MI, and reconstruction / compositional generation metrics."""

import os
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np
import pandas as pd
from alive_progress import alive_bar

from ..autodiff.tensor import noGrad
from ..core import settings, tensorio
from ..data.toyCorpus import loadManifest, loadSample
from ..mutualinfo.estimators import FACTOR_PAIRS, pairKey
from ..statistics import stats
from ..training import checkpoints as ckpt
from ..training import models, pipeline
from . import metrics
from .probes import buildProbeMatrix, splitUtterances, SpeakerEmbedder

MODES = ("reconstruction", "compositional")


class EvalScheme():
    """Evaluation triples (content, timbre, emotion) over one split, plus a mismatched-emotion control."""

    def __init__(self, triples: list):
        for triple in triples:
            same = triple["content"] == triple["timbre"] == triple["emotion"]
            if same != (triple["mode"] == "reconstruction"):
                raise ValueError(f"triple {triple} is labelled {triple['mode']} but its references say otherwise")
        self.triples = triples

    def __len__(self):
        return len(self.triples)

    def count(self, mode: str) -> int:
        return sum(1 for t in self.triples if t["mode"] == mode)

    @classmethod
    def build(cls, speakers, emotions, reconstruction: int, compositional: int, seed: int) -> "EvalScheme":
        """Reconstruction triples cover distinct utterances; compositional triples pick a timbre
        source with another speaker, an emotion source with another emotion, and a control
        utterance whose emotion differs from the emotion source."""
        speakers, emotions = np.asarray(speakers), np.asarray(emotions)
        count = len(speakers)
        if count < 2:
            raise ValueError(f"evaluation needs at least two utterances, got {count}")
        rng = np.random.default_rng([int(seed), 202])
        triples = [{"mode": "reconstruction", "content": int(i), "timbre": int(i), "emotion": int(i), "control": None}
                   for i in rng.permutation(count)[:min(reconstruction, count)]]

        for _ in range(compositional):
            c = int(rng.integers(count))
            otherSpeaker = np.flatnonzero(speakers != speakers[c])
            otherEmotion = np.flatnonzero(emotions != emotions[c])
            anyOther = np.flatnonzero(np.arange(count) != c)
            t = int(rng.choice(otherSpeaker if otherSpeaker.size else anyOther))
            e = int(rng.choice(otherEmotion if otherEmotion.size else anyOther))
            controls = np.flatnonzero(emotions != emotions[e])
            control = int(rng.choice(controls)) if controls.size else None
            triples.append({"mode": "compositional", "content": c, "timbre": t, "emotion": e, "control": control})
        return cls(triples)


# ── encoding ─────────────────────────────────────────────────────────
def loadSplit(config: dict, split: str) -> list:
    manifest = loadManifest(config["corpusDir"], split)
    fps = config["corpus"]["framesPerSymbol"]
    return [loadSample(config["corpusDir"], row, fps) for _, row in manifest.iterrows()]


def encodeSamples(codec, encoder, samples: list, title: str = "encode") -> list:
    codes = []
    with alive_bar(len(samples), title=title) as bar:
        for sample in samples:
            codes.append(models.encodeWaveform(codec, encoder, sample["waveform"]))
            bar()
    return codes


def representations(codes: list, samples: list) -> tuple:
    """Pooled and per-frame factor vectors plus the labels the probes predict."""
    reps = {factor: {"pooled": [], "frames": []} for factor in settings.factors}
    contentLabels = []
    for code, sample in zip(codes, samples):
        frames = min(code["content"]["embedding"].shape[0], len(sample["contentSymbols"]))
        for factor in ("content", "emotion"):
            sequence = code[factor]["embedding"][:frames]
            reps[factor]["pooled"].append(sequence.mean(axis=0))
            reps[factor]["frames"].append(sequence)
        timbre = code["timbre"]["embedding"]
        reps["timbre"]["pooled"].append(timbre)
        reps["timbre"]["frames"].append(np.repeat(timbre[None], frames, axis=0))
        contentLabels.append(sample["contentSymbols"][:frames])
    for factor in reps:
        reps[factor]["pooled"] = np.stack(reps[factor]["pooled"])
    labels = {
        "speaker": np.array([s["speaker"] for s in samples]),
        "emotion": np.array([s["emotion"] for s in samples]),
        "content": contentLabels,
    }
    return reps, labels


def utteranceCodes(codes: list) -> dict:
    """First-stage token per utterance and factor (the per-utterance mode over frames)."""
    return {factor: np.array([metrics.utteranceCode(code[factor]["tokens"][0]) for code in codes])
            for factor in settings.factors}


# ── disentanglement ──────────────────────────────────────────────────
def loadEstimators(config: dict) -> tuple:
    club, mine = models.buildMiEstimators(config["model"], config["seed"])
    ckpt.loadCheckpoint(ckpt.finalCheckpoint(config["runDir"], 2),
                        pipeline.estimatorModules("club", club) | pipeline.estimatorModules("mine", mine))
    return club, mine


def disentanglementMetrics(config: dict, encoder, codes: list, samples: list, split: str) -> dict:
    evalCfg = config["evaluation"]
    reps, labels = representations(codes, samples)
    before = ckpt.modulesHash({"encoder": encoder})
    matrix = buildProbeMatrix(reps, labels, evalCfg["probeTrainFraction"], evalCfg["probeL2"], config["seed"])
    if ckpt.modulesHash({"encoder": encoder}) != before:
        raise RuntimeError("probe fitting changed encoder parameters")

    tokens = utteranceCodes(codes)
    club, mine = loadEstimators(config)
    rng = np.random.default_rng([config["seed"], 303])
    codeMi, clubEstimates, mineEstimates = {}, {}, {}
    for a, b in FACTOR_PAIRS:
        key = pairKey(a, b)
        codeMi[key] = metrics.codeMi(tokens[a], tokens[b])
        clubEstimates[key] = club[key].estimate(reps[a]["pooled"], reps[b]["pooled"])
        mineEstimates[key] = mine[key].estimate(reps[a]["pooled"], reps[b]["pooled"], rng)

    _, testIdx = splitUtterances(len(samples), evalCfg["probeTrainFraction"], config["seed"])
    return {
        "split": split,
        "probeMatrix": matrix.asDict(),
        "targetAboveLeakage": matrix.targetAboveLeakage(),
        "probeTestUtterances": int(len(testIdx)),
        "codeMi": codeMi,
        "club": clubEstimates,
        "mine": mineEstimates,
        "miWarning": len(samples) < evalCfg["minUtterancesForMi"],
    }


# ── generation ───────────────────────────────────────────────────────
def speakerEmbedder(config: dict, trainSamples: list, logger) -> SpeakerEmbedder:
    """Speaker network for SECS, trained once per run on the training split and cached."""
    model = config["model"]
    embedder = SpeakerEmbedder(model["speakerEmbedder"], config["corpus"]["numSpeakers"], model["sampleRate"], model["hop"],
                               models.moduleRng(config["seed"], "speaker"))
    path = os.path.join(config["runDir"], "speaker", "final")
    if os.path.isfile(os.path.join(path, "manifest.json")):
        ckpt.loadCheckpoint(path, {"speaker": embedder})
        return embedder
    logger.info(f"Training the speaker embedder on {len(trainSamples)} utterances")
    embedder.fit([s["waveform"] for s in trainSamples], [s["speaker"] for s in trainSamples], model["speakerEmbedder"],
                 models.moduleRng(config["seed"], "speaker"), logger=logger)
    ckpt.saveCheckpoint(path, {"speaker": embedder}, {}, model["speakerEmbedder"]["steps"], config, 0)
    return embedder


def evaluateTriple(triple: dict, context: dict) -> dict:
    """Generate one triple and score it; runs on a worker thread."""
    samples, codes = context["samples"], context["codes"]
    hop, rate = context["hop"], context["sampleRate"]
    with noGrad():
        generated = models.generateWaveform(
            context["codec"], context["encoder"], context["generator"],
            {"content": codes[triple["content"]]["content"],
             "emotion": codes[triple["emotion"]]["emotion"],
             "timbre": codes[triple["timbre"]]["timbre"]},
            noDyGate=context["noDyGate"], noHsan=context["noHsan"])
        recognized = models.encodeWaveform(context["codec"], context["encoder"], generated)
        embedding = context["embedder"].embed(generated)

    content = samples[triple["content"]]
    decoded = metrics.decodeSymbols(recognized["content"]["tokens"][0], context["tokenMap"], context["framesPerSymbol"])
    result = dict(triple)
    result["ids"] = {role: samples[triple[role]]["id"] for role in ("content", "timbre", "emotion")}
    result["contentErrorRate"] = metrics.symbolErrorRate(decoded, content["symbols"])
    result["secs"] = metrics.cosine(embedding, context["speakerEmbeddings"][triple["timbre"]])
    result["secsSource"] = metrics.cosine(embedding, context["speakerEmbeddings"][triple["content"]])
    f0 = metrics.f0Metrics(generated, samples[triple["emotion"]]["waveform"], rate, hop, context["minVoicedFrames"])
    result["logRmse"] = None if f0 is None else f0["logRmse"]
    result["corr"] = None if f0 is None else f0["corr"]
    result["corrControl"] = None
    if triple["control"] is not None:
        control = metrics.f0Metrics(generated, samples[triple["control"]]["waveform"], rate, hop, context["minVoicedFrames"])
        result["corrControl"] = None if control is None else control["corr"]
    return result


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def summarize(results: list) -> dict:
    corrPairs = [(r["corr"], r["corrControl"]) for r in results if r["corr"] is not None and r["corrControl"] is not None]
    return {
        "count": len(results),
        "contentErrorRate": _mean(r["contentErrorRate"] for r in results),
        "secs": _mean(r["secs"] for r in results),
        "secsSource": _mean(r["secsSource"] for r in results),
        "logRmse": _mean(r["logRmse"] for r in results),
        "corr": _mean(r["corr"] for r in results),
        "f0Undefined": sum(1 for r in results if r["logRmse"] is None),
        "secsTimbreWins": sum(1 for r in results if r["mode"] == "compositional" and r["secs"] > r["secsSource"]),
        "secsComparisons": sum(1 for r in results if r["mode"] == "compositional"),
        "corrEmotionWins": sum(1 for a, b in corrPairs if a >= b),
        "corrComparisons": len(corrPairs),
    }


def generationMetrics(config: dict, inference: dict, codes: list, samples: list, logger) -> tuple:
    evalCfg = config["evaluation"]
    model = config["model"]
    stage3 = config["stages"]["3"]
    trainSamples = loadSplit(config, "train")
    trainCodes = encodeSamples(inference["codec"], inference["encoder"], trainSamples, title="encode train")
    contentRvq = model["rvq"]["content"]
    tokenMap = metrics.fitTokenSymbolMap([c["content"]["tokens"][0] for c in trainCodes],
                                         [s["contentSymbols"] for s in trainSamples],
                                         contentRvq["codebookSize"], config["corpus"]["alphabetSize"])
    embedder = speakerEmbedder(config, trainSamples, logger)
    context = {
        "samples": samples,
        "codes": codes,
        "codec": inference["codec"],
        "encoder": inference["encoder"],
        "generator": inference["generator"],
        "embedder": embedder,
        "speakerEmbeddings": [embedder.embed(s["waveform"]) for s in samples],
        "tokenMap": tokenMap,
        "framesPerSymbol": config["corpus"]["framesPerSymbol"],
        "hop": model["hop"],
        "sampleRate": model["sampleRate"],
        "minVoicedFrames": evalCfg["minVoicedFrames"],
        "noDyGate": stage3["noDyGate"],
        "noHsan": stage3["noHsan"],
    }
    scheme = EvalScheme.build([s["speaker"] for s in samples], [s["emotion"] for s in samples],
                              evalCfg["reconstructionTriples"], evalCfg["compositionalTriples"], config["seed"])

    results = [None] * len(scheme)
    with ThreadPoolExecutor(max_workers=max(1, evalCfg["workers"])) as pool:
        futures = {pool.submit(evaluateTriple, triple, context): i for i, triple in enumerate(scheme.triples)}
        with alive_bar(len(futures), title="generate") as bar:
            for future in as_completed(futures):
                try:
                    results[futures[future]] = future.result()
                except Exception as e:
                    raise RuntimeError(f"evaluation of triple {scheme.triples[futures[future]]} failed: {str(e)}")
                bar()
    summaries = {mode: summarize([r for r in results if r["mode"] == mode]) for mode in MODES}
    return summaries, results


# ── entry points ─────────────────────────────────────────────────────
def evaluate(config: dict, logger, split: str | None = None) -> dict:
    """Full evaluation report for one split. Generation metrics need a stage-3 checkpoint."""
    split = split or config["evaluation"]["split"]
    samples = loadSplit(config, split)
    codec = pipeline.loadCodec(config)
    encoder = pipeline.loadEncoder(config)
    codes = encodeSamples(codec, encoder, samples, title=f"encode {split}")
    runName = os.path.basename(os.path.normpath(config["runDir"]))

    report = {"split": split, "utterances": len(samples)}
    report["disentanglement"] = disentanglementMetrics(config, encoder, codes, samples, split)
    stats.generateAndPrintDisentanglementReport(logger, report["disentanglement"], len(samples), runName)

    if os.path.isfile(os.path.join(ckpt.finalCheckpoint(config["runDir"], 3), "manifest.json")):
        inference = pipeline.loadInferenceModels(config)
        report["generation"], report["samples"] = generationMetrics(config, inference, codes, samples, logger)
        stats.generateAndPrintGenerationReport(logger, report["generation"], runName)
    else:
        logger.warning("No stage-3 checkpoint: skipping generation metrics")
        report["generation"], report["samples"] = None, []
    return report


def reportTable(report: dict) -> pd.DataFrame:
    """Flat table: one row per task, columns Acc_t .. MI_ec."""
    dis = report["disentanglement"]
    short = {"timbre": "t", "emotion": "e", "content": "c", "speaker": "t"}
    row = {}
    for factor, labels in dis["probeMatrix"].items():
        for label, accuracy in labels.items():
            a, b = short[factor], short[label]
            row[f"Acc_{a}" if a == b else f"Acc_{a}{b}"] = accuracy
    for pair, value in dis["codeMi"].items():
        a, b = pair.split(":")
        row[f"MI_{short[a]}{short[b]}"] = value
    rows = []
    for task in MODES:
        summary = (report.get("generation") or {}).get(task) or {}
        rows.append({
            "Task": task,
            "WER": summary.get("contentErrorRate"),
            "SECS": summary.get("secs"),
            "LogRMSE": summary.get("logRmse"),
            "Corr": summary.get("corr"),
        } | row)
    return pd.DataFrame(rows)


def writeReport(report: dict, path: str, csvPath: str | None = None) -> str:
    tensorio.writeJson(path, report)
    if csvPath:
        os.makedirs(os.path.dirname(os.path.abspath(csvPath)), exist_ok=True)
        reportTable(report).to_csv(csvPath, index=False)
    return path


def exportEmbeddings(config: dict, split: str, factor: str, path: str) -> dict:
    """Per-utterance embeddings [N, d] as MFT1 plus a JSON label sidecar at path + '.json'."""
    if factor not in settings.factors:
        raise ValueError(f"unknown factor '{factor}', expected one of {settings.factors}")
    samples = loadSplit(config, split)
    codec = pipeline.loadCodec(config)
    encoder = pipeline.loadEncoder(config)
    codes = encodeSamples(codec, encoder, samples, title=f"export {factor}")
    reps, _ = representations(codes, samples)
    matrix = reps[factor]["pooled"].astype(np.float32)
    labels = [{"id": s["id"], "speaker": s["speaker"], "emotion": s["emotion"], "contentGroup": s["contentGroup"]}
              for s in samples]
    tensorio.writeTensor(path, matrix)
    tensorio.writeJson(path + ".json", {"factor": factor, "split": split, "labels": labels})
    return {"path": path, "rows": int(matrix.shape[0]), "dim": int(matrix.shape[1])}
