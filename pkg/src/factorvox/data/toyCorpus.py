"""Synthetic toy speech with known speaker, emotion and content factors.

speaker -> base pitch, formant shift, spectral tilt
emotion -> pitch contour shape and energy pattern
content -> per-symbol formant envelope (symbol 0 is an unvoiced noise burst)
"""

import hashlib
import os

import numpy as np
import pandas as pd
from alive_progress import alive_bar

from ..audio.features import frameEnergyDb
from ..audio.wavio import readWav, writeWav
from ..core import tensorio

SPLITS = ("train", "seen", "unseen")
NYQUIST_MARGIN = 7000.0


def validateSpec(spec: dict):
    if spec["numSpeakers"] < 2 or spec["numEmotions"] < 2:
        raise ValueError(
            f"corpus spec too small to hold out a speaker and an emotion: "
            f"{spec['numSpeakers']} speakers, {spec['numEmotions']} emotions")
    if len(spec["speakerBasePitches"]) < spec["numSpeakers"]:
        raise ValueError(f"speakerBasePitches lists {len(spec['speakerBasePitches'])} speakers, need {spec['numSpeakers']}")
    if spec["alphabetSize"] < 2:
        raise ValueError(f"alphabetSize must be >= 2, got {spec['alphabetSize']}")
    if spec["parallelRealizations"] < 2:
        raise ValueError("parallelRealizations must be >= 2 so every content sequence has a parallel partner")


def symbolFormants(symbol: int) -> tuple:
    """(F1, F2) in Hz for a voiced symbol."""
    return 300.0 + 85.0 * (symbol - 1), 900.0 + 220.0 * ((3 * symbol) % 7)


def emotionContour(emotion: int, position: np.ndarray) -> np.ndarray:
    """Pitch multiplier over normalized utterance position in [0, 1]."""
    if emotion == 0:
        return np.ones_like(position)
    if emotion == 1:
        return 0.85 + 0.35 * position
    return 1.0 + 0.12 * np.sin(2.0 * np.pi * 3.0 * position + 0.5 * np.pi * (emotion - 2))


def emotionGain(emotion: int, position: np.ndarray) -> np.ndarray:
    """Linear amplitude pattern over normalized utterance position."""
    if emotion == 0:
        return np.full_like(position, 0.35)
    if emotion == 1:
        return 0.25 + 0.4 * position
    return 0.45 + 0.2 * np.sin(2.0 * np.pi * 3.0 * position + 0.5 * np.pi * (emotion - 1))


def sampleSeed(seed: int, split: str, index: int) -> int:
    digest = hashlib.sha256(f"{seed}:{split}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def synthesizeSample(spec: dict, speaker: int, emotion: int, symbols, seed: int) -> dict:
    """Render one utterance. Same arguments and seed give a bit-identical waveform."""
    symbols = np.asarray(symbols, dtype=np.int64)
    if not 0 <= speaker < spec["numSpeakers"]:
        raise ValueError(f"speaker id {speaker} out of range [0, {spec['numSpeakers']})")
    if not 0 <= emotion < spec["numEmotions"]:
        raise ValueError(f"emotion id {emotion} out of range [0, {spec['numEmotions']})")
    if symbols.size == 0 or symbols.min() < 0 or symbols.max() >= spec["alphabetSize"]:
        raise ValueError(f"symbols must be a non-empty sequence of ids in [0, {spec['alphabetSize']})")

    rng = np.random.default_rng(seed)
    rate, hop = spec["sampleRate"], spec["hop"]
    frameSymbols = np.repeat(symbols, spec["framesPerSymbol"])
    numFrames = len(frameSymbols)
    numSamples = numFrames * hop

    framePosition = (np.arange(numFrames) + 0.5) / numFrames
    frameCentres = (np.arange(numFrames) + 0.5) * hop
    sampleIndex = np.arange(numSamples)

    frameF0 = spec["speakerBasePitches"][speaker] * emotionContour(emotion, framePosition)
    f0 = np.interp(sampleIndex, frameCentres, frameF0)
    phase = 2.0 * np.pi * np.cumsum(f0) / rate

    # harmonic amplitudes per frame, interpolated to samples
    shift = spec["speakerFormantShifts"][speaker]
    tilt = spec["speakerTilts"][speaker]
    numHarmonics = int(NYQUIST_MARGIN // frameF0.min())
    harmonics = np.arange(1, numHarmonics + 1)
    frameAmplitudes = np.zeros((numFrames, numHarmonics))
    for i, symbol in enumerate(frameSymbols):
        if symbol == 0:
            continue
        frequencies = harmonics * frameF0[i]
        envelope = np.full(numHarmonics, 0.3)
        for formant, bandwidth in zip(symbolFormants(symbol), (120.0, 180.0)):
            envelope += np.exp(-0.5 * ((frequencies - formant * shift) / bandwidth) ** 2)
        frameAmplitudes[i] = envelope * harmonics ** (-tilt) * (frequencies < NYQUIST_MARGIN)

    voiced = np.zeros(numSamples)
    power = np.zeros(numSamples)
    for h in range(numHarmonics):
        amplitude = np.interp(sampleIndex, frameCentres, frameAmplitudes[:, h])
        voiced += amplitude * np.sin((h + 1) * phase)
        power += 0.5 * amplitude ** 2
    voiced /= np.sqrt(np.maximum(power, 1e-12))
    voiced[power < 1e-12] = 0.0

    gain = np.interp(sampleIndex, frameCentres, emotionGain(emotion, framePosition))
    unvoicedMask = np.repeat(frameSymbols == 0, hop)
    burst = rng.normal(0.0, 1.0, size=numSamples) * unvoicedMask * 0.4
    wave = gain * (voiced + burst) + rng.normal(0.0, spec["noiseLevel"], size=numSamples)
    wave = np.clip(wave, -0.95, 0.95).astype(np.float32)

    return {
        "waveform": wave,
        "contentSymbols": frameSymbols,
        "symbols": symbols,
        "speaker": speaker,
        "emotion": emotion,
        "logF0": np.log(frameF0),
        "voiced": frameSymbols != 0,
        "energyDb": frameEnergyDb(wave, hop),
    }


def _splitFactors(spec: dict, split: str) -> tuple:
    speakers = list(range(spec["numSpeakers"]))
    emotions = list(range(spec["numEmotions"]))
    heldSpeaker, heldEmotion = spec["heldOutSpeaker"], spec["heldOutEmotion"]
    if split == "unseen":
        combos = [(s, e) for s in speakers for e in emotions if s == heldSpeaker or e == heldEmotion]
    else:
        combos = [(s, e) for s in speakers for e in emotions if s != heldSpeaker and e != heldEmotion]
    return combos


def _groupSizes(total: int, groupSize: int) -> list:
    sizes = [groupSize] * (total // groupSize)
    remainder = total % groupSize
    if remainder:
        if sizes and remainder < 2:
            sizes[-1] += remainder
        else:
            sizes.append(remainder)
    return sizes


def planSplit(spec: dict, split: str, size: int, seed: int) -> list:
    """Sample labels for one split: content sequences in parallel groups, factors uniform per utterance."""
    rng = np.random.default_rng(sampleSeed(seed, split, -1))
    combos = _splitFactors(spec, split)
    plan = []
    for group, groupSize in enumerate(_groupSizes(size, spec["parallelRealizations"])):
        length = int(rng.integers(spec["minSymbols"], spec["maxSymbols"] + 1))
        symbols = rng.integers(0, spec["alphabetSize"], size=length).tolist()
        used = set()
        for _ in range(groupSize):
            speaker, emotion = combos[int(rng.integers(len(combos)))]
            while (speaker, emotion) in used and len(used) < len(combos):
                speaker, emotion = combos[int(rng.integers(len(combos)))]
            used.add((speaker, emotion))
            plan.append({"speaker": speaker, "emotion": emotion, "symbols": symbols, "contentGroup": f"{split}-{group}"})
    return plan


def buildCorpus(spec: dict, sizes: dict, seed: int, outDir: str, logger=None) -> dict:
    """Synthesize every split to disk and write one JSON-lines manifest per split."""
    validateSpec(spec)
    manifests = {}
    for split in SPLITS:
        plan = planSplit(spec, split, sizes[split], seed)
        rows = []
        with alive_bar(len(plan), title=f"synth {split}") as bar:
            for index, item in enumerate(plan):
                seedValue = sampleSeed(seed, split, index)
                sample = synthesizeSample(spec, item["speaker"], item["emotion"], item["symbols"], seedValue)
                sampleId = f"{split}-{index:05d}"
                paths = {
                    "path": f"wav/{sampleId}.wav",
                    "f0_path": f"f0/{sampleId}.mft",
                    "energy_path": f"energy/{sampleId}.mft",
                }
                writeWav(os.path.join(outDir, paths["path"]), sample["waveform"], spec["sampleRate"])
                tensorio.writeTensor(os.path.join(outDir, paths["f0_path"]),
                                     np.stack([sample["logF0"], sample["voiced"].astype(np.float64)]))
                tensorio.writeTensor(os.path.join(outDir, paths["energy_path"]), sample["energyDb"])
                rows.append({
                    "id": sampleId,
                    "split": split,
                    **paths,
                    "speaker": item["speaker"],
                    "emotion": item["emotion"],
                    "symbols": item["symbols"],
                    "contentGroup": item["contentGroup"],
                    "numFrames": len(sample["contentSymbols"]),
                    "seed": seedValue,
                })
                bar()
        manifest = pd.DataFrame(rows)
        manifest.to_json(os.path.join(outDir, f"{split}.jsonl"), orient="records", lines=True)
        manifests[split] = manifest
        if logger is not None:
            logger.info(f"Wrote {len(manifest)} {split} utterances to {outDir}")
    tensorio.writeJson(os.path.join(outDir, "corpus.json"), {"spec": spec, "sizes": sizes, "seed": seed})
    return manifests


def loadManifest(corpusDir: str, split: str) -> pd.DataFrame:
    path = os.path.join(corpusDir, f"{split}.jsonl")
    if not os.path.isfile(path):
        raise FileNotFoundError(f"corpus manifest not found: {path} (run synth-data first)")
    return pd.read_json(path, orient="records", lines=True, dtype=False)


def loadCorpusSpec(corpusDir: str) -> dict:
    return tensorio.readJson(os.path.join(corpusDir, "corpus.json"))["spec"]


def loadSample(corpusDir: str, row, framesPerSymbol: int) -> dict:
    wave, _ = readWav(os.path.join(corpusDir, row["path"]))
    contour = tensorio.readTensor(os.path.join(corpusDir, row["f0_path"]))
    energy = tensorio.readTensor(os.path.join(corpusDir, row["energy_path"]))
    return {
        "id": row["id"],
        "waveform": wave,
        "speaker": int(row["speaker"]),
        "emotion": int(row["emotion"]),
        "symbols": np.asarray(row["symbols"], dtype=np.int64),
        "contentSymbols": np.repeat(np.asarray(row["symbols"], dtype=np.int64), framesPerSymbol),
        "contentGroup": row["contentGroup"],
        "logF0": contour[0].astype(np.float64),
        "voiced": contour[1] > 0.5,
        "energyDb": energy.astype(np.float64),
    }


def contentPairs(manifest: pd.DataFrame) -> dict:
    """contentGroup -> row indices of utterances sharing that symbol sequence (groups of >= 2)."""
    groups = manifest.groupby("contentGroup").indices
    return {group: list(indices) for group, indices in groups.items() if len(indices) >= 2}
