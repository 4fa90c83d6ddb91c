import copy
import hashlib
import json
import os
import shutil
import tempfile

import numpy as np

from . import settings


def defaultConfig() -> dict:
    """Deep copy of every default, keyed the way a config JSON file is."""
    return {
        "seed": settings.defaultSeed,
        "profile": "desk",
        "runDir": os.path.join(settings.runsDir, "default"),
        "corpusDir": None,
        "corpus": copy.deepcopy(settings.defaultCorpusSpec),
        "splits": copy.deepcopy(settings.defaultSplitSizes),
        "model": copy.deepcopy(settings.defaultModelConfig),
        "stages": {str(stage): copy.deepcopy(cfg) for stage, cfg in settings.defaultStageConfigs.items()},
        "encoderLossWeights": copy.deepcopy(settings.defaultEncoderLossWeights),
        "generatorLossWeights": copy.deepcopy(settings.defaultGeneratorLossWeights),
        "melResolutions": [list(r) for r in settings.melResolutions],
        "evaluation": copy.deepcopy(settings.defaultEvaluationConfig),
        "gradcheckSeeds": settings.gradcheckSeeds,
    }


def _unknownKey(path: str, known) -> KeyError:
    return KeyError(f"unknown configuration key: '{path}' (known: {', '.join(sorted(known))})")


def deepMerge(base: dict, override: dict, path: str = "") -> dict:
    """Merge `override` into `base` in place. Keys missing from `base` are rejected at every level."""
    for key, value in override.items():
        key = str(key)
        if key not in base:
            raise _unknownKey(f"{path}{key}", base)
        if isinstance(value, dict) and isinstance(base[key], dict):
            deepMerge(base[key], value, f"{path}{key}.")
        else:
            base[key] = copy.deepcopy(value)
    return base


def parseOverride(text: str) -> tuple:
    """'a.b.c=value' -> (['a', 'b', 'c'], value); values parse as JSON, else stay strings."""
    if "=" not in text:
        raise ValueError(f"override '{text}' is not of the form key=value")
    key, raw = text.split("=", 1)
    if not key.strip():
        raise ValueError(f"override '{text}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def applyOverride(config: dict, keys: list, value):
    node = config
    for depth, key in enumerate(keys):
        if not isinstance(node, dict) or key not in node:
            raise _unknownKey(".".join(keys[:depth + 1]), node if isinstance(node, dict) else {})
        if depth < len(keys) - 1:
            node = node[key]
    node[keys[-1]] = value


def resolveConfig(configPath: str | None = None, overrides: list | None = None, seed: int | None = None) -> dict:
    """defaults <- JSON file <- profile <- --set overrides <- --seed."""
    config = defaultConfig()
    if configPath:
        if not os.path.isfile(configPath):
            raise FileNotFoundError(f"config file not found: {configPath}")
        with open(configPath) as f:
            try:
                deepMerge(config, json.load(f))
            except json.JSONDecodeError as e:
                raise ValueError(f"config file {configPath} is not valid JSON: {str(e)}")

    parsed = [parseOverride(item) for item in (overrides or [])]
    for keys, value in parsed:
        if keys == ["profile"]:
            config["profile"] = value
    if config["profile"] == "full":
        for stage, values in settings.fullScaleProfile.items():
            config["stages"][str(stage)].update(values)
    elif config["profile"] != "desk":
        raise ValueError(f"unknown profile '{config['profile']}', expected 'desk' or 'full'")

    for keys, value in parsed:
        applyOverride(config, keys, value)
    if seed is not None:
        config["seed"] = int(seed)
    if not config["corpusDir"]:
        config["corpusDir"] = os.path.join(config["runDir"], "corpus")
    return config


def stageConfig(config: dict, stage: int) -> dict:
    return config["stages"][str(stage)]


def stepRng(seed: int, stage: int, step: int) -> np.random.Generator:
    """Generator for one training step; resumed runs replay the same stream."""
    return np.random.default_rng([int(seed), int(stage), int(step)])


def stateHash(tensors: dict) -> str:
    """sha256 over sorted tensor names, shapes and float32 bytes."""
    digest = hashlib.sha256()
    for name in sorted(tensors):
        array = np.ascontiguousarray(tensors[name], dtype="<f4")
        digest.update(name.encode())
        digest.update(str(array.shape).encode())
        digest.update(array.tobytes())
    return digest.hexdigest()


def fileHash(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def writeSnapshot(directory: str, config: dict) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "config.snapshot.json")
    with open(path, "w") as f:
        json.dump(config, f, indent=2, sort_keys=True)
    return path


def atomicDirectory(target: str, write):
    """Call write(tempDir), then move tempDir onto `target` with os.replace."""
    parent = os.path.dirname(os.path.abspath(target))
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".tmp-", dir=parent)
    try:
        write(staging)
        if os.path.isdir(target):
            retired = tempfile.mkdtemp(prefix=".old-", dir=parent)
            os.replace(target, os.path.join(retired, "old"))
            os.replace(staging, target)
            shutil.rmtree(retired, ignore_errors=True)
        else:
            os.replace(staging, target)
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise
