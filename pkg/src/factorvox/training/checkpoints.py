"""Checkpoint directories: {module}/{tensor}.mft, manifest.json and config.snapshot.json.

Every write lands in a temp directory first and is moved into place with
os.replace, so a crash never leaves a half-written checkpoint behind.
"""

import os
import re
import shutil

from ..core import tensorio
from ..core.utils import atomicDirectory, stateHash, writeSnapshot

STEP_PATTERN = re.compile(r"^step-(\d{7})$")


def stageDir(runDir: str, stage: int) -> str:
    return os.path.join(runDir, f"stage{stage}")


def finalCheckpoint(runDir: str, stage: int) -> str:
    return os.path.join(stageDir(runDir, stage), "final")


def modulesHash(modules: dict) -> str:
    tensors = {}
    for name, module in modules.items():
        tensors.update({f"{name}/{key}": value for key, value in module.stateDict().items()})
    return stateHash(tensors)


def saveCheckpoint(path: str, modules: dict, optimizers: dict, step: int, config: dict, stage: int) -> str:
    """Write modules (parameters and buffers) and optimizer moments; returns the state hash."""
    digest = modulesHash(modules)

    def write(staging):
        for name, module in modules.items():
            for key, value in module.stateDict().items():
                tensorio.writeTensor(os.path.join(staging, name, f"{key}.mft"), value)
        for name, optimizer in optimizers.items():
            for key, value in optimizer.stateDict().items():
                tensorio.writeTensor(os.path.join(staging, "optim", name, f"{key}.mft"), value)
        tensorio.writeJson(os.path.join(staging, "manifest.json"), {
            "stage": stage,
            "step": step,
            "hash": digest,
            "modules": sorted(modules),
            "optimizers": sorted(optimizers),
            "architecture": config["model"],
        })
        writeSnapshot(staging, config)

    atomicDirectory(path, write)
    return digest


def loadCheckpoint(path: str, modules: dict, optimizers: dict | None = None) -> dict:
    """Restore modules (and optimizers when given) in place; returns the manifest."""
    manifestPath = os.path.join(path, "manifest.json")
    if not os.path.isfile(manifestPath):
        raise FileNotFoundError(f"missing prerequisite checkpoint: {path}")
    manifest = tensorio.readJson(manifestPath)
    for name, module in modules.items():
        if name not in manifest["modules"]:
            raise KeyError(f"checkpoint {path} has no module '{name}' (has {manifest['modules']})")
        tensors = {key: tensorio.readTensor(os.path.join(path, name, f"{key}.mft")) for key, _ in module.namedTensors()}
        module.loadStateDict(tensors)
    for name, optimizer in (optimizers or {}).items():
        keys = ["step"] + [f"{kind}.{p}" for p in optimizer.parameters for kind in ("m", "v")]
        optimizer.loadStateDict({key: tensorio.readTensor(os.path.join(path, "optim", name, f"{key}.mft")) for key in keys})
    return manifest


def listStepCheckpoints(runDir: str, stage: int) -> list:
    directory = stageDir(runDir, stage)
    if not os.path.isdir(directory):
        return []
    steps = [entry for entry in os.listdir(directory) if STEP_PATTERN.match(entry)]
    return [os.path.join(directory, entry) for entry in sorted(steps)]


def latestCheckpoint(runDir: str, stage: int) -> str | None:
    checkpoints = listStepCheckpoints(runDir, stage)
    return checkpoints[-1] if checkpoints else None


def pruneCheckpoints(runDir: str, stage: int, keepLast: int):
    for path in listStepCheckpoints(runDir, stage)[:-keepLast] if keepLast > 0 else []:
        shutil.rmtree(path, ignore_errors=True)


def stepCheckpointPath(runDir: str, stage: int, step: int) -> str:
    return os.path.join(stageDir(runDir, stage), f"step-{step:07d}")
