"""MFT1 tensor files: b"MFT1", u32 LE rank, rank x u32 LE dims, f32 LE row-major payload."""

import json
import os

import numpy as np

MAGIC = b"MFT1"


def encodeTensor(array) -> bytes:
    array = np.asarray(array)
    header = MAGIC + np.array([array.ndim, *array.shape], dtype="<u4").tobytes()
    return header + np.ascontiguousarray(array, dtype="<f4").tobytes()


def decodeTensor(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if blob[:4] != MAGIC:
        raise ValueError(f"{source}: not an MFT1 tensor (magic {blob[:4]!r})")
    if len(blob) < 8:
        raise ValueError(f"{source}: truncated MFT1 header")
    rank = int(np.frombuffer(blob, dtype="<u4", count=1, offset=4)[0])
    headerSize = 8 + 4 * rank
    if len(blob) < headerSize:
        raise ValueError(f"{source}: truncated MFT1 header for rank {rank}")
    shape = tuple(int(d) for d in np.frombuffer(blob, dtype="<u4", count=rank, offset=8))
    count = int(np.prod(shape)) if rank else 1
    if len(blob) - headerSize != 4 * count:
        raise ValueError(f"{source}: payload holds {(len(blob) - headerSize) // 4} values, shape {shape} needs {count}")
    return np.frombuffer(blob, dtype="<f4", count=count, offset=headerSize).reshape(shape).astype(np.float32)


def writeTensor(path: str, array):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(encodeTensor(array))


def readTensor(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except FileNotFoundError:
        raise FileNotFoundError(f"tensor file not found: {path}")
    return decodeTensor(blob, source=path)


def writeJson(path: str, payload: dict):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def readJson(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def writeTokens(path: str, tokens, sidecar: dict):
    """Token ids are stored as exact integer-valued f32 next to a JSON sidecar."""
    tokens = np.asarray(tokens)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= 2 ** 24):
        raise ValueError(f"token ids must lie in [0, 2^24) to survive f32 storage, got range [{tokens.min()}, {tokens.max()}]")
    writeTensor(path, tokens)
    writeJson(path + ".json", sidecar)


def readTokens(path: str) -> tuple:
    tokens = readTensor(path).astype(np.int64)
    sidecarPath = path + ".json"
    sidecar = readJson(sidecarPath) if os.path.isfile(sidecarPath) else {}
    return tokens, sidecar
