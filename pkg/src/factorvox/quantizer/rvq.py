"""Residual vector quantizer with straight-through gradients and EMA codebooks.

Codeword 0 of every stage is the zero vector and never moves, so a stage can
always leave the residual as it is: residual norms never grow with depth.
"""

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, ShapeError
from ..nn.modules import Module


def validateRvqConfig(config: dict):
    if config["numStages"] < 1:
        raise ValueError(f"RVQ numStages must be >= 1, got {config['numStages']}")
    if config["codebookSize"] < 2:
        raise ValueError(f"RVQ codebookSize must be >= 2, got {config['codebookSize']}")
    if not 0.0 <= config["emaDecay"] <= 1.0:
        raise ValueError(f"RVQ emaDecay must lie in [0, 1], got {config['emaDecay']}")


def rvqLoss(x, result: dict, commitmentWeight: float):
    """L_w = commitmentWeight * mean_n ||x_n - stopgrad(quantized_n)||^2."""
    target = Tensor(result["codewords"].reshape(x.shape), dtype=x.dtype)
    diff = x - target
    return T.mean(T.sumOp(diff * diff, axis=-1)) * commitmentWeight


def nearestCodeword(residual: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """Index of the nearest codeword (L2) per row; ties go to the lowest index."""
    distances = ((residual[:, None, :] - codebook[None, :, :]) ** 2).sum(axis=2)
    return distances.argmin(axis=1)


class ResidualVectorQuantizer(Module):

    def __init__(self, config: dict, rng):
        validateRvqConfig(config)
        self.config = dict(config)
        stages, size, dim = config["numStages"], config["codebookSize"], config["codeDim"]
        self.codebooks = []
        for _ in range(stages):
            book = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(size, dim))
            book[0] = 0.0
            self.codebooks.append(Tensor(book))
        self.idleSteps = [Tensor(np.zeros(size)) for _ in range(stages)]
        self.initialized = Tensor(np.zeros(1))

    @property
    def codeDim(self) -> int:
        return self.config["codeDim"]

    def isInitialized(self) -> bool:
        return bool(self.initialized.data[0] > 0)

    def setCodebooks(self, books):
        """Install explicit codebooks (row 0 of each stage must be zero)."""
        if len(books) != self.config["numStages"]:
            raise ValueError(f"expected {self.config['numStages']} codebooks, got {len(books)}")
        for s, book in enumerate(books):
            book = np.asarray(book, dtype=np.float64)
            if book.shape[1] != self.codeDim:
                raise ShapeError("rvq", f"codebook {s} has dim {book.shape[1]}, expected {self.codeDim}", axes=(1,))
            if np.any(book[0] != 0.0):
                raise ValueError(f"codebook {s}: codeword 0 must be the zero vector")
            self.codebooks[s] = Tensor(book)
            self.idleSteps[s] = Tensor(np.zeros(book.shape[0]))
        self.initialized = Tensor(np.ones(1))

    def initializeFromData(self, x: np.ndarray, rng):
        """Seed codewords 1.. from random data residuals, stage by stage."""
        residual = np.asarray(x, dtype=np.float64).reshape(-1, self.codeDim)
        for s, book in enumerate(self.codebooks):
            picks = rng.integers(0, residual.shape[0], size=book.shape[0] - 1)
            seeded = residual[picks] + rng.normal(0.0, 1e-3, size=(book.shape[0] - 1, self.codeDim))
            book.data[1:] = seeded.astype(book.dtype)
            chosen = book.data[nearestCodeword(residual, book.data)]
            residual = residual - chosen
        self.initialized.data[0] = 1.0

    def quantize(self, x) -> dict:
        """Quantize [..., codeDim] vectors. The returned `quantized` is straight-through."""
        if x.shape[-1] != self.codeDim:
            raise ShapeError("rvq.quantize", f"expected code dim {self.codeDim}, got {x.shape[-1]}", axes=(-1,))
        leading = x.shape[:-1]
        residual = np.asarray(x.data, dtype=np.float64).reshape(-1, self.codeDim)
        codewords = np.zeros_like(residual)
        tokens, norms, assignments = [], [], []
        for book in self.codebooks:
            codebook = np.asarray(book.data, dtype=np.float64)
            index = nearestCodeword(residual, codebook)
            assignments.append((residual.copy(), index))
            chosen = codebook[index]
            residual = residual - chosen
            codewords += chosen
            tokens.append(index.reshape(leading))
            norms.append(np.linalg.norm(residual, axis=1))

        target = Tensor(codewords.reshape(x.shape), dtype=x.dtype)
        quantized = x + T.stopGradient(target - x)
        result = {
            "tokens": np.stack(tokens),
            "quantized": quantized,
            "codewords": codewords.reshape(x.shape),
            "residualNorms": np.stack(norms),
            "assignments": assignments,
        }
        result["commitLoss"] = rvqLoss(x, result, self.config["commitmentWeight"])
        return result

    def lookup(self, tokens) -> np.ndarray:
        """Sum of the selected codewords for tokens shaped [stage, ...]."""
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.shape[0] != self.config["numStages"]:
            raise ValueError(f"expected {self.config['numStages']} token stages, got {tokens.shape[0]}")
        size = self.config["codebookSize"]
        if tokens.size and (tokens.min() < 0 or tokens.max() >= size):
            raise ValueError(f"unknown token id (codebook size {size}): range [{tokens.min()}, {tokens.max()}]")
        total = np.zeros(tokens.shape[1:] + (self.codeDim,))
        for s, book in enumerate(self.codebooks):
            total += book.data[tokens[s]]
        return total

    def emaUpdate(self, assignments, rng=None):
        """codeword <- decay * codeword + (1 - decay) * mean(assigned), with dead-code reseeding."""
        decay = self.config["emaDecay"]
        deadAfter = self.config.get("deadCodeSteps", 200)
        for s, (vectors, index) in enumerate(assignments):
            book = self.codebooks[s].data
            size = book.shape[0]
            counts = np.bincount(index, minlength=size).astype(np.float64)
            sums = np.zeros((size, book.shape[1]))
            np.add.at(sums, index, vectors)
            used = counts > 0
            used[0] = False
            means = sums[used] / counts[used][:, None]
            book[used] = (decay * book[used] + (1.0 - decay) * means).astype(book.dtype)

            idle = self.idleSteps[s].data
            idle += 1.0
            idle[counts > 0] = 0.0
            idle[0] = 0.0
            if rng is not None and deadAfter > 0:
                dead = np.flatnonzero(idle >= deadAfter)
                if dead.size:
                    picks = rng.integers(0, vectors.shape[0], size=dead.size)
                    book[dead] = vectors[picks].astype(book.dtype)
                    idle[dead] = 0.0
