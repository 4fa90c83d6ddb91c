"""Linear probes on frozen representations and the speaker network behind the SECS surrogate."""

import numpy as np
from scipy import optimize

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, noGrad, float64Mode
from ..autodiff.optim import Adam
from ..nn.modules import Module, Linear
from ..nn.blocks import ConvStack
from ..audio.features import logMelSpectrogram
from ..core import settings


def _standardize(train: np.ndarray, test: np.ndarray) -> tuple:
    mean = train.mean(axis=0)
    scale = train.std(axis=0)
    scale[scale == 0] = 1.0
    return (train - mean) / scale, (test - mean) / scale


def fitSoftmaxProbe(features: np.ndarray, labels: np.ndarray, l2: float = 1e-3, maxIter: int = 500) -> tuple:
    """Multinomial logistic regression by L-BFGS; returns (weights [d + 1, K], classes)."""
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError(f"probe needs at least two classes, got {classes.tolist()}")
    features = np.hstack([features, np.ones((len(features), 1))])
    targets = (labels[:, None] == classes[None, :]).astype(np.float64)
    shape = (features.shape[1], len(classes))

    def objective(flat):
        with float64Mode():
            weights = Tensor(flat.reshape(shape), requiresGrad=True)
            logProbs = T.logSoftmax(Tensor(features) @ weights, axis=1)
            loss = -T.mean(T.sumOp(logProbs * Tensor(targets), axis=1)) + T.sumOp(weights * weights) * l2
            loss.backward()
        return loss.item(), weights.grad.reshape(-1).astype(np.float64)

    result = optimize.minimize(objective, np.zeros(np.prod(shape)), jac=True, method="L-BFGS-B",
                               options={"maxiter": maxIter})
    return result.x.reshape(shape), classes


def predictProbe(weights: np.ndarray, classes: np.ndarray, features: np.ndarray) -> np.ndarray:
    features = np.hstack([features, np.ones((len(features), 1))])
    return classes[(features @ weights).argmax(axis=1)]


def probeAccuracy(trainX, trainY, testX, testY, l2: float = 1e-3) -> float:
    """Accuracy on the test split of a linear softmax probe fitted on the train split."""
    trainX, testX = np.asarray(trainX, dtype=np.float64), np.asarray(testX, dtype=np.float64)
    trainY, testY = np.asarray(trainY), np.asarray(testY)
    if len(testY) == 0:
        raise ValueError("probe test split is empty")
    trainX, testX = _standardize(trainX, testX)
    weights, classes = fitSoftmaxProbe(trainX, trainY, l2)
    return float(np.mean(predictProbe(weights, classes, testX) == testY))


def splitUtterances(count: int, trainFraction: float, seed: int) -> tuple:
    """Disjoint (train, test) utterance indices."""
    order = np.random.default_rng([int(seed), 101]).permutation(count)
    cut = min(max(1, int(round(trainFraction * count))), count - 1)
    return np.sort(order[:cut]), np.sort(order[cut:])


class ProbeMatrix():
    """3x3 accuracy grid: rows are representations, columns the predicted labels."""

    rows = settings.factors
    columns = settings.labelNames

    def __init__(self, values=None):
        self.values = np.zeros((3, 3)) if values is None else np.asarray(values, dtype=np.float64)
        if self.values.shape != (3, 3) or np.any((self.values < 0) | (self.values > 1)):
            raise ValueError(f"probe matrix must be 3x3 with entries in [0, 1], got {self.values}")

    def __getitem__(self, key: tuple) -> float:
        row, column = key
        return float(self.values[self.rows.index(row), self.columns.index(column)])

    def __setitem__(self, key: tuple, value: float):
        row, column = key
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"probe accuracy {value} is outside [0, 1]")
        self.values[self.rows.index(row), self.columns.index(column)] = value

    def targetAboveLeakage(self) -> bool:
        """Each diagonal entry beats every other entry of its row."""
        return all(self.values[i, i] > self.values[i, j] for i in range(3) for j in range(3) if i != j)

    def asDict(self) -> dict:
        return {row: {column: self[row, column] for column in self.columns} for row in self.rows}


def frameProbeData(frameFeatures: list, frameLabels: list, indices) -> tuple:
    """Stack per-frame features and labels of the chosen utterances."""
    x = np.concatenate([frameFeatures[i] for i in indices])
    y = np.concatenate([frameLabels[i] for i in indices])
    return x, y


def buildProbeMatrix(representations: dict, labels: dict, trainFraction: float, l2: float, seed: int) -> ProbeMatrix:
    """Fit all nine probes.

    representations[factor] = {"pooled": [N, d], "frames": list of [F_i, d]}
    labels = {"speaker": [N], "emotion": [N], "content": list of per-frame symbols}
    Utterance-level labels use pooled vectors; content uses frames.
    """
    count = len(labels["speaker"])
    trainIdx, testIdx = splitUtterances(count, trainFraction, seed)
    matrix = ProbeMatrix()
    for factor in ProbeMatrix.rows:
        rep = representations[factor]
        for column in ("speaker", "emotion"):
            y = np.asarray(labels[column])
            matrix[factor, column] = probeAccuracy(rep["pooled"][trainIdx], y[trainIdx], rep["pooled"][testIdx], y[testIdx], l2)
        trainX, trainY = frameProbeData(rep["frames"], labels["content"], trainIdx)
        testX, testY = frameProbeData(rep["frames"], labels["content"], testIdx)
        matrix[factor, "content"] = probeAccuracy(trainX, trainY, testX, testY, l2)
    return matrix


class SpeakerEmbedder(Module):
    """Log-mel conv encoder, time-mean pooled; trained as a speaker classifier."""

    def __init__(self, config: dict, numSpeakers: int, sampleRate: int, hop: int, rng):
        self.sampleRate = sampleRate
        self.hop = hop
        self.numMels = 40
        self.front = ConvStack([self.numMels, config["channels"], config["channels"]], 3, rng, linearOut=False)
        self.projection = Linear(config["channels"], config["dim"], rng)
        self.classifier = Linear(config["dim"], numSpeakers, rng)

    def forward(self, wave):
        mel = logMelSpectrogram(wave, self.sampleRate, 512, self.hop, self.numMels)
        pooled = T.mean(self.front(mel), axis=2)
        return self.projection(pooled)

    def embed(self, wave) -> np.ndarray:
        with noGrad():
            return self.forward(Tensor(np.asarray(wave, dtype=np.float32)[None])).data[0]

    def fit(self, waves: list, speakers, config: dict, rng, segmentFrames: int = 64, batchSize: int = 8, logger=None) -> float:
        """Cross-entropy training on random fixed-length crops; returns the final loss."""
        optimizer = Adam(self.namedParameters(), learningRate=config["learningRate"])
        speakers = np.asarray(speakers)
        segment = segmentFrames * self.hop
        loss = None
        for step in range(config["steps"]):
            picks = rng.integers(0, len(waves), size=batchSize)
            crops = []
            for i in picks:
                wave = waves[i]
                if len(wave) <= segment:
                    crops.append(np.pad(wave, (0, segment - len(wave))))
                else:
                    start = int(rng.integers(0, len(wave) - segment + 1))
                    crops.append(wave[start:start + segment])
            optimizer.zeroGrad()
            logits = self.classifier(T.leakyRelu(self.forward(Tensor(np.stack(crops).astype(np.float32)))))
            onehot = np.eye(self.classifier.weight.shape[1])[speakers[picks]]
            loss = -T.mean(T.sumOp(T.logSoftmax(logits, axis=1) * Tensor(onehot), axis=1))
            loss.backward()
            optimizer.step()
            if logger is not None and step % 100 == 0:
                logger.info({"speakerEmbedder": step, "loss": round(loss.item(), 5)})
        return loss.item() if loss is not None else float("nan")
