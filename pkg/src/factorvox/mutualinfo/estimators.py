"""Neural mutual-information estimators and the pairwise MI penalty.

CLUB gives the upper bound that the encoder minimizes. MINE gives a
Donsker-Varadhan lower bound that is only monitored. Both train their own
networks with private Adam optimizers, alternating with the encoder.
"""

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, ShapeError, noGrad
from ..autodiff.optim import Adam
from ..nn.modules import Module
from ..nn.blocks import MLP

FACTOR_PAIRS = (("timbre", "emotion"), ("timbre", "content"), ("emotion", "content"))

LOG_VARIANCE_RANGE = (-6.0, 6.0)


def pairKey(first: str, second: str) -> str:
    return f"{first}:{second}"


def _checkBatch(op: str, x, y):
    if x.shape[0] != y.shape[0]:
        raise ShapeError(op, f"x has {x.shape[0]} rows but y has {y.shape[0]}", axes=(0,))
    if x.shape[0] < 2:
        raise ValueError(f"{op}: batch size must be >= 2 for the marginal term, got {x.shape[0]}")


class CLUBEstimator(Module):
    """Contrastive log-ratio upper bound with a diagonal Gaussian q(y|x)."""

    def __init__(self, xDim: int, yDim: int, rng, hidden: int = 64, learningRate: float = 1e-3):
        self.yDim = yDim
        self.network = MLP([xDim, hidden, hidden, 2 * yDim], rng)
        self._optimizer = Adam(self.namedParameters(), learningRate=learningRate)

    @property
    def optimizer(self) -> Adam:
        return self._optimizer

    def conditional(self, x):
        out = self.network(x)
        mu = out[:, :self.yDim]
        logVariance = T.clip(out[:, self.yDim:], *LOG_VARIANCE_RANGE)
        return mu, logVariance

    def logLikelihood(self, x, y):
        """Mean Gaussian log q(y|x), dropping the constant term."""
        mu, logVariance = self.conditional(x)
        diff = mu - y
        perSample = T.sumOp(diff * diff * T.exp(-logVariance) + logVariance, axis=1)
        return T.mean(perSample) * -0.5

    def upperBound(self, x, y):
        """E_joint[log q(y|x)] - E_marginal[log q(y'|x)] over all (i, j) pairs of the batch."""
        x, y = T.asTensor(x), T.asTensor(y)
        _checkBatch("club_upper_bound", x, y)
        mu, logVariance = self.conditional(x)
        precision = T.exp(-logVariance)
        diff = mu - y
        positive = T.sumOp(diff * diff * precision, axis=1) * -0.5

        # mean_j (mu_i - y_j)^2 = (mu_i - mean(y))^2 + var(y)
        yMean = T.mean(y, axis=0, keepdims=True)
        yCentred = y - yMean
        yVariance = T.mean(yCentred * yCentred, axis=0, keepdims=True)
        offset = mu - yMean
        negative = T.sumOp((offset * offset + yVariance) * precision, axis=1) * -0.5
        return T.mean(positive - negative)

    def trainStep(self, x, y) -> float:
        """One maximum-likelihood step of q(y|x) on detached inputs; returns the fitted log-likelihood."""
        x, y = T.asTensor(x).detach(), T.asTensor(y).detach()
        _checkBatch("club_train_step", x, y)
        self._optimizer.zeroGrad()
        loss = -self.logLikelihood(x, y)
        loss.backward()
        self._optimizer.step()
        return -loss.item()

    def estimate(self, x, y) -> float:
        with noGrad():
            return self.upperBound(T.asTensor(x).detach(), T.asTensor(y).detach()).item()


class MINEEstimator(Module):
    """Donsker-Varadhan lower bound with a moving-average corrected denominator."""

    def __init__(self, xDim: int, yDim: int, rng, hidden: int = 64, learningRate: float = 1e-3, emaDecay: float = 0.99):
        self.statistic = MLP([xDim + yDim, hidden, hidden, 1], rng)
        self.emaDecay = emaDecay
        self.logDenominator = Tensor(np.zeros(1))
        self.emaReady = Tensor(np.zeros(1))
        self._optimizer = Adam(self.namedParameters(), learningRate=learningRate)

    @property
    def optimizer(self) -> Adam:
        return self._optimizer

    def _scores(self, x, y):
        return self.statistic(T.concat([x, y], axis=1)).reshape(x.shape[0])

    def _terms(self, x, y, rng):
        x, y = T.asTensor(x), T.asTensor(y)
        _checkBatch("mine_lower_bound", x, y)
        shuffled = T.getItem(y, rng.permutation(y.shape[0]))
        joint = T.mean(self._scores(x, y))
        logMeanExp = T.logSumExp(self._scores(x, shuffled), axis=0) - np.log(x.shape[0])
        return joint, logMeanExp

    def lowerBound(self, x, y, rng):
        """E_joint[T] - log E_marginal[exp T] for one shuffled marginal draw."""
        joint, logMeanExp = self._terms(x, y, rng)
        return joint - logMeanExp

    def trainStep(self, x, y, rng) -> float:
        x, y = T.asTensor(x).detach(), T.asTensor(y).detach()
        self._optimizer.zeroGrad()
        joint, logMeanExp = self._terms(x, y, rng)
        current = logMeanExp.item()
        if self.emaReady.data[0] == 0:
            self.logDenominator.data[0] = current
            self.emaReady.data[0] = 1.0
        else:
            previous = float(self.logDenominator.data[0])
            self.logDenominator.data[0] = np.logaddexp(np.log(self.emaDecay) + previous, np.log1p(-self.emaDecay) + current)
        # gradient of exp(lme - c) is exp(lme - c) * grad(lme), c the running log-denominator
        corrected = T.exp(logMeanExp - float(self.logDenominator.data[0]))
        loss = corrected - joint
        loss.backward()
        self._optimizer.step()
        return joint.item() - current

    def estimate(self, x, y, rng) -> float:
        with noGrad():
            return self.lowerBound(T.asTensor(x).detach(), T.asTensor(y).detach(), rng).item()


class WarmupSchedule():
    """alpha(epoch) = maxWeight * min(1, epoch / rampEpochs)."""

    def __init__(self, rampEpochs: int, maxWeight: float = 1.0):
        if rampEpochs < 1:
            raise ValueError(f"warm-up rampEpochs must be >= 1, got {rampEpochs}")
        if maxWeight < 0:
            raise ValueError(f"warm-up maxWeight must be >= 0, got {maxWeight}")
        self.rampEpochs = rampEpochs
        self.maxWeight = maxWeight

    def __call__(self, epoch: int) -> float:
        if epoch < 0:
            raise ValueError(f"epoch must be >= 0, got {epoch}")
        return self.maxWeight * min(1.0, epoch / self.rampEpochs)


def buildEstimators(dims: dict, rng, kind: str = "club", hidden: int = 64, learningRate: float = 1e-3) -> dict:
    """One estimator per factor pair, keyed 'first:second'."""
    classes = {"club": CLUBEstimator, "mine": MINEEstimator}
    if kind not in classes:
        raise ValueError(f"unknown MI estimator kind '{kind}', expected one of {list(classes)}")
    return {
        pairKey(a, b): classes[kind](dims[a], dims[b], rng, hidden=hidden, learningRate=learningRate)
        for a, b in FACTOR_PAIRS
    }


def miPairBounds(embeddings: dict, estimators: dict) -> dict:
    """CLUB bound per factor pair, keyed 'first:second'."""
    return {
        pairKey(a, b): estimators[pairKey(a, b)].upperBound(embeddings[a], embeddings[b])
        for a, b in FACTOR_PAIRS
    }


def miPenaltyTotal(embeddings: dict, estimators: dict, alpha: float):
    """alpha * sum of CLUB bounds over the three factor pairs; exactly 0 when alpha is 0."""
    if alpha == 0:
        return Tensor(0.0)
    total = None
    for bound in miPairBounds(embeddings, estimators).values():
        total = bound if total is None else total + bound
    return total * alpha
