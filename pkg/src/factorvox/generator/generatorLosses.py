import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor

GENERATOR_TERMS = ("gate", "adversarial", "featureMatching", "time", "frequency", "similarity")


def gateEntropyLoss(weights, fixedGates: bool = False):
    """mean over utterances of ln 3 - H(time-averaged gate distribution); 0 for balanced gates."""
    if fixedGates:
        return Tensor(0.0)
    averaged = T.mean(T.asTensor(weights), axis=1)
    entropy = -T.sumOp(averaged * T.log(averaged + 1e-12), axis=1)
    return T.mean(float(np.log(3.0)) - entropy)


def timeDomainLoss(generated, reference):
    """L1 between waveforms cropped to the shorter one."""
    length = min(generated.shape[1], reference.shape[1])
    return T.mean(T.absolute(generated[:, :length] - T.asTensor(reference)[:, :length]))


def cosineSimilarity(a, b):
    """Row-wise cosine of [batch, dim] tensors."""
    a, b = T.asTensor(a), T.asTensor(b)
    return T.sumOp(a * b, axis=1) / (T.l2Norm(a, axis=1) * T.l2Norm(b, axis=1))


def similarityLoss(generatedStyle: dict, referenceStyle: dict):
    """(1 - cos) for timbre plus (1 - cos) for time-pooled emotion, batch means."""
    total = Tensor(0.0)
    for factor in ("timbre", "emotion"):
        reference = T.asTensor(referenceStyle[factor]).detach()
        total = total + T.mean(1.0 - cosineSimilarity(generatedStyle[factor], reference))
    return total


def generatorTotalLoss(components: dict, weights: dict):
    """Weighted sum of the six generator terms; zero-weighted terms are skipped entirely."""
    total = Tensor(0.0)
    for term in GENERATOR_TERMS:
        if weights[term] == 0:
            continue
        total = total + T.asTensor(components[term]) * weights[term]
    return total
