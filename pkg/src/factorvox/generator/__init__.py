from .speechGenerator import SpeechGenerator, DynamicFusion, StyleInjection, hsan, stretchFrames
from .generatorLosses import (gateEntropyLoss, timeDomainLoss, cosineSimilarity, similarityLoss,
                              generatorTotalLoss, GENERATOR_TERMS)

__all__ = ['SpeechGenerator', 'DynamicFusion', 'StyleInjection', 'hsan', 'stretchFrames',
           'gateEntropyLoss', 'timeDomainLoss', 'cosineSimilarity', 'similarityLoss',
           'generatorTotalLoss', 'GENERATOR_TERMS']
