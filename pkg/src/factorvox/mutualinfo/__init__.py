from .estimators import (CLUBEstimator, MINEEstimator, WarmupSchedule, FACTOR_PAIRS,
                         pairKey, buildEstimators, miPairBounds, miPenaltyTotal)

__all__ = ['CLUBEstimator', 'MINEEstimator', 'WarmupSchedule', 'FACTOR_PAIRS',
           'pairKey', 'buildEstimators', 'miPairBounds', 'miPenaltyTotal']
