from .rvq import ResidualVectorQuantizer, rvqLoss, nearestCodeword, validateRvqConfig

__all__ = ['ResidualVectorQuantizer', 'rvqLoss', 'nearestCodeword', 'validateRvqConfig']
