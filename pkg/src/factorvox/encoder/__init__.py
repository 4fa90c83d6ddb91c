from .factorEncoder import FactorEncoder, factorCodesFromOutputs, pooledEmbeddings
from .encoderLosses import supervisedContrastive, prosodyLoss, encoderTotalLoss

__all__ = ['FactorEncoder', 'factorCodesFromOutputs', 'pooledEmbeddings',
           'supervisedContrastive', 'prosodyLoss', 'encoderTotalLoss']
