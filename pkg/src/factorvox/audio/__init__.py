from .features import melBasis, logMelSpectrogram, multiResolutionMelLoss, frameEnergyDb, trackF0
from .wavio import readWav, writeWav

__all__ = ['melBasis', 'logMelSpectrogram', 'multiResolutionMelLoss', 'frameEnergyDb', 'trackF0', 'readWav', 'writeWav']
