from .pipeline import (trainStage1, trainStage2, trainStage3, stageTrainers, loadInferenceModels,
                       PrerequisiteError, TrainingDiverged)
from .models import encodeWaveform, generateWaveform, codesToEmbeddings
from .checkpoints import saveCheckpoint, loadCheckpoint, finalCheckpoint

__all__ = ['trainStage1', 'trainStage2', 'trainStage3', 'stageTrainers', 'loadInferenceModels',
           'PrerequisiteError', 'TrainingDiverged', 'encodeWaveform', 'generateWaveform',
           'codesToEmbeddings', 'saveCheckpoint', 'loadCheckpoint', 'finalCheckpoint']
