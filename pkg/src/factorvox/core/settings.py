# ╔════════════════════════════════════════════════════════════════╗
# ║                      GENERAL SETTINGS                          ║
# ╚════════════════════════════════════════════════════════════════╝
# Run directory and log file naming
runsDir = "./runs"
outputFile = "factorvox.log"
defaultSeed = 0

# Factor names, in the order every table and report uses
factors = ["timbre", "emotion", "content"]
labelNames = ["speaker", "emotion", "content"]

# ╔════════════════════════════════════════════════════════════════╗
# ║                      TOY CORPUS SETTINGS                       ║
# ╚════════════════════════════════════════════════════════════════╝
defaultCorpusSpec = {
    "numSpeakers": 4,
    "numEmotions": 3,
    "alphabetSize": 8,              # symbol 0 is the unvoiced symbol
    "minSymbols": 16,
    "maxSymbols": 32,
    "sampleRate": 16000,
    "hop": 160,
    "framesPerSymbol": 4,
    "noiseLevel": 0.003,
    "parallelRealizations": 2,      # utterances sharing one content sequence
    "speakerBasePitches": [95.0, 120.0, 160.0, 210.0],
    "speakerFormantShifts": [0.92, 1.0, 1.07, 1.15],
    "speakerTilts": [1.0, 1.3, 0.8, 1.1],
    "heldOutSpeaker": 3,
    "heldOutEmotion": 2,
}

defaultSplitSizes = {
    "train": 200,
    "seen": 40,
    "unseen": 40,
}

# ╔════════════════════════════════════════════════════════════════╗
# ║                      MODEL SETTINGS                            ║
# ╚════════════════════════════════════════════════════════════════╝
defaultModelConfig = {
    "sampleRate": 16000,
    "hop": 160,
    "codec": {
        "channels": 32,
        "featureDim": 64,
        "decoderChannels": 64,
    },
    "encoder": {
        "width": 64,
        "heads": 4,
        "contentDim": 64,
        "emotionDim": 32,
        "timbreDim": 64,
    },
    "rvq": {
        "content": {"numStages": 2, "codebookSize": 64, "codeDim": 64,
                    "commitmentWeight": 0.25, "emaDecay": 0.99, "deadCodeSteps": 200},
        "emotion": {"numStages": 1, "codebookSize": 32, "codeDim": 32,
                    "commitmentWeight": 0.25, "emaDecay": 0.99, "deadCodeSteps": 200},
        "timbre": {"numStages": 1, "codebookSize": 32, "codeDim": 64,
                   "commitmentWeight": 0.25, "emaDecay": 0.99, "deadCodeSteps": 200},
    },
    "generator": {
        "width": 64,
        "blocks": 4,
        "heads": 4,
        "hsanLambda": 0.1,
    },
    "discriminator": {
        "scales": 3,
        "channels": [8, 16, 32],
    },
    "mi": {
        "hidden": 64,
        "learningRate": 1e-3,
        "estimatorSteps": 5,
        "warmupFraction": 0.2,
        "maxWeight": 1.0,
        "miOnCodewords": False,
    },
    "speakerEmbedder": {
        "channels": 32,
        "dim": 32,
        "steps": 300,
        "learningRate": 1e-3,
    },
}

# ╔════════════════════════════════════════════════════════════════╗
# ║                      TRAINING SETTINGS                         ║
# ╚════════════════════════════════════════════════════════════════╝
_sharedStageConfig = {
    "learningRate": 2e-4,
    "checkpointEvery": 500,
    "keepLast": 3,
    "logEvery": 50,
    "resume": False,
    "prefetch": 2,
}

defaultStageConfigs = {
    1: _sharedStageConfig | {
        "steps": 5000,
        "batchSize": 8,
        "discLearningRate": 1e-4,
        "segmentFrames": 32,
    },
    2: _sharedStageConfig | {
        "steps": 3000,
        "batchSize": 12,
        "segmentFrames": 64,
        "noMi": False,
        "noContrastive": False,
        "noProsody": False,
    },
    3: _sharedStageConfig | {
        "steps": 5000,
        "batchSize": 8,
        "discLearningRate": 1e-4,
        "segmentFrames": 32,
        "unfreezeFraction": 0.5,
        "decoderLrScale": 0.1,
        "noDyGate": False,
        "noHsan": False,
    },
}

# Published iteration counts and batch sizes, selected with --set profile=full
fullScaleProfile = {
    1: {"steps": 92000, "batchSize": 24},
    2: {"steps": 27500, "batchSize": 12},
    3: {"steps": 91800, "batchSize": 72},
}

# ╔════════════════════════════════════════════════════════════════╗
# ║                      LOSS WEIGHT SETTINGS                      ║
# ╚════════════════════════════════════════════════════════════════╝
defaultEncoderLossWeights = {
    "contrastive": 5.0,
    "commitment": 1.0,
    "prosody": 2.0,
    "temperature": 0.1,
}

defaultGeneratorLossWeights = {
    "gate": 1.0,
    "adversarial": 3.0,
    "featureMatching": 3.0,
    "time": 0.1,
    "frequency": 1.0,
    "similarity": 1.0,
}

# (nFft, hop, numMels) for the multi-resolution log-mel loss
melResolutions = [(512, 128, 40), (1024, 256, 64), (256, 64, 20)]

# ╔════════════════════════════════════════════════════════════════╗
# ║                      EVALUATION SETTINGS                       ║
# ╚════════════════════════════════════════════════════════════════╝
defaultEvaluationConfig = {
    "split": "seen",
    "reconstructionTriples": 200,
    "compositionalTriples": 200,
    "probeTrainFraction": 0.7,
    "probeL2": 1e-3,
    "minUtterancesForMi": 50,
    "minVoicedFrames": 5,
    "workers": 4,
}

# Default number of seeded cases per registered gradient check
gradcheckSeeds = 100
