from . import commands

# Currently existing subcommands
commandMapping = {
    "synth-data": commands.synthData,
    "train": commands.train,
    "encode": commands.encode,
    "generate": commands.generate,
    "evaluate": commands.evaluate,
    "export-embeddings": commands.exportEmbeddings,
    "gradcheck": commands.gradcheck,
}
