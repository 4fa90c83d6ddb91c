import logging
import os

from . import constants
from . import settings
from . import customlogger as cl
from .utils import resolveConfig, writeSnapshot


class Experiment():
    """Main class for FactorVox, holds the resolved run configuration and dispatches commands"""

    def __init__(self,
                 configPath: str | None = None,
                 overrides: list[str] | None = None,
                 seed: int | None = None,
                 fileLogging: bool = True,
                 fileName: str = settings.outputFile,
                 verbose: bool = False):
        """
        Initialize a FactorVox experiment.

        Args:
            configPath: Optional JSON file deep-merged over the defaults in core/settings.py
            overrides: 'dotted.key=value' strings applied after the file (values parse as JSON)
            seed: Run seed, applied last
            fileLogging: Whether to mirror the log into runDir/fileName
            fileName: Log file name inside the run directory
            verbose: Log at DEBUG instead of INFO
        """
        self.config = resolveConfig(configPath, overrides, seed)
        self.logger = cl.setupLogger(toFile=fileLogging, filename=fileName, runDir=self.config["runDir"])
        self.logger.setLevel(logging.DEBUG if verbose else logging.INFO)
        self.outfile = os.path.join(self.config["runDir"], fileName) if fileLogging else None

    def run(self, command: str, options: dict | None = None) -> dict:
        if command not in constants.commandMapping:
            raise KeyError(f"unknown command '{command}' (known: {', '.join(constants.commandMapping)})")
        options = options or {}
        writeSnapshot(self.config["runDir"], self.config)
        self.logger.info(f"Starting {command} (seed {self.config['seed']}, run {self.config['runDir']})")
        try:
            result = constants.commandMapping[command](self, options)
        except Exception as err:
            self.logger.error(f"{command} failed: {str(err)}")
            raise
        self.logger.info(f"Finished {command}")
        return result
