import textwrap
import logging
import sys
from . import settings
import pprint
import os


class CustomFormatter(logging.Formatter):
    def __init__(self, width=80, indentPrefix = ""):
        super().__init__()
        self.width = width
        self.indentPrefix = indentPrefix
    def format(self, record):
        # Box-drawn reports keep their layout, plain messages get wrapped
        if isinstance(record.msg, str):
                if "╔" in record.msg:
                    return record.msg
                paragraphs = record.msg.split('\n')
                wrapped_paragraphs = [
                    textwrap.fill(p, width=self.width, subsequent_indent=self.indentPrefix) if p.strip() else ''
                    for p in paragraphs
                ]
                return '\n'.join(wrapped_paragraphs)
        # Structured records (training steps, metric dicts) are pretty printed
        return pprint.pformat(record.msg, sort_dicts=False, width=self.width)


def setupLogger(toFile: bool = False, filename: str = settings.outputFile, runDir: str = settings.runsDir):
    """Named run logger: progress on stderr, optionally mirrored into runDir/filename."""
    logger = logging.getLogger("factorvox")
    logger.setLevel(logging.INFO)
    logger.propagate = False

    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(CustomFormatter(width=80))
    logger.addHandler(handler)
    logger.toFile = False
    logger.filename = ""

    if toFile:
        setLogfile(logger, os.path.join(runDir, filename), deleteExisting=True)
    return logger

def setLogfile(logger, filename: str | None = None, indentPrefix = "", deleteExisting = False):
    """Route the file side of `logger` to `filename` (None drops file logging)."""
    for handler in logger.handlers[:]:
        if isinstance(handler, logging.FileHandler):
            logger.removeHandler(handler)
            handler.close()

    if isinstance(filename, str):
        os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
        if deleteExisting and os.path.isfile(filename):
            os.remove(filename)
        handler = logging.FileHandler(filename)
        handler.setFormatter(CustomFormatter(80, indentPrefix))
        logger.addHandler(handler)
        logger.toFile = True
        logger.filename = filename
    else:
        logger.toFile = False
        logger.filename = ""
