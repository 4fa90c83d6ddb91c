from .core import Experiment

__all__ = ['Experiment']
