from .tensor import Tensor, Parameter, ShapeError, noGrad, float64Mode
from .optim import Adam, AdamState
from .gradcheck import gradCheck

__all__ = ['Tensor', 'Parameter', 'ShapeError', 'noGrad', 'float64Mode', 'Adam', 'AdamState', 'gradCheck']
