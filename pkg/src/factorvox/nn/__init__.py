from .modules import Module, Linear, Conv1d, frozen
from .blocks import instanceNorm, MLP, ConvStack, MultiScaleResBlock, MultiHeadAttention, CrossAttentionPool, AttentionPool

__all__ = ['Module', 'Linear', 'Conv1d', 'frozen', 'instanceNorm', 'MLP', 'ConvStack',
           'MultiScaleResBlock', 'MultiHeadAttention', 'CrossAttentionPool', 'AttentionPool']
