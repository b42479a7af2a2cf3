from .layers import (
    AttentionBlock,
    BiLSTM,
    Layer,
    LayerNorm,
    Linear,
    LSTM,
    MultiHeadSelfAttention,
    attention,
)
from .model import (
    ModelSpec,
    SequenceRegressor,
    count_parameters,
    load_checkpoint,
    save_checkpoint,
)
from .params import Parameter, xavier_uniform

__all__ = [
    "AttentionBlock",
    "BiLSTM",
    "Layer",
    "LayerNorm",
    "Linear",
    "LSTM",
    "MultiHeadSelfAttention",
    "ModelSpec",
    "Parameter",
    "SequenceRegressor",
    "attention",
    "count_parameters",
    "load_checkpoint",
    "save_checkpoint",
    "xavier_uniform",
]
