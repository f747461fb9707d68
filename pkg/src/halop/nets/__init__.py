"""Differentiable function approximators with in-repo reverse-mode autodiff."""

from .autodiff import Tensor, concat, constant, linearized
from .layers import ParameterStore
from .model import (
    EncoderConfig,
    ExecutionNet,
    HeadConfig,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "Tensor",
    "concat",
    "constant",
    "linearized",
    "ParameterStore",
    "EncoderConfig",
    "ExecutionNet",
    "HeadConfig",
    "load_checkpoint",
    "save_checkpoint",
]
