"""Compact depthwise-separable CNN for 7-class facial expression inference."""

from .evaluate import ConfusionMatrix, evaluate
from .ferw import load_model, read_model, save_model, serialize
from .model import (
    LABELS,
    EmotionDistribution,
    Kind,
    LayerSpec,
    Model,
    classify,
    param_count,
    reference_model,
    shape_check,
)
from .ops import (
    batch_norm,
    conv2d,
    depthwise_conv2d,
    global_avg_pool,
    max_pool,
    pointwise_conv2d,
    relu,
    residual_add,
    softmax,
)

__all__ = [
    "LABELS", "ConfusionMatrix", "EmotionDistribution", "Kind", "LayerSpec",
    "Model", "batch_norm", "classify", "conv2d", "depthwise_conv2d", "evaluate",
    "global_avg_pool", "load_model", "max_pool", "param_count",
    "pointwise_conv2d", "read_model", "reference_model", "relu",
    "residual_add", "save_model", "serialize", "shape_check", "softmax",
]
