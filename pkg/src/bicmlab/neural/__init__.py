"""Minimal numpy network engine for the bit-flip estimators."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .flops import attention_flops, encoder_layer_flops, quadratic_fit_exponent
from .layers import Dense, GRULayer, LayerNorm, Param
from .models import (
    RnnConfig,
    RnnEstimator,
    TransformerConfig,
    TransformerEstimator,
    approx_params_rnn,
    approx_params_transformer,
    build_rnn_estimator,
    build_transformer_estimator,
    count_params_rnn,
    count_params_transformer,
)
from .train import (
    Adam,
    TrainingDiverged,
    all_zeros_baseline_bce,
    bce_with_logits,
    gradient_check,
    train_step,
)

__all__ = [
    "Adam",
    "CheckpointError",
    "Dense",
    "GRULayer",
    "LayerNorm",
    "Param",
    "RnnConfig",
    "RnnEstimator",
    "TrainingDiverged",
    "TransformerConfig",
    "TransformerEstimator",
    "all_zeros_baseline_bce",
    "approx_params_rnn",
    "approx_params_transformer",
    "attention_flops",
    "bce_with_logits",
    "build_rnn_estimator",
    "build_transformer_estimator",
    "count_params_rnn",
    "count_params_transformer",
    "encoder_layer_flops",
    "gradient_check",
    "load_checkpoint",
    "quadratic_fit_exponent",
    "save_checkpoint",
    "train_step",
]
