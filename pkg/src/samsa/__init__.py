"""Sampling self-attention: linear-complexity attention built on a
parallel differentiable top-k sampler, with its own autodiff core and
verification oracles."""

from .attention import (
    AttentionConfig,
    Model,
    ModelConfig,
    SamsaLayerParams,
    build_model,
    full_attention_layer_forward,
    rms_norm,
    samsa_layer_forward,
    scaled_dot_attention,
)
from .graph import GraphInstance, GraphTokenBatch, GraphTokenizer, expand_undirected
from .optim import AdamW, cosine_warmup_lr
from .relax import gumbel_sigmoid, gumbel_softmax, st_gumbel_sigmoid, st_gumbel_softmax
from .rng import GumbelRng
from .sampler import (
    SampleResult,
    arg_topk,
    brute_force_set_sample,
    multi_head_sample,
    sample_with_replacement,
    sample_without_replacement,
)
from .tensor import OP_REGISTRY, ShapeError, Tensor, no_grad, precision, set_default_dtype

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "AttentionConfig",
    "GraphInstance",
    "GraphTokenBatch",
    "GraphTokenizer",
    "GumbelRng",
    "Model",
    "ModelConfig",
    "OP_REGISTRY",
    "SampleResult",
    "SamsaLayerParams",
    "ShapeError",
    "Tensor",
    "arg_topk",
    "brute_force_set_sample",
    "build_model",
    "cosine_warmup_lr",
    "expand_undirected",
    "full_attention_layer_forward",
    "gumbel_sigmoid",
    "gumbel_softmax",
    "multi_head_sample",
    "no_grad",
    "precision",
    "rms_norm",
    "sample_with_replacement",
    "sample_without_replacement",
    "samsa_layer_forward",
    "scaled_dot_attention",
    "set_default_dtype",
    "st_gumbel_sigmoid",
    "st_gumbel_softmax",
]
