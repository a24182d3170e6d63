"""Minimal numpy neural substrate with hand-written backward passes."""
from .attention import AttentionConfig, EncoderLayer, MultiHeadAttention, TransformerEncoder, multi_head_attention
from .checkpoint import load_module, load_tensors, save_module, save_tensors
from .core import (
    Module,
    Parameter,
    affine_forward,
    log_softmax,
    log_softmax_backward,
    positional_encoding,
    sigmoid,
)
from .gradcheck import GradCheckReport, check_gradients
from .layers import MLP, Embedding, LayerNorm, Linear
from .optim import Adam, adam_step
