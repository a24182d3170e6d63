"""Cascading category-level recommender.

M1 (a transformer category predictor) proposes candidates and their
probabilities, a VAE embeds each user's item-level behaviour per category
window, and M2 re-ranks the candidates with a precision-oriented loss.
"""
from .config import RunConfig
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["RunConfig", "KERNEL_BACKEND", "__version__"]
