"""Preferential-attachment random simplicial complexes."""

from .params import MAX_K, ModelParams, ParameterError

__all__ = ["MAX_K", "ModelParams", "ParameterError"]
__version__ = "0.1.0"
