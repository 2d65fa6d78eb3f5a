"""Knowledge graph embedding models: scoring, training and prediction."""

from .model import EmbeddingModel, init_model, load_checkpoint, save_checkpoint
from .scoring import MODEL_KINDS, canonical_kind, get_scoring_function
from .train import (
    SamplingError,
    ScoredTriple,
    TrainConfig,
    TrainingError,
    accept,
    corrupt,
    fit,
    predict,
)

__all__ = [
    "EmbeddingModel",
    "MODEL_KINDS",
    "SamplingError",
    "ScoredTriple",
    "TrainConfig",
    "TrainingError",
    "accept",
    "canonical_kind",
    "corrupt",
    "fit",
    "get_scoring_function",
    "init_model",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
]
