"""Neural metadata model: knowledge/distribution fusion over two encoders.

Toy-scale but numerically faithful: masked entity attention at sub-token
level, average pooling to columns, statistics/category fusion at column
level, multi-task heads, AdamW training, and a finite-difference gradient
checker.
"""

from fieldmeta.kdf.config import EncoderDims, KdfConfig, TrainConfig
from fieldmeta.kdf.embedder import EntityStore, HashTokenEmbedder, tokenize_table
from fieldmeta.kdf.fusion import (
    DistributionFusion,
    KnowledgeFusion,
    build_visibility,
    pool_columns,
)
from fieldmeta.kdf.gradcheck import grad_check
from fieldmeta.kdf.model import KdfModel, TableInputs, prepare_inputs
from fieldmeta.kdf.train import (
    KdfPredictor,
    TrainResult,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "DistributionFusion",
    "EncoderDims",
    "EntityStore",
    "HashTokenEmbedder",
    "KdfConfig",
    "KdfModel",
    "KdfPredictor",
    "KnowledgeFusion",
    "TableInputs",
    "TrainConfig",
    "TrainResult",
    "build_visibility",
    "grad_check",
    "load_checkpoint",
    "pool_columns",
    "prepare_inputs",
    "save_checkpoint",
    "tokenize_table",
    "train",
]
