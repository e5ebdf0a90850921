"""Generalized category discovery over precomputed feature embeddings.

Stage 1 learns a projection head and prototype bank by enforcing consistency
between feature-prototype similarities and optimal-transport cluster
assignments across weak/strong views; stage 2 builds a semi-supervised
similarity graph and runs Louvain community detection, yielding cluster
labels and the number of categories together.
"""

__version__ = "0.1.0"

from .data import (
    EmbeddingDataset,
    EmbeddingIOError,
    SplitSpec,
    SynthSpec,
    generate_synthetic,
    load_embeddings,
    make_split,
    save_embeddings,
)
from .evaluation import EvalReport, evaluate, hungarian_match
from .graph import Partition, SimilarityGraph, build_graph, louvain, modularity
from .losses import (
    AssignmentBatch,
    SinkhornSpec,
    Temperatures,
    js_consistency_loss,
    prototype_probs,
    sinkhorn_codes,
    sup_con_loss,
    swapped_prediction_loss,
)
from .trainer import (
    ProjectionHead,
    PrototypeBank,
    TrainSpec,
    TrainingDiverged,
    embed,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .views import ViewSpec, make_views

__all__ = [
    "AssignmentBatch",
    "EmbeddingDataset",
    "EmbeddingIOError",
    "EvalReport",
    "Partition",
    "ProjectionHead",
    "PrototypeBank",
    "SimilarityGraph",
    "SinkhornSpec",
    "SplitSpec",
    "SynthSpec",
    "Temperatures",
    "TrainSpec",
    "TrainingDiverged",
    "ViewSpec",
    "build_graph",
    "embed",
    "evaluate",
    "generate_synthetic",
    "hungarian_match",
    "js_consistency_loss",
    "load_checkpoint",
    "load_embeddings",
    "louvain",
    "make_split",
    "make_views",
    "modularity",
    "prototype_probs",
    "save_checkpoint",
    "save_embeddings",
    "sinkhorn_codes",
    "sup_con_loss",
    "swapped_prediction_loss",
    "train",
]
