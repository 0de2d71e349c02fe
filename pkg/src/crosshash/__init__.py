"""Cross-modal hash learning and Hamming-retrieval evaluation at desk scale.

Two small feed-forward networks (one per modality) are trained so that their
sign-quantized outputs preserve a binary cross-modal similarity; retrieval
quality is scored by Hamming ranking (MAP) and radius lookup (precision /
recall / F-measure).
"""

from .data import (
    DatasetFormatError,
    MultiModalDataset,
    SplitSpec,
    SplitResult,
    build_similarity,
    load_dataset,
    save_dataset,
    split,
    synth_dataset,
)
from .mathops import NumericError, make_rng, matmul, sigmoid, sign_matrix, softplus
from .net import (
    FeedForwardNet,
    ForwardTrace,
    Layer,
    LayerSpec,
    ParamGrads,
    backward,
    forward,
    init_net,
    load_net,
    save_net,
    sgd_step,
)
from .objective import (
    Hyperparams,
    LossTerms,
    grad_image_output,
    grad_image_outputs,
    grad_text_output,
    grad_text_outputs,
    loss_terms,
    loss_value,
    optimal_codes,
    pair_logits,
)
from .retrieval import (
    CodeDatabase,
    GroundTruth,
    PRPoint,
    average_precision,
    hamming_distance,
    hash_lookup,
    load_codes,
    mean_average_precision,
    pr_curve,
    queries_without_relevant,
    rank_database,
    save_codes,
)
from .training import (
    Checkpoint,
    IterationStats,
    TrainState,
    encode,
    encode_image,
    encode_text,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "CodeDatabase",
    "DatasetFormatError",
    "FeedForwardNet",
    "ForwardTrace",
    "GroundTruth",
    "Hyperparams",
    "IterationStats",
    "Layer",
    "LayerSpec",
    "LossTerms",
    "MultiModalDataset",
    "NumericError",
    "ParamGrads",
    "PRPoint",
    "SplitResult",
    "SplitSpec",
    "TrainState",
    "average_precision",
    "backward",
    "build_similarity",
    "encode",
    "encode_image",
    "encode_text",
    "forward",
    "grad_image_output",
    "grad_image_outputs",
    "grad_text_output",
    "grad_text_outputs",
    "hamming_distance",
    "hash_lookup",
    "init_net",
    "load_checkpoint",
    "load_codes",
    "load_dataset",
    "load_net",
    "loss_terms",
    "loss_value",
    "make_rng",
    "matmul",
    "mean_average_precision",
    "optimal_codes",
    "pair_logits",
    "pr_curve",
    "queries_without_relevant",
    "rank_database",
    "save_checkpoint",
    "save_codes",
    "save_dataset",
    "save_net",
    "sgd_step",
    "sigmoid",
    "sign_matrix",
    "softplus",
    "split",
    "synth_dataset",
    "train",
]
