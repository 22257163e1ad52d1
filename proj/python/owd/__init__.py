"""Open-world source discovery over feature vectors.

The heavy lifting lives in the compiled ``_owd`` module: WTA ordinal
hashing, per-cluster OOD detection, K-means overclustering with 1-NN graph
merging and SVM refinement, plus the iterative pipeline combining them.
"""

from ._owd import (
    OwdError,
    WtaHasher,
    average_purity,
    hamming_distance,
    kmeans,
    nmi,
    run_pipeline,
    set_workers,
    simulate,
    train_svm_decision,
)

__all__ = [
    "OwdError",
    "WtaHasher",
    "average_purity",
    "hamming_distance",
    "kmeans",
    "nmi",
    "run_pipeline",
    "set_workers",
    "simulate",
    "train_svm_decision",
]
