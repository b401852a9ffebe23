"""Benchmark harness for Mapper graph filter functions.

Generates a synthetic many-spheres dataset, fits a catalog of filter
functions (PCA, SVD, eccentricity, kernel density, t-SNE, topological
autoencoder), builds Mapper graphs over a grid of cover parameters and
scores each filter by how well graph vertices isolate single manifolds.
"""

__version__ = "0.1.0"

from mapperbench.errors import (
    ConvergenceError,
    GenerationError,
    InvalidArgumentError,
    MetricUndefinedError,
    OutOfSampleError,
    ParseError,
    StratificationError,
    SummaryUnavailableError,
    TrainingDivergedError,
)

__all__ = [
    "ConvergenceError",
    "GenerationError",
    "InvalidArgumentError",
    "MetricUndefinedError",
    "OutOfSampleError",
    "ParseError",
    "StratificationError",
    "SummaryUnavailableError",
    "TrainingDivergedError",
    "__version__",
]
