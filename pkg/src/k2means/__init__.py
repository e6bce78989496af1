"""k2-means clustering with greedy divisive initialization, plus the usual
baselines, all instrumented with vector-operation counts."""

from .core import (
    ClusterState,
    Dataset,
    FormatError,
    OpCounter,
    Trace,
    TraceSample,
    UnsplittableError,
    ValidationError,
    cluster_energy,
    energy,
    squared_distance,
)
from .engines import EngineConfig, run_elkan, run_k2means, run_lloyd, run_minibatch
from .init import init_gdi, init_kmeanspp, init_random, projective_split

__version__ = "0.1.0"
