"""Video theme clustering via minimum-cost multicut on embedding similarity graphs."""

from .combine import CombineParams, VideoEmbedding
from .embstore import EmbeddingStore, FrameRecord, StoreError, VideoEntry, read_store, validate_store, write_store
from .frameselect import SelectionParams, SelectionPlan
from .multicut import Clustering, SolveResult
from .simgraph import CostGraph

__version__ = "0.1.0"

__all__ = [
    "CombineParams", "VideoEmbedding",
    "EmbeddingStore", "FrameRecord", "StoreError", "VideoEntry",
    "read_store", "validate_store", "write_store",
    "SelectionParams", "SelectionPlan",
    "Clustering", "SolveResult",
    "CostGraph",
    "__version__",
]
