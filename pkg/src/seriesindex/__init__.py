"""Lock-free iSAX index with helping, for exact 1-NN search over data series."""

from .datasets import brute_force_nn, generate_queries, random_walks, read_series, write_series
from .engine import BuiltIndex, MetricsReport, RunConfig, build_index, run_queries, run_session
from .estimator import ISAXTransformer, SeriesIndex
from .faults import FaultPlan
from .query import answer_query
from .summaries import (BreakpointTable, ISAXWord, compute_isax, compute_paa,
                        euclidean_distance_sq, mindist_sq, root_buffer_index)

__version__ = "0.1.0"

__all__ = [
    "BreakpointTable",
    "BuiltIndex",
    "FaultPlan",
    "ISAXTransformer",
    "ISAXWord",
    "MetricsReport",
    "RunConfig",
    "SeriesIndex",
    "answer_query",
    "brute_force_nn",
    "build_index",
    "compute_isax",
    "compute_paa",
    "euclidean_distance_sq",
    "generate_queries",
    "mindist_sq",
    "random_walks",
    "read_series",
    "root_buffer_index",
    "run_queries",
    "run_session",
    "write_series",
]
