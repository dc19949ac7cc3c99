"""Harvester community detection by normalized-association spectral clustering."""

from ._core import (
    ConfigError,
    ConvergenceError,
    DegeneratePartitionError,
    EmptyWindowError,
    Error,
    FormatError,
    InvalidInputError,
    IoError,
    ReportError,
    __version__,
    cluster,
    connected_components,
    default_k,
    eigengap_choose_k,
    knassoc,
    knn_graph,
    run_pipeline,
    similarity,
    spectral_partition,
    synth,
    validate,
)
from ._core import adjusted_rand_index as _adjusted_rand_index
from ._core import rand_index as _rand_index


def _encode(values):
    ids = {}
    return [ids.setdefault(v, len(ids)) for v in values]


def rand_index(labels, clusters):
    """Rand index of two labelings; entries may be any hashable values."""
    return _rand_index(_encode(labels), _encode(clusters))


def adjusted_rand_index(labels, clusters):
    """Adjusted Rand index of two labelings; entries may be any hashable values."""
    return _adjusted_rand_index(_encode(labels), _encode(clusters))


__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DegeneratePartitionError",
    "EmptyWindowError",
    "Error",
    "FormatError",
    "InvalidInputError",
    "IoError",
    "ReportError",
    "__version__",
    "adjusted_rand_index",
    "cluster",
    "connected_components",
    "default_k",
    "eigengap_choose_k",
    "knassoc",
    "knn_graph",
    "rand_index",
    "run_pipeline",
    "similarity",
    "spectral_partition",
    "synth",
    "validate",
]
