"""Pattern-tree weighting coder and atypicality scanner for real-valued series."""

from .atypicality import (
    AtypicalSegment,
    DeltaTrace,
    ScanConfig,
    atypical_codelength,
    log_star,
    scan,
    typical_codelength,
    typical_prefix,
)
from .pattern_tree import NodeState, PatternTree, path_nodes, route, train
from .predictor import GaussianStats, predict_op, predict_ss, stats_update

__all__ = [
    "AtypicalSegment",
    "DeltaTrace",
    "GaussianStats",
    "NodeState",
    "PatternTree",
    "ScanConfig",
    "atypical_codelength",
    "log_star",
    "path_nodes",
    "predict_op",
    "predict_ss",
    "route",
    "scan",
    "stats_update",
    "train",
    "typical_codelength",
    "typical_prefix",
]

__version__ = "0.1.0"
