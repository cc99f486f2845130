"""Explainable node embeddings.

Sense features, per-node Explain matrices and their nuclear norms, the XM
sparsity/orthogonality penalties, LINE and SDNE embedders that can carry them,
and a link-prediction/ablation harness.
"""

from .embedders import LINE, SDNE, EmbeddingCollapse, EmbeddingMatrix, TrainingDiverged
from .evaluation import (
    EvalReport, LinkClassifier, ablation, auc, compare_link_prediction, make_split,
    norm_distribution, run_link_prediction, welch_t,
)
from .explain import (
    ExplainMatrix, Explainer, bregman_divergence, explain_matrix, explain_stack,
    normalize_explain, nuclear_norm, pinsker_gap, von_neumann_entropy,
)
from .features import FeatureMatrix, SenseFeatures, sense_features
from .graph import Graph, GraphParseError, builtin, graph_stats, load_edge_list
from .presets import base_of, preset
from .xm import XmConfig, xm_gradient, xm_loss

__version__ = "0.1.0"

__all__ = [
    "LINE", "SDNE", "EmbeddingCollapse", "EmbeddingMatrix", "TrainingDiverged",
    "EvalReport", "LinkClassifier", "ablation", "auc", "compare_link_prediction", "make_split",
    "norm_distribution", "run_link_prediction", "welch_t",
    "ExplainMatrix", "Explainer", "bregman_divergence", "explain_matrix", "explain_stack",
    "normalize_explain", "nuclear_norm", "pinsker_gap", "von_neumann_entropy",
    "FeatureMatrix", "SenseFeatures", "sense_features",
    "Graph", "GraphParseError", "builtin", "graph_stats", "load_edge_list",
    "base_of", "preset", "XmConfig", "xm_gradient", "xm_loss",
]
