"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .graph import Graph


def check_graph(g) -> Graph:
    if not isinstance(g, Graph):
        raise TypeError(f"expected a Graph, got {type(g).__name__}")
    return g


def check_embedding(y, n: int | None = None) -> np.ndarray:
    """2-D finite float array, optionally with ``n`` rows."""
    y = check_array(y, dtype=np.float64, ensure_all_finite=True)
    if n is not None and y.shape[0] != n:
        raise ValueError(f"expected {n} rows, got {y.shape[0]}")
    return y


def check_features_for(g: Graph, features) -> np.ndarray:
    """Accept a FeatureMatrix or array aligned with ``g``'s nodes."""
    values = getattr(features, "values", features)
    values = check_array(values, dtype=np.float64, ensure_all_finite=True)
    if values.shape[0] != g.n:
        raise ValueError(f"feature matrix has {values.shape[0]} rows, graph has {g.n} nodes")
    return values


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_nonneg(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and non-negative, got {value!r}")
    return float(value)
