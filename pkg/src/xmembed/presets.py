"""Tuned embedder settings for the bundled graphs.

Each preset is an estimator carrying its XM weights; the matching base run is
the same estimator with ``gamma = delta = 0`` (see :func:`base_of`).
"""

from __future__ import annotations

from sklearn.base import clone

from .embedders import LINE, SDNE

METHODS = ("line", "sdne")

_SMALL = {
    "line": dict(dim=16, order="second", nonnegative=True, epochs=20, gamma=0.07, delta=0.07),
    "sdne": dict(dim=16, hidden=(256,), epochs=1000, learning_rate=0.001, alpha=0.1,
                 gamma=0.2, delta=0.2),
}

_LARGE = {
    "line": dict(dim=128, order="second", nonnegative=True, epochs=1, gamma=0.01, delta=0.01),
    "sdne": dict(dim=128, hidden=(256,), epochs=250, learning_rate=0.002, alpha=0.1,
                 xm_warmup=50, gamma=0.05, delta=0.2),
}

PRESETS = {"karate": _SMALL, "barbell": _SMALL, "email-like": _LARGE}


def make_estimator(method: str, **params):
    if method == "line":
        return LINE(**params)
    if method == "sdne":
        return SDNE(**params)
    raise ValueError(f"method must be one of {METHODS}, got {method!r}")


def preset(method: str, graph: str = "karate", **overrides):
    """XM-enabled estimator tuned for ``graph``; unknown graph names get the karate settings."""
    params = dict(PRESETS.get(graph, _SMALL)[method])
    params.update(overrides)
    return make_estimator(method, **params)


def base_of(estimator):
    """Copy of ``estimator`` with the XM terms switched off."""
    return clone(estimator).set_params(gamma=0.0, delta=0.0)
