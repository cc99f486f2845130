"""Sparsity and orthogonality penalties on raw Explain matrices, with analytic gradients.

For the raw matrix ``E = u v^T`` with ``u = y/|y|`` and ``v = f/|f|`` both
penalties have closed forms that depend on ``y`` only through ``|y|_1 / |y|_2``:

    sparsity      = |y|_1 |f|_1 / (|y|_2 |f|_2)
    orthogonality = (|y|_1^2 - |y|_2^2) / |y|_2^2      (off-diagonal row pairs)

Both are scale invariant in ``y``, so the gradient is orthogonal to ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .explain import ExplainMatrix, explain_matrix


@dataclass(frozen=True)
class XmConfig:
    gamma: float = 0.0
    delta: float = 0.0
    include_diagonal: bool = False

    def __post_init__(self):
        for name in ("gamma", "delta"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")

    @property
    def enabled(self) -> bool:
        return self.gamma > 0 or self.delta > 0


def _mat(E) -> np.ndarray:
    return E.raw if isinstance(E, ExplainMatrix) else np.asarray(E, dtype=np.float64)


def sparsity_loss(E) -> float:
    """Sum of column L1 norms, i.e. the sum of absolute entries."""
    return float(np.abs(_mat(E)).sum())


def orthogonality_loss(E, include_diagonal: bool = False) -> float:
    """Sum over ordered row pairs of ``|<row_i, row_j>|``; diagonal pairs only if requested."""
    m = _mat(E)
    inner = np.abs(m @ m.T)
    total = inner.sum()
    if not include_diagonal:
        total -= np.trace(inner)
    return float(total)


def _check_y(y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    l2 = np.linalg.norm(y, axis=-1)
    if np.any(l2 == 0):
        raise ValueError("zero embedding vector (embedding collapse)")
    return y, np.abs(y).sum(axis=-1), l2


def feature_ratio(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    l2 = np.linalg.norm(f, axis=-1)
    if np.any(l2 == 0):
        raise ValueError("zero feature vector")
    return np.abs(f).sum(axis=-1) / l2


def xm_loss(y, f, cfg: XmConfig) -> float | np.ndarray:
    """``gamma * sparsity + delta * orthogonality`` via the closed forms.

    Works on single vectors or row-stacked batches (returns one value per row).
    """
    y, l1, l2 = _check_y(y)
    r = l1 / l2
    sparse = r * feature_ratio(f)
    ortho = r * r - (0.0 if cfg.include_diagonal else 1.0)
    out = cfg.gamma * sparse + cfg.delta * ortho
    return float(out) if np.ndim(out) == 0 else out


def xm_loss_direct(y, f, cfg: XmConfig) -> float:
    """Same quantity evaluated entry by entry on the explicit Explain matrix."""
    E = explain_matrix(y, f)
    return cfg.gamma * sparsity_loss(E) + cfg.delta * orthogonality_loss(E, cfg.include_diagonal)


def xm_gradient(y, f, cfg: XmConfig) -> np.ndarray:
    """Gradient of :func:`xm_loss` with respect to ``y`` (``sign(0) = 0`` subgradient).

    Accepts a single ``y``/``f`` pair or row-stacked batches.
    """
    return xm_gradient_from_ratio(y, feature_ratio(f), cfg)


def xm_gradient_from_ratio(y, ratio, cfg: XmConfig) -> np.ndarray:
    """:func:`xm_gradient` with the feature term ``|f|_1 / |f|_2`` precomputed."""
    y, l1, l2 = _check_y(y)
    l1 = np.asarray(l1)[..., None]
    inv = 1.0 / np.asarray(l2)[..., None]
    r = l1 * inv
    # d/dy of r = |y|_1/|y|_2 is (sign(y) - r * y/|y|_2) / |y|_2; both terms are multiples of it
    coef = 0.0
    if cfg.gamma:
        coef = coef + cfg.gamma * np.asarray(ratio, dtype=np.float64)[..., None]
    if cfg.delta:
        coef = coef + 2.0 * cfg.delta * r
    return coef * inv * (np.sign(y) - r * y * inv)
