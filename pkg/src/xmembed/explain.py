"""Explain matrices, nuclear norms and matrix-entropy diagnostics.

The Explain matrix of a node relates its embedding ``y`` (d) to its sense
feature vector ``f`` (f) through the scaled outer product
``y f^T / (|y| |f|)``. Rows are embedding dimensions, columns are features.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_embedding

JACOBI_TOL = 1e-12
RANGE_FLOOR = 1e-2
_EPS = np.finfo(np.float64).eps


@dataclass
class ExplainMatrix:
    raw: np.ndarray
    node_id: int | None = None
    normalized: np.ndarray | None = None
    mode: str | None = None
    flags: dict = field(default_factory=dict)

    def view(self, which: str = "raw") -> np.ndarray:
        if which == "raw":
            return self.raw
        if which == "normalized":
            if self.normalized is None:
                raise ValueError("normalized view not computed; call normalize_explain first")
            return self.normalized
        raise ValueError(f"unknown view {which!r}")

    def to_csv(self, feature_names: Sequence[str], which: str = "normalized") -> str:
        m = self.view(which if self.normalized is not None else "raw")
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["dimension", *feature_names])
        for i, row in enumerate(m):
            w.writerow([i, *(repr(float(x)) for x in row)])
        return out.getvalue()

    def to_dict(self, feature_names: Sequence[str] | None = None) -> dict:
        d = {"node": self.node_id, "raw": self.raw.tolist(), "mode": self.mode}
        if self.normalized is not None:
            d["normalized"] = self.normalized.tolist()
            d["nuclear_norm"] = nuclear_norm(self.normalized)
        if feature_names is not None:
            d["features"] = list(feature_names)
        return d

    def to_json(self, feature_names=None) -> str:
        return json.dumps(self.to_dict(feature_names), sort_keys=True)


def explain_matrix(y, f, node_id: int | None = None) -> ExplainMatrix:
    """Raw Explain matrix ``y f^T / (|y|_2 |f|_2)``."""
    y = np.asarray(y, dtype=np.float64).ravel()
    f = np.asarray(f, dtype=np.float64).ravel()
    ny, nf = np.linalg.norm(y), np.linalg.norm(f)
    if ny == 0:
        raise ValueError("embedding vector y is zero")
    if nf == 0:
        raise ValueError("feature vector f is zero")
    return ExplainMatrix(np.outer(y / ny, f / nf), node_id=node_id)


def explain_stack(Y, F) -> np.ndarray:
    """Raw Explain matrices for every node, shape (n, d, f)."""
    Y = np.asarray(Y, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    ny = np.linalg.norm(Y, axis=1)
    nf = np.linalg.norm(F, axis=1)
    if np.any(ny == 0):
        raise ValueError(f"zero embedding vector for node(s) {np.flatnonzero(ny == 0)[:10].tolist()}")
    if np.any(nf == 0):
        raise ValueError(f"zero feature vector for node(s) {np.flatnonzero(nf == 0)[:10].tolist()}")
    return (Y / ny[:, None])[:, :, None] * (F / nf[:, None])[:, None, :]


def population_range(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return raw.min(axis=0), raw.max(axis=0)


def normalize_stack(raw: np.ndarray, mode: str = "population", lo=None, hi=None,
                    range_floor: float = RANGE_FLOOR, scale: float | None = None):
    """Min-max normalize a stack of raw Explain matrices.

    ``population``: each cell scaled by its min/max across nodes (or the given
    ``lo``/``hi``). Spans are floored at ``range_floor`` times the largest
    absolute raw entry (or ``scale``), so cells that barely vary (a dimension almost no node
    uses) are not stretched to the full unit range; their values stay near 0.
    ``per-matrix``: each matrix scaled by its own min/max.

    With ``range_floor == 0`` cells or matrices of zero range are filled with
    0.5. Returns the stack and a boolean mask of degenerate cells (population)
    or matrices (per-matrix); a cell is degenerate when its span is below the
    floor.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if range_floor < 0:
        raise ValueError("range_floor must be non-negative")
    if mode == "population":
        if lo is None or hi is None:
            lo, hi = population_range(raw)
        span = hi - lo
        if scale is None:
            scale = float(np.abs(raw).max()) if raw.size else 0.0
        floor = range_floor * scale
        degenerate = span <= floor
        if floor > 0:
            out = np.clip((raw - lo) / np.maximum(span, floor), 0.0, 1.0)
        else:
            out = np.where(degenerate, 0.5, (raw - lo) / np.where(degenerate, 1.0, span))
        return out, degenerate
    if mode == "per-matrix":
        lo = raw.min(axis=(1, 2), keepdims=True)
        hi = raw.max(axis=(1, 2), keepdims=True)
        span = hi - lo
        degenerate = span <= 0
        out = np.where(degenerate, 0.5, (raw - lo) / np.where(degenerate, 1.0, span))
        return out, degenerate.ravel()
    raise ValueError(f"mode must be 'population' or 'per-matrix', got {mode!r}")


def normalize_explain(batch: Sequence[ExplainMatrix], mode: str = "population",
                      range_floor: float = RANGE_FLOOR) -> list[ExplainMatrix]:
    """Attach normalized views to a batch of Explain matrices (new objects are returned)."""
    if not batch:
        raise ValueError("empty batch")
    raw = np.stack([e.raw for e in batch])
    norm, degenerate = normalize_stack(raw, mode, range_floor=range_floor)
    flags = {}
    if np.any(degenerate):
        flags["degenerate"] = True
    return [ExplainMatrix(e.raw, e.node_id, norm[k], mode, dict(flags)) for k, e in enumerate(batch)]


# ---------------------------------------------------------------------------
# symmetric eigensolver and nuclear norm


def jacobi_eigvalsh(S, tol: float = JACOBI_TOL, max_sweeps: int = 100, vectors: bool = False):
    """Cyclic Jacobi eigenvalues of a symmetric matrix or a stack of them.

    Rotations are applied to every matrix of the stack at once. Iterates until
    every off-diagonal entry is below ``tol`` times the matrix scale.
    Returns ascending eigenvalues (and eigenvectors as columns if ``vectors``).
    """
    A = np.array(S, dtype=np.float64)
    single = A.ndim == 2
    if single:
        A = A[None]
    b, m, m2 = A.shape
    if m != m2:
        raise ValueError("matrices must be square")
    A = 0.5 * (A + A.transpose(0, 2, 1))
    V = np.broadcast_to(np.eye(m), A.shape).copy() if vectors else None
    scale = np.maximum(np.abs(A).max(axis=(1, 2)), np.finfo(float).tiny)
    pairs = [(p, q) for p in range(m - 1) for q in range(p + 1, m)]
    for _ in range(max_sweeps):
        off = np.abs(A - A * np.eye(m)).max(axis=(1, 2)) if m > 1 else np.zeros(b)
        if np.all(off <= tol * scale):
            break
        for p, q in pairs:
            apq = A[:, p, q]
            active = np.abs(apq) > tol * scale * 1e-3
            if not np.any(active):
                continue
            app, aqq = A[:, p, p], A[:, q, q]
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            c_, s_ = c[:, None], s[:, None]
            rp, rq = A[:, p, :].copy(), A[:, q, :].copy()
            A[:, p, :] = c_ * rp - s_ * rq
            A[:, q, :] = s_ * rp + c_ * rq
            cp, cq = A[:, :, p].copy(), A[:, :, q].copy()
            A[:, :, p] = c_ * cp - s_ * cq
            A[:, :, q] = s_ * cp + c_ * cq
            if vectors:
                vp, vq = V[:, :, p].copy(), V[:, :, q].copy()
                V[:, :, p] = c_ * vp - s_ * vq
                V[:, :, q] = s_ * vp + c_ * vq
    w = np.diagonal(A, axis1=1, axis2=2).copy()
    order = np.argsort(w, axis=1)
    w = np.take_along_axis(w, order, axis=1)
    if vectors:
        V = np.take_along_axis(V, order[:, None, :], axis=2)
        return (w[0], V[0]) if single else (w, V)
    return w[0] if single else w


def singular_values(M) -> np.ndarray:
    """Singular values from the eigenvalues of the smaller Gram matrix.

    Eigenvalues below the Gram's rounding floor (``m * eps * lambda_max``) are
    indistinguishable from zero and are returned as exactly 0.
    """
    M = np.asarray(M, dtype=np.float64)
    stack = M if M.ndim == 3 else M[None]
    if stack.shape[1] < stack.shape[2]:
        stack = stack.transpose(0, 2, 1)
    G = stack.transpose(0, 2, 1) @ stack
    lam = jacobi_eigvalsh(G)
    m = G.shape[-1]
    floor = 4 * m * _EPS * np.maximum(lam.max(axis=1, keepdims=True), 0.0)
    lam = np.where(lam > floor, lam, 0.0)
    sv = np.sqrt(lam)[:, ::-1]
    sv[sv < JACOBI_TOL] = 0.0
    return sv if M.ndim == 3 else sv[0]


def nuclear_norm(M) -> float | np.ndarray:
    """Sum of singular values; accepts one matrix or a stack (returns one value per matrix)."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    sv = singular_values(M)
    return sv.sum(axis=-1) if M.ndim == 3 else float(sv.sum())


# ---------------------------------------------------------------------------
# entropy diagnostics


def _check_symmetric(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-9:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (A + A.T)


def _xlogx(x):
    x = np.clip(x, 0.0, None)
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def von_neumann_entropy(A) -> float:
    """``-tr(A log A)`` with eigenvalues clamped at 0 and ``0 log 0 = 0``."""
    lam = np.linalg.eigvalsh(_check_symmetric(A))
    return float(-np.sum(_xlogx(lam)))


def bregman_divergence(A, B, support_tol: float = 1e-12) -> float:
    """Matrix relative entropy ``tr[A(log A - log B)] - tr A + tr B``.

    Returns ``inf`` when A has weight outside the support of B. Values in
    ``(-1e-12, 0)`` are eigensolver rounding and are reported as 0.
    """
    A = _check_symmetric(A, "A")
    B = _check_symmetric(B, "B")
    la = np.linalg.eigvalsh(A)
    mu, W = np.linalg.eigh(B)
    scale = max(np.abs(mu).max(initial=0.0), np.abs(la).max(initial=0.0), 1e-300)
    weights = np.einsum("ij,jk,ki->i", W.T, A, W)  # w_j^T A w_j
    null = mu <= support_tol * scale
    if np.any(weights[null] > 1e-9 * scale):
        return float("inf")
    tr_a_log_b = float(np.sum(weights[~null] * np.log(mu[~null])))
    d = float(np.sum(_xlogx(la))) - tr_a_log_b - np.trace(A) + np.trace(B)
    return max(d, 0.0) if d > -1e-12 else d


def trace_normalize(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    t = np.trace(A)
    if t <= 0:
        raise ValueError("matrix has non-positive trace")
    return A / t


def pinsker_gap(A, B) -> float:
    """``D(A||B) - 0.5 * ||A - B||_*^2`` for trace-one PSD matrices (non-negative by Pinsker)."""
    A = _check_symmetric(A, "A")
    B = _check_symmetric(B, "B")
    for name, M in (("A", A), ("B", B)):
        if abs(np.trace(M) - 1.0) > 1e-9:
            raise ValueError(f"{name} must have unit trace; apply trace_normalize first")
    trace_dist = float(np.sum(np.abs(np.linalg.eigvalsh(A - B))))
    return bregman_divergence(A, B) - 0.5 * trace_dist ** 2


def gram(E, view: str = "raw") -> np.ndarray:
    """``E E^T`` (d x d), symmetrized."""
    m = E.view(view) if isinstance(E, ExplainMatrix) else np.asarray(E, dtype=np.float64)
    G = m @ m.T
    return 0.5 * (G + G.T)


@dataclass
class GramDiag:
    A: np.ndarray
    B: np.ndarray
    entropy_a: float
    entropy_b: float
    divergence: float
    pinsker_gap: float


def gram_diagnostics(E_ref, E_other, view: str = "raw") -> GramDiag:
    """Entropy and Pinsker diagnostics between two Explain matrices' trace-normalized Grams."""
    A = trace_normalize(gram(E_ref, view))
    B = trace_normalize(gram(E_other, view))
    return GramDiag(A, B, von_neumann_entropy(A), von_neumann_entropy(B),
                    bregman_divergence(A, B), pinsker_gap(A, B))


# ---------------------------------------------------------------------------
# estimator


class Explainer(BaseEstimator, TransformerMixin):
    """Normalized Explain matrices for a population of nodes.

    ``fit(Y, F)`` learns the per-cell min/max across nodes (population mode);
    ``transform(Y, F)`` returns the normalized ``(n, d, f)`` stack.

    Parameters
    ----------
    mode : {"population", "per-matrix"}
    range_floor : float
        Relative span floor for population mode (see :func:`normalize_stack`).
    """

    def __init__(self, mode="population", range_floor=RANGE_FLOOR):
        self.mode = mode
        self.range_floor = range_floor

    def fit(self, Y, F):
        Y, F = check_embedding(Y), check_embedding(F, len(Y))
        raw = explain_stack(Y, F)
        self.n_dims_, self.n_features_in_ = raw.shape[1:]
        self.cell_min_, self.cell_max_ = population_range(raw)
        self.scale_ = float(np.abs(raw).max())
        return self

    def transform(self, Y, F) -> np.ndarray:
        check_is_fitted(self, "cell_min_")
        raw = explain_stack(check_embedding(Y), check_embedding(F, len(Y)))
        out, self.degenerate_ = normalize_stack(raw, self.mode, self.cell_min_, self.cell_max_,
                                                self.range_floor, self.scale_)
        return out

    def fit_transform(self, Y, F, **fit_params) -> np.ndarray:
        return self.fit(Y, F).transform(Y, F)

    def nuclear_norms(self, Y, F) -> np.ndarray:
        return nuclear_norm(self.transform(Y, F))
