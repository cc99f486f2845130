"""Per-node sense features: structural centralities and anchor-based positional features."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from joblib import Parallel, delayed
from scipy.sparse import csgraph
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .graph import Graph, local_clustering, triangles_per_node
from .validation import check_graph

logger = logging.getLogger(__name__)

PPR_DAMPING = 0.85
PPR_TOL = 1e-8
PPR_MAX_ITER = 10_000

ALL_FEATURES = (
    "degree",
    "weighted_degree",
    "clustering",
    "ppr_mean",
    "ppr_std",
    "avg_neighbor_degree",
    "avg_neighbor_clustering",
    "egonet_edges",
    "burt_constraint",
    "betweenness",
    "eccentricity",
    "pagerank",
    "degree_centrality",
    "katz",
    "eigenvector",
)

DEFAULT_FEATURES = (
    "degree",
    "clustering",
    "ppr_std",
    "avg_neighbor_degree",
    "avg_neighbor_clustering",
    "eccentricity",
    "katz",
)


def check_feature_set(names: Sequence[str] | str | None) -> tuple[str, ...]:
    if names is None or names == "default":
        return DEFAULT_FEATURES
    if names == "all":
        return ALL_FEATURES
    if isinstance(names, str):
        names = [s.strip() for s in names.split(",") if s.strip()]
    names = tuple(names)
    if not names:
        raise ValueError("feature set must be non-empty")
    unknown = [s for s in names if s not in ALL_FEATURES]
    if unknown:
        raise ValueError(f"unknown feature(s) {unknown}; valid names: {', '.join(ALL_FEATURES)}")
    if len(set(names)) != len(names):
        raise ValueError("duplicate feature names")
    return names


@dataclass
class FeatureMatrix:
    """n x f matrix of sense features with column names and normalization metadata."""

    values: np.ndarray
    names: tuple[str, ...]
    normalized: bool = False
    mins: np.ndarray | None = None
    maxs: np.ndarray | None = None
    constant: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.names = tuple(self.names)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise ValueError("values must be n x f with one name per column")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    @property
    def shape(self):
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def to_csv(self, stream=None, labels: Sequence[str] | None = None) -> str | None:
        out = stream or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["node", *self.names])
        for i, row in enumerate(self.values):
            w.writerow([labels[i] if labels else i, *(repr(float(x)) for x in row)])
        return None if stream else out.getvalue()

    def to_dict(self) -> dict:
        d = {"names": list(self.names), "normalized": self.normalized,
             "values": self.values.tolist(), "flags": self.flags}
        if self.normalized:
            d["mins"] = self.mins.tolist()
            d["maxs"] = self.maxs.tolist()
            d["constant"] = self.constant.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_csv(cls, stream) -> "FeatureMatrix":
        rows = list(csv.reader(stream))
        names = tuple(rows[0][1:])
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        normalized = bool(values.size) and values.min() >= 0 and values.max() <= 1
        return cls(values, names, normalized=normalized)


# ---------------------------------------------------------------------------
# random-walk features


def _transition(g: Graph) -> sp.csr_matrix:
    a = g.adjacency
    s = g.weighted_degree
    inv = np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)
    return sp.diags(inv) @ a


def personalized_pagerank_matrix(g: Graph, sources: Sequence[int] | None = None,
                                 damping: float = PPR_DAMPING, tol: float = PPR_TOL,
                                 max_iter: int = PPR_MAX_ITER) -> np.ndarray:
    """Row ``k`` is the PPR vector of a walk restarting at ``sources[k]``.

    Power iteration ``p <- (1 - damping) e_s + damping p P`` until the
    max-abs change is below ``tol``. Rows for isolated sources keep all mass on
    the source.
    """
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    sources = np.arange(g.n) if sources is None else np.asarray(sources, dtype=np.int64)
    pt = _transition(g).T.tocsr()
    restart = np.zeros((g.n, sources.size))
    restart[sources, np.arange(sources.size)] = 1.0
    isolated = g.weighted_degree[sources] == 0
    p = restart.copy()
    for _ in range(max_iter):
        nxt = (1 - damping) * restart + damping * (pt @ p)
        # isolated sources: walk cannot move, all mass stays home
        nxt[:, isolated] = restart[:, isolated]
        delta = np.max(np.abs(nxt - p)) if p.size else 0.0
        p = nxt
        if delta < tol:
            break
    else:
        logger.warning("personalized PageRank did not converge in %d iterations", max_iter)
    return p.T


def personalized_pagerank(g: Graph, v: int, damping: float = PPR_DAMPING,
                          tol: float = PPR_TOL) -> np.ndarray:
    """PPR vector restarting at ``v``."""
    return personalized_pagerank_matrix(g, [v], damping, tol)[0]


def _ppr_rows(g: Graph, n_jobs: int = 1, chunk: int = 256) -> np.ndarray:
    if n_jobs == 1 or g.n <= chunk:
        return personalized_pagerank_matrix(g)
    blocks = [np.arange(i, min(i + chunk, g.n)) for i in range(0, g.n, chunk)]
    parts = Parallel(n_jobs=n_jobs)(delayed(personalized_pagerank_matrix)(g, b) for b in blocks)
    return np.vstack(parts)


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Global PageRank, uniform teleport; dangling mass is spread uniformly."""
    pt = _transition(g).T.tocsr()
    dangling = g.weighted_degree == 0
    p = np.full(g.n, 1.0 / g.n)
    for _ in range(max_iter):
        nxt = damping * (pt @ p + p[dangling].sum() / g.n) + (1 - damping) / g.n
        if np.max(np.abs(nxt - p)) < tol:
            return nxt
        p = nxt
    return p


def leading_eigenvalue(g: Graph, steps: int = 200) -> float:
    """Estimate lambda_max(A) by power iteration on A + I (the shift avoids bipartite oscillation)."""
    a = g.adjacency
    x = np.ones(g.n) / np.sqrt(g.n)
    lam = 0.0
    for _ in range(steps):
        y = a @ x + x
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
        lam = float(x @ (a @ x))
    return lam


def default_katz_alpha(g: Graph) -> float:
    lam = leading_eigenvalue(g)
    return 0.85 / lam if lam > 0 else 0.1


def katz_centrality(g: Graph, alpha: float | None = None, beta: float = 1.0,
                    tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Solve ``x = alpha A x + beta 1`` by fixed-point iteration; L2-normalized result."""
    if alpha is None:
        alpha = default_katz_alpha(g)
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    a = g.adjacency
    b = np.full(g.n, float(beta))
    x = b.copy()
    for it in range(max_iter):
        nxt = alpha * (a @ x) + b
        if not np.all(np.isfinite(nxt)) or np.max(nxt) > 1e12 * beta * g.n:
            raise ArithmeticError(
                f"Katz iteration diverged at step {it}; alpha={alpha:g} is too large "
                "(must be below 1/lambda_max), use a smaller alpha")
        if np.max(np.abs(nxt - x)) < tol * max(1.0, np.max(np.abs(nxt))):
            x = nxt
            break
        x = nxt
    else:
        raise ArithmeticError(f"Katz iteration did not converge; alpha={alpha:g} too close to 1/lambda_max")
    return x / np.linalg.norm(x)


def eigenvector_centrality(g: Graph, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    a = g.adjacency
    x = np.ones(g.n) / np.sqrt(g.n)
    for _ in range(max_iter):
        y = a @ x + x
        nrm = np.linalg.norm(y)
        y /= nrm
        if np.max(np.abs(y - x)) < tol:
            return y
        x = y
    return x


# ---------------------------------------------------------------------------
# path-based features


def hop_distances(g: Graph, sources: Sequence[int] | None = None) -> np.ndarray:
    """Unweighted BFS distances; ``inf`` where unreachable."""
    return csgraph.shortest_path(g.adjacency, directed=False, unweighted=True, indices=sources)


def eccentricity(g: Graph) -> np.ndarray:
    """Max hop distance to any node in the same connected component."""
    d = hop_distances(g)
    d[~np.isfinite(d)] = -1
    return d.max(axis=1).astype(np.float64)


def _brandes_sources(nbrs: list[np.ndarray], n: int, sources) -> np.ndarray:
    cb = np.zeros(n)
    nb = [list(x) for x in nbrs]
    for s in sources:
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = [0] * n
        sigma[s] = 1
        dist = [-1] * n
        dist[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            stack.append(v)
            dv = dist[v] + 1
            for w in nb[v]:
                if dist[w] < 0:
                    dist[w] = dv
                    q.append(w)
                if dist[w] == dv:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
            if w != s:
                cb[w] += delta[w]
    return cb


def betweenness(g: Graph, n_jobs: int = 1) -> np.ndarray:
    """Unnormalized shortest-path (hop) betweenness; each unordered pair counted once."""
    nbrs = g.neighbor_lists
    if n_jobs == 1:
        total = _brandes_sources(nbrs, g.n, range(g.n))
    else:
        chunks = np.array_split(np.arange(g.n), max(1, n_jobs))
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_brandes_sources)(nbrs, g.n, c.tolist()) for c in chunks)
        total = np.sum(parts, axis=0)
    return total / 2.0


# ---------------------------------------------------------------------------
# local features


def avg_neighbor_degree(g: Graph) -> np.ndarray:
    a = g.binary_adjacency
    k = g.degree
    return np.divide(a @ k, k, out=np.zeros(g.n), where=k > 0)


def avg_neighbor_clustering(g: Graph) -> np.ndarray:
    a = g.binary_adjacency
    k = g.degree
    return np.divide(a @ local_clustering(g), k, out=np.zeros(g.n), where=k > 0)


def ego_net_edges(g: Graph) -> np.ndarray:
    """Edges inside the ego network {v} + N(v): spokes plus triangles through v."""
    return g.degree + triangles_per_node(g)


def burt_constraint(g: Graph) -> np.ndarray:
    """Burt's constraint: sum over neighbors j of (p_ij + sum_q p_iq p_qj)^2; 0 for isolated nodes."""
    p = _transition(g)
    mask = g.binary_adjacency
    direct_and_indirect = (p + p @ p).multiply(mask)
    return np.asarray(direct_and_indirect.multiply(direct_and_indirect).sum(axis=1)).ravel()


def degree_centrality(g: Graph) -> np.ndarray:
    return g.degree / (g.n - 1) if g.n > 1 else np.zeros(g.n)


# ---------------------------------------------------------------------------
# assembled feature matrices


def _ppr_columns(g: Graph, n_jobs: int) -> tuple[np.ndarray, np.ndarray]:
    ppr = _ppr_rows(g, n_jobs)
    return ppr.mean(axis=1), ppr.std(axis=1)


_SIMPLE: dict[str, Callable[[Graph], np.ndarray]] = {
    "degree": lambda g: g.degree.copy(),
    "weighted_degree": lambda g: g.weighted_degree.copy(),
    "clustering": local_clustering,
    "avg_neighbor_degree": avg_neighbor_degree,
    "avg_neighbor_clustering": avg_neighbor_clustering,
    "egonet_edges": ego_net_edges,
    "burt_constraint": burt_constraint,
    "eccentricity": eccentricity,
    "pagerank": pagerank,
    "degree_centrality": degree_centrality,
    "katz": lambda g: katz_centrality(g),
    "eigenvector": eigenvector_centrality,
}


def structural_features(g: Graph, features: Sequence[str] | str | None = None,
                        n_jobs: int = 1) -> FeatureMatrix:
    """Unnormalized structural sense features, one column per requested name."""
    names = check_feature_set(features)
    cols = {}
    flags: dict = {}
    if "ppr_mean" in names or "ppr_std" in names:
        cols["ppr_mean"], cols["ppr_std"] = _ppr_columns(g, n_jobs)
        if "ppr_mean" in names:
            flags["ppr_mean_constant"] = True
    if "betweenness" in names:
        cols["betweenness"] = betweenness(g, n_jobs)
    for name in names:
        if name not in cols:
            cols[name] = _SIMPLE[name](g)
    if np.any(g.degree == 0):
        flags["isolated_nodes"] = int(np.sum(g.degree == 0))
    return FeatureMatrix(np.column_stack([cols[k] for k in names]), names, flags=flags)


def positional_features(g: Graph, anchors: Sequence[int]) -> FeatureMatrix:
    """Per anchor: hop distance to the anchor and the anchor's mass in each node's PPR vector."""
    anchors = [int(a) for a in anchors]
    if not anchors:
        raise ValueError("at least one anchor is required")
    if any(a < 0 or a >= g.n for a in anchors):
        raise ValueError("anchor id out of range")
    hops = hop_distances(g, anchors).T  # n x anchors
    flags = {}
    if not np.all(np.isfinite(hops)):
        ecc = eccentricity(g)
        hops[~np.isfinite(hops)] = ecc.max() + 1
        flags["unreachable_anchor"] = True
    ppr = _ppr_rows(g)[:, anchors]
    cols, names = [], []
    for k, a in enumerate(anchors):
        cols += [hops[:, k], ppr[:, k]]
        names += [f"hops_to_{g.labels[a]}", f"ppr_of_{g.labels[a]}"]
    return FeatureMatrix(np.column_stack(cols), names, flags=flags)


def normalize_features(fm: FeatureMatrix, mins=None, maxs=None) -> FeatureMatrix:
    """Column-wise min-max scaling to [0, 1]; constant columns become 0.5 and are flagged.

    ``mins``/``maxs`` override the column ranges (used to apply a fitted scaling).
    """
    x = fm.values
    lo = x.min(axis=0) if mins is None else np.asarray(mins, dtype=float)
    hi = x.max(axis=0) if maxs is None else np.asarray(maxs, dtype=float)
    span = hi - lo
    constant = span <= 0
    out = np.where(constant, 0.5, (x - lo) / np.where(constant, 1.0, span))
    flags = dict(fm.flags)
    if np.any(constant):
        flags["constant_columns"] = [fm.names[i] for i in np.flatnonzero(constant)]
    return FeatureMatrix(out, fm.names, normalized=True, mins=lo, maxs=hi,
                         constant=constant, flags=flags)


def feature_correlations(fm: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Absolute Pearson correlations; a constant column correlates 0 with every other column."""
    x = fm.values if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=float)
    if x.shape[0] < 3:
        raise ValueError("need at least 3 rows")
    xc = x - x.mean(axis=0)
    sd = np.sqrt((xc ** 2).sum(axis=0))
    ok = sd > 1e-12 * np.maximum(1.0, np.abs(x).max(axis=0))
    z = np.zeros_like(xc)
    z[:, ok] = xc[:, ok] / sd[ok]
    c = np.clip(np.abs(z.T @ z), 0.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return c


class SenseFeatures(BaseEstimator, TransformerMixin):
    """Normalized sense features as a transformer over graphs.

    ``fit`` computes the features of a graph and learns the per-column min/max;
    ``transform`` computes features of a (possibly different) graph and scales
    them with the fitted ranges.

    Parameters
    ----------
    features : sequence of str, "default" or "all"
        Structural feature names (see ``ALL_FEATURES``).
    anchors : sequence of int, optional
        If given, positional anchor features are appended.
    n_jobs : int
        Worker count for the per-node computations; output does not depend on it.
    """

    def __init__(self, features="default", anchors=None, n_jobs=1):
        self.features = features
        self.anchors = anchors
        self.n_jobs = n_jobs

    def _raw(self, g: Graph) -> FeatureMatrix:
        g = check_graph(g)
        fm = structural_features(g, self.features, n_jobs=self.n_jobs)
        if self.anchors:
            pos = positional_features(g, self.anchors)
            fm = FeatureMatrix(np.hstack([fm.values, pos.values]), fm.names + pos.names,
                               flags={**fm.flags, **pos.flags})
        return fm

    def fit(self, g, y=None):
        fm = normalize_features(self._raw(g))
        self.feature_names_ = fm.names
        self.mins_ = fm.mins
        self.maxs_ = fm.maxs
        self.feature_matrix_ = fm
        return self

    def transform(self, g) -> np.ndarray:
        return self.transform_matrix(g).values

    def transform_matrix(self, g) -> FeatureMatrix:
        check_is_fitted(self, "mins_")
        return normalize_features(self._raw(g), self.mins_, self.maxs_)

    def fit_transform(self, g, y=None, **fit_params) -> np.ndarray:
        return self.fit(g).feature_matrix_.values

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_")
        return np.asarray(self.feature_names_, dtype=object)


def sense_features(g: Graph, features="default", normalize: bool = True, n_jobs: int = 1) -> FeatureMatrix:
    fm = structural_features(g, features, n_jobs=n_jobs)
    return normalize_features(fm) if normalize else fm
