"""Link-prediction benchmark, nuclear-norm reporting, ablation and significance tests."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import betainc, expit
from scipy.stats import rankdata
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from .explain import RANGE_FLOOR, explain_stack, normalize_stack, nuclear_norm
from .features import sense_features
from .graph import Graph
from .validation import check_embedding

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# splits


@dataclass
class LinkSplit:
    train_graph: Graph
    train_pos: np.ndarray
    train_neg: np.ndarray
    test_pos: np.ndarray
    test_neg: np.ndarray
    seed: int
    train_fraction: float
    resampled: int = 0
    repaired: bool = False


def _sample_non_edges(g: Graph, count: int, rng: np.random.Generator) -> np.ndarray:
    total = g.n * (g.n - 1) // 2 - g.edge_count
    if count > total:
        raise ValueError(f"graph too dense: need {count} non-edges, only {total} exist")
    if g.n * (g.n - 1) // 2 <= 5_000_000:
        iu, ju = np.triu_indices(g.n, k=1)
        is_edge = np.asarray(g.binary_adjacency[iu, ju]).ravel() > 0
        cand = np.flatnonzero(~is_edge)
        pick = rng.choice(cand.size, size=count, replace=False)
        return np.column_stack([iu[cand[pick]], ju[cand[pick]]])
    chosen: dict[tuple[int, int], None] = {}
    while len(chosen) < count:
        u, v = rng.integers(0, g.n, size=2)
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key not in chosen and not g.has_edge(*key):
            chosen[key] = None
    return np.array(list(chosen), dtype=np.int64)


def make_split(g: Graph, train_fraction: float = 0.6, seed: int = 0,
               max_resample: int = 100) -> LinkSplit:
    """Random edge partition plus an equal number of sampled non-edges per side.

    Splits leaving a node isolated in the training graph are redrawn; after
    ``max_resample`` failures a test edge of each isolated node is swapped into
    training (the split is then flagged ``repaired``).
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    m = g.edge_count
    n_train = int(round(train_fraction * m))
    if n_train < 1 or n_train >= m:
        raise ValueError("split leaves an empty partition")
    neg = _sample_non_edges(g, m, rng)
    needs_cover = g.degree > 0
    for attempt in range(max_resample + 1):
        perm = rng.permutation(m)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
        covered = np.zeros(g.n, dtype=bool)
        covered[g.src[train_idx]] = True
        covered[g.dst[train_idx]] = True
        if np.all(covered[needs_cover]):
            break
    repaired = False
    if not np.all(covered[needs_cover]):
        train_idx, test_idx = _repair(g, train_idx, test_idx, rng)
        repaired = True
    train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)
    edges = g.edges()
    train_graph = g.subgraph_edges(train_idx)
    return LinkSplit(train_graph, edges[train_idx], neg[:n_train], edges[test_idx],
                     neg[n_train:], seed, train_fraction, resampled=attempt, repaired=repaired)


def _repair(g: Graph, train_idx, test_idx, rng):
    train, test = list(train_idx), list(test_idx)
    for _ in range(g.n):
        deg = np.zeros(g.n, dtype=int)
        np.add.at(deg, g.src[train], 1)
        np.add.at(deg, g.dst[train], 1)
        lonely = np.flatnonzero((deg == 0) & (g.degree > 0))
        if lonely.size == 0:
            break
        v = lonely[0]
        k = next(i for i, e in enumerate(test) if v in (g.src[e], g.dst[e]))
        donors = [i for i, e in enumerate(train) if deg[g.src[e]] > 1 and deg[g.dst[e]] > 1]
        if not donors:
            raise ValueError("cannot build a split without isolated training nodes")
        j = donors[int(rng.integers(len(donors)))]
        train[j], test[k] = test[k], train[j]
    return np.array(train), np.array(test)


# ---------------------------------------------------------------------------
# edge features and classifier


COMBINERS = ("concat", "hadamard", "average")


def edge_features(Y, u, v, combiner: str = "concat") -> np.ndarray:
    """Feature vector for the pair ``(u, v)``; symmetric in ``u`` and ``v``."""
    return edge_feature_matrix(Y, np.array([[u, v]]), combiner)[0]


def edge_feature_matrix(Y, pairs, combiner: str = "concat") -> np.ndarray:
    Y = np.asarray(getattr(Y, "values", Y), dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lo, hi = pairs.min(axis=1), pairs.max(axis=1)
    if combiner == "concat":
        return np.hstack([Y[lo], Y[hi]])
    if combiner == "hadamard":
        return Y[lo] * Y[hi]
    if combiner == "average":
        return 0.5 * (Y[lo] + Y[hi])
    raise ValueError(f"combiner must be one of {COMBINERS}")


class LinkClassifier(ClassifierMixin, BaseEstimator):
    """Two-layer perceptron (ReLU hidden layer, logistic output) trained full-batch with Adam.

    Inputs are standardized with the training mean and standard deviation.
    """

    def __init__(self, hidden=64, epochs=300, learning_rate=0.01, random_state=0):
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        if self.classes_.size != 2:
            raise ValueError("need examples of exactly two classes")
        t = (y == self.classes_[1]).astype(np.float64)
        if min(t.sum(), (1 - t).sum()) < 2:
            raise ValueError("need at least two examples of each class")
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        self.scale_[self.scale_ == 0] = 1.0
        Z = (X - self.mean_) / self.scale_
        rng = np.random.default_rng(self.random_state)
        d = Z.shape[1]
        params = [rng.normal(0, np.sqrt(2.0 / d), (d, self.hidden)), np.zeros(self.hidden),
                  rng.normal(0, np.sqrt(1.0 / self.hidden), self.hidden), np.zeros(())]
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        b1, b2, eps = 0.9, 0.999, 1e-8
        n = Z.shape[0]
        for step in range(1, self.epochs + 1):
            W1, c1, w2, c2 = params
            pre = Z @ W1 + c1
            h = np.maximum(pre, 0.0)
            logit = h @ w2 + c2
            dlogit = (expit(logit) - t) / n
            dh = np.outer(dlogit, w2) * (pre > 0)
            grads = [Z.T @ dh, dh.sum(axis=0), h.T @ dlogit, dlogit.sum()]
            for k, gk in enumerate(grads):
                m[k] = b1 * m[k] + (1 - b1) * gk
                v[k] = b2 * v[k] + (1 - b2) * gk * gk
                params[k] = params[k] - self.learning_rate * (m[k] / (1 - b1 ** step)) / (
                    np.sqrt(v[k] / (1 - b2 ** step)) + eps)
        self.coefs_ = params
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coefs_")
        X = check_array(X, dtype=np.float64)
        W1, c1, w2, c2 = self.coefs_
        return np.maximum(((X - self.mean_) / self.scale_) @ W1 + c1, 0.0) @ w2 + c2

    def predict_proba(self, X) -> np.ndarray:
        p = expit(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X) -> np.ndarray:
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


def train_link_classifier(features, labels, hidden: int = 64, epochs: int = 300,
                          lr: float = 0.01, seed: int = 0) -> LinkClassifier:
    return LinkClassifier(hidden, epochs, lr, seed).fit(features, labels)


# ---------------------------------------------------------------------------
# metrics


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic (midranks for ties)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative examples")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def standard_error(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0


def welch_t(a, b) -> float:
    """Two-sided p-value of Welch's unequal-variance t-test."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    if va + vb == 0:
        return 1.0 if diff == 0 else 0.0
    t = diff / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    return float(min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t))))


# ---------------------------------------------------------------------------
# nuclear-norm reporting


@dataclass
class NormDistribution:
    norms: np.ndarray
    mean: float
    se: float
    degenerate: bool


def norm_distribution(Y, F, mode: str = "population",
                      range_floor: float = RANGE_FLOOR) -> NormDistribution:
    """Nuclear norm of every node's normalized Explain matrix."""
    Y = check_embedding(getattr(Y, "values", Y))
    F = check_embedding(getattr(F, "values", F), len(Y))
    norm, degenerate = normalize_stack(explain_stack(Y, F), mode, range_floor=range_floor)
    norms = nuclear_norm(norm)
    return NormDistribution(norms, float(norms.mean()), standard_error(norms),
                            bool(np.all(degenerate)))


# ---------------------------------------------------------------------------
# experiments


@dataclass
class EvalReport:
    dataset: str
    method: str
    xm: dict
    aucs: list[float]
    auc_mean: float
    auc_se: float
    norm_means: list[float]
    norm_mean: float
    norm_se: float
    epoch_seconds: list[float] = field(default_factory=list)
    p_value: float | None = None
    config: dict = field(default_factory=dict)

    @property
    def seconds_per_epoch(self) -> float:
        return float(np.mean(self.epoch_seconds)) if self.epoch_seconds else float("nan")

    def to_dict(self, timings: bool = False) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("epoch_seconds")
        else:
            d["seconds_per_epoch"] = self.seconds_per_epoch
        d["test"] = "welch"
        return d

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=2, default=_jsonable)

    CSV_FIELDS = ("dataset", "method", "gamma", "delta", "auc_mean", "auc_se", "norm_mean",
                  "norm_se", "p_value", "seconds_per_epoch")

    def csv_row(self) -> dict:
        return {"dataset": self.dataset, "method": self.method,
                "gamma": self.xm.get("gamma", 0.0), "delta": self.xm.get("delta", 0.0),
                "auc_mean": self.auc_mean, "auc_se": self.auc_se, "norm_mean": self.norm_mean,
                "norm_se": self.norm_se, "p_value": self.p_value,
                "seconds_per_epoch": self.seconds_per_epoch}


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=EvalReport.CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return out.getvalue()


def fold_seeds(seed: int, folds: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(folds)]


def _method_name(est) -> str:
    name = type(est).__name__.lower()
    return name + "+xm" if getattr(est, "gamma", 0) or getattr(est, "delta", 0) else name


def _fold(g: Graph, s: int, train_fraction: float, features):
    split = make_split(g, train_fraction, s)
    test_keys = {(int(u), int(v)) for u, v in split.test_pos}
    assert not any((int(u), int(v)) in test_keys for u, v in split.train_graph.edges()), \
        "test edge leaked into the training graph"
    return split, sense_features(split.train_graph, features)


def _score_fold(split: LinkSplit, F, estimator, s: int, combiner: str,
                classifier: LinkClassifier, norm_mode: str):
    est = clone(estimator).set_params(random_state=s)
    Y = est.fit(split.train_graph, F).embedding_
    Xtr = edge_feature_matrix(Y, np.vstack([split.train_pos, split.train_neg]), combiner)
    ytr = np.r_[np.ones(len(split.train_pos)), np.zeros(len(split.train_neg))]
    Xte = edge_feature_matrix(Y, np.vstack([split.test_pos, split.test_neg]), combiner)
    yte = np.r_[np.ones(len(split.test_pos)), np.zeros(len(split.test_neg))]
    clf = clone(classifier).set_params(random_state=s).fit(Xtr, ytr)
    return (auc(clf.decision_function(Xte), yte), norm_distribution(Y, F.values, norm_mode).mean,
            list(est.epoch_seconds_))


def _report(g, estimator, dataset, rows) -> EvalReport:
    aucs = [r[0] for r in rows]
    norms = [r[1] for r in rows]
    return EvalReport(
        dataset=dataset or g.meta.get("name", "graph"), method=_method_name(estimator),
        xm={"gamma": float(getattr(estimator, "gamma", 0.0)),
            "delta": float(getattr(estimator, "delta", 0.0))},
        aucs=aucs, auc_mean=float(np.mean(aucs)), auc_se=standard_error(aucs),
        norm_means=norms, norm_mean=float(np.mean(norms)), norm_se=standard_error(norms),
        epoch_seconds=[x for r in rows for x in r[2]], config=estimator.get_params())


def run_link_prediction(g: Graph, estimator, folds: int = 3, seed: int = 0,
                        train_fraction: float = 0.6, combiner: str = "concat",
                        classifier: LinkClassifier | None = None, features="default",
                        norm_mode: str = "population", dataset: str | None = None) -> EvalReport:
    """Repeated random-split link prediction.

    Each fold draws a fresh split, computes sense features on the training
    graph, embeds it with a clone of ``estimator``, trains the classifier on
    training pairs and scores the held-out pairs.
    """
    return compare_link_prediction(g, [estimator], folds, seed, train_fraction, combiner,
                                   classifier, features, norm_mode, dataset)[0]


def compare_link_prediction(g: Graph, estimators: Sequence, folds: int = 3, seed: int = 0,
                            train_fraction: float = 0.6, combiner: str = "concat",
                            classifier: LinkClassifier | None = None, features="default",
                            norm_mode: str = "population",
                            dataset: str | None = None) -> list[EvalReport]:
    """:func:`run_link_prediction` for several estimators on shared splits.

    Every report after the first gets the Welch p-value of its per-fold mean
    nuclear norms against the first (the baseline).
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    classifier = classifier or LinkClassifier()
    rows = [[] for _ in estimators]
    for k, s in enumerate(fold_seeds(seed, folds)):
        try:
            split, F = _fold(g, s, train_fraction, features)
            for j, est in enumerate(estimators):
                rows[j].append(_score_fold(split, F, est, s, combiner, classifier, norm_mode))
        except Exception:
            logger.error("link prediction failed in fold %d (split seed %d)", k, s)
            raise
    reports = [_report(g, est, dataset, r) for est, r in zip(estimators, rows)]
    for r in reports[1:]:
        r.p_value = welch_t(r.norm_means, reports[0].norm_means)
    return reports


ABLATION_CONFIGS = ("none", "sparsity", "orthogonality", "both")


@dataclass
class AblationResult:
    dataset: str
    method: str
    d: int
    seeds: list[int]
    per_seed: dict[str, list[float]]
    epoch_seconds: dict[str, list[float]]

    def mean(self, cfg: str) -> float:
        return float(np.mean(self.per_seed[cfg]))

    def se(self, cfg: str) -> float:
        return standard_error(self.per_seed[cfg])

    def p_value(self, a: str = "both", b: str = "none") -> float:
        return welch_t(self.per_seed[a], self.per_seed[b])

    def table(self) -> list[dict]:
        return [{"config": c, "mean": self.mean(c), "se": self.se(c),
                 "p_vs_none": None if c == "none" else self.p_value(c, "none")}
                for c in ABLATION_CONFIGS]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.DictWriter(out, fieldnames=["config", "mean", "se", "p_vs_none"], lineterminator="\n")
        w.writeheader()
        for row in self.table():
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                        for k, v in row.items()})
        return out.getvalue()

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "method": self.method, "d": self.d, "seeds": self.seeds,
                "per_seed": self.per_seed, "table": self.table()}


def ablation_params(estimator, cfg: str) -> dict:
    """gamma/delta for one ablation cell, taken from the estimator's XM weights."""
    gamma, delta = float(estimator.gamma), float(estimator.delta)
    return {"none": dict(gamma=0.0, delta=0.0),
            "sparsity": dict(gamma=gamma, delta=0.0),
            "orthogonality": dict(gamma=0.0, delta=delta),
            "both": dict(gamma=gamma, delta=delta)}[cfg]


def ablation(g: Graph, estimator, seeds: Sequence[int], d: int | None = None,
             features="default", norm_mode: str = "population",
             dataset: str | None = None) -> AblationResult:
    """Mean population-normalized nuclear norm per seed for the four constraint settings.

    ``estimator`` carries the XM weights used by the constrained cells.
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 3:
        raise ValueError("ablation needs at least 3 seeds")
    base = clone(estimator)
    if d is not None:
        base.set_params(dim=d)
    F = sense_features(g, features)
    per_seed = {c: [] for c in ABLATION_CONFIGS}
    seconds = {c: [] for c in ABLATION_CONFIGS}
    for cfg in ABLATION_CONFIGS:
        for s in seeds:
            est = clone(base).set_params(random_state=s, **ablation_params(estimator, cfg))
            Y = est.fit(g, F).embedding_
            per_seed[cfg].append(norm_distribution(Y, F.values, norm_mode).mean)
            seconds[cfg].extend(est.epoch_seconds_)
    return AblationResult(dataset or g.meta.get("name", "graph"), type(estimator).__name__.lower(),
                          int(base.dim), seeds, per_seed, seconds)
