"""LINE-style edge-sampling skip-gram embedder with optional XM penalties."""

from __future__ import annotations

import time

import numpy as np
from scipy.special import expit, log_expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..validation import check_graph, check_nonneg, check_positive_int
from ..xm import XmConfig, feature_ratio, xm_gradient_from_ratio
from .alias import AliasTable
from .base import EmbeddingMatrix, check_embedding_health, resolve_features


def sampling_tables(g, noise_exponent=0.75):
    """Directed arc endpoints, an arc sampler weighted by edge weight and the noise sampler."""
    arc_src = np.concatenate([g.src, g.dst])
    arc_dst = np.concatenate([g.dst, g.src])
    arcs = AliasTable(np.concatenate([g.weight, g.weight]))
    noise = AliasTable(np.maximum(g.weighted_degree, 0) ** noise_exponent)
    return arc_src, arc_dst, arcs, noise


class LINE(BaseEstimator, TransformerMixin):
    """Edge-sampling skip-gram with negative sampling (first or second order proximity).

    Each step draws a minibatch of directed arcs proportionally to edge weight,
    plus ``negatives`` noise nodes per arc from ``degree ** noise_exponent``,
    and takes one SGD step on the log-sigmoid objective. With ``gamma`` or
    ``delta`` positive, each sampled source vertex also takes a step down the
    XM gradient of its Explain matrix.

    Parameters
    ----------
    dim : int
        Embedding dimension.
    order : {"first", "second"}
        Second order keeps separate context vectors.
    epochs : int
    samples_per_epoch : int, optional
        Arc samples per epoch; defaults to ``100 * edge_count``.
    negatives : int
    learning_rate : float
        Initial step size; decays linearly to ``learning_rate * lr_floor``.
    lr_floor : float
    noise_exponent : float
    batch_size : int
        Arcs per vectorized SGD step.
    gamma, delta : float
        Sparsity and orthogonality weights.
    include_diagonal : bool
    nonnegative : bool
        Clip vertex vectors at zero after every step (context vectors stay signed).
    xm_max_step : float or None
        Cap on the length of one XM step relative to ``|y|``. The penalties are
        scale invariant, so their raw gradient grows like ``1/|y|`` and short
        vectors would otherwise overshoot. ``None`` disables the cap.
    features : str or sequence
        Sense features used when ``F`` is not passed to ``fit``.
    random_state : int
    """

    def __init__(self, dim=16, order="first", epochs=5, samples_per_epoch=None, negatives=5,
                 learning_rate=0.025, lr_floor=0.1, noise_exponent=0.75, batch_size=64,
                 nonnegative=False, gamma=0.0, delta=0.0, include_diagonal=False,
                 xm_max_step=0.1, features="default", random_state=0):
        self.dim = dim
        self.order = order
        self.epochs = epochs
        self.samples_per_epoch = samples_per_epoch
        self.negatives = negatives
        self.learning_rate = learning_rate
        self.lr_floor = lr_floor
        self.noise_exponent = noise_exponent
        self.batch_size = batch_size
        self.nonnegative = nonnegative
        self.gamma = gamma
        self.delta = delta
        self.include_diagonal = include_diagonal
        self.xm_max_step = xm_max_step
        self.features = features
        self.random_state = random_state

    def _validate(self):
        check_positive_int(self.dim, "dim")
        check_positive_int(self.epochs, "epochs")
        check_positive_int(self.negatives, "negatives")
        check_positive_int(self.batch_size, "batch_size")
        if self.samples_per_epoch is not None:
            check_positive_int(self.samples_per_epoch, "samples_per_epoch")
        if self.order not in ("first", "second"):
            raise ValueError("order must be 'first' or 'second'")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.lr_floor <= 1:
            raise ValueError("lr_floor must lie in (0, 1]")
        check_nonneg(self.noise_exponent, "noise_exponent")
        return XmConfig(self.gamma, self.delta, self.include_diagonal)

    def fit(self, g, F=None):
        """Train on graph ``g``; ``F`` is the normalized sense-feature matrix for the XM terms."""
        g = check_graph(g)
        xm = self._validate()
        if g.edge_count == 0:
            raise ValueError("graph has no edges")
        feats = resolve_features(g, F, xm, self.features)
        fratio = feature_ratio(feats) if xm.enabled else None
        rng = np.random.default_rng(self.random_state)
        n, d, K, B = g.n, self.dim, self.negatives, self.batch_size

        arc_src, arc_dst, arcs, noise = sampling_tables(g, self.noise_exponent)

        lo = 0.0 if self.nonnegative else -0.5 / d
        U = rng.uniform(lo, 0.5 / d, size=(n, d))
        C = rng.uniform(-0.5 / d, 0.5 / d, size=(n, d)) if self.order == "second" else U

        per_epoch = self.samples_per_epoch or 100 * g.edge_count
        steps = -(-per_epoch // B)
        total = steps * self.epochs
        rho0 = self.learning_rate
        seconds, losses = [], []
        t = 0
        for _ in range(self.epochs):
            start = time.perf_counter()
            acc = 0.0
            for _ in range(steps):
                rho = rho0 * max(1.0 - t / total, self.lr_floor)
                t += 1
                k = arcs.sample(rng, B)
                s, o = arc_src[k], arc_dst[k]
                neg = noise.sample(rng, (B, K))
                u, v, vn = U[s], C[o], C[neg]
                pos = np.einsum("bd,bd->b", u, v)
                negs = np.einsum("bd,bkd->bk", u, vn)
                acc -= log_expit(pos).sum() + log_expit(-negs).sum()
                g_pos = 1.0 - expit(pos)
                g_neg = -expit(negs)
                grad_u = g_pos[:, None] * v + np.einsum("bk,bkd->bd", g_neg, vn)
                np.add.at(C, o, rho * g_pos[:, None] * u)
                np.add.at(C, neg.ravel(), rho * (g_neg[:, :, None] * u[:, None, :]).reshape(-1, d))
                np.add.at(U, s, rho * grad_u)
                if xm.enabled:
                    us = U[s]
                    step = rho * xm_gradient_from_ratio(us, fratio[s], xm)
                    if self.xm_max_step is not None:
                        over = np.sqrt(np.einsum("bd,bd->b", step, step) /
                                       np.einsum("bd,bd->b", us, us)) / self.xm_max_step
                        step /= np.maximum(over, 1.0)[:, None]
                    np.add.at(U, s, -step)
                if self.nonnegative:
                    np.maximum(U, 0.0, out=U)
            seconds.append(time.perf_counter() - start)
            losses.append(acc / (steps * B))
            if not np.isfinite(acc):
                check_embedding_health(U, "line")
        check_embedding_health(U, "line")

        self.embedding_ = U
        self.context_ = C if self.order == "second" else None
        self.epoch_seconds_ = seconds
        self.losses_ = losses
        self.n_nodes_ = n
        return self

    def transform(self, g=None) -> np.ndarray:
        """Return the trained node embeddings (transductive; ``g`` is ignored)."""
        check_is_fitted(self, "embedding_")
        return self.embedding_

    def fit_transform(self, g, F=None, **fit_params) -> np.ndarray:
        return self.fit(g, F).embedding_

    def result(self) -> EmbeddingMatrix:
        check_is_fitted(self, "embedding_")
        return EmbeddingMatrix(
            self.embedding_.copy(), method=f"line{1 if self.order == 'first' else 2}",
            xm_enabled=self.gamma > 0 or self.delta > 0, seed=self.random_state,
            epochs=self.epochs, epoch_seconds=list(self.epoch_seconds_),
            losses=list(self.losses_), config={"method": "line", **self.get_params()})
