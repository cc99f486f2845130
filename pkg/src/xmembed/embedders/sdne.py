"""SDNE-style deep autoencoder over adjacency rows, trained by hand-written backpropagation.

Objective over a node batch S (the full node set by default)::

    alpha * sum_{(i,j) in E[S]} w_ij |y_i - y_j|^2          first-order proximity
  + beta  * sum_{i in S} |(xhat_i - x_i) * b_i|^2           weighted reconstruction
  + nu    * sum_layers |W|_F^2                              weight decay
  + gamma * sum_{i in S} sparsity(E_i) + delta * sum_{i in S} orthogonality(E_i)

with ``b_ij = beta_pen`` on observed edges and 1 elsewhere. All activations are
sigmoids, so codes lie in (0, 1).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..graph import Graph
from ..validation import check_graph, check_nonneg, check_positive_int
from ..xm import XmConfig, xm_gradient, xm_loss
from .base import EmbeddingMatrix, TrainingDiverged, check_embedding_health, resolve_features


@dataclass(frozen=True)
class SdneWeights:
    alpha: float = 1.0
    beta: float = 1.0
    nu: float = 1e-4
    beta_pen: float = 5.0


def layer_sizes(n: int, hidden, dim: int) -> list[int]:
    enc = [n, *hidden, dim]
    return enc + enc[-2::-1]


def init_params(sizes: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    """Flat list ``[W0, b0, W1, b1, ...]``; weights uniform in +-1/sqrt(fan_in)."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = 1.0 / np.sqrt(fan_in)
        params.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params: list[np.ndarray], X) -> list[np.ndarray]:
    """Activations of every layer, input included; ``X`` may be sparse."""
    acts = [X]
    h = X
    for k in range(0, len(params), 2):
        h = expit(h @ params[k] + params[k + 1])
        acts.append(h)
    return acts


def encode(params: list[np.ndarray], X) -> np.ndarray:
    h = X
    n_enc = len(params) // 4
    for k in range(n_enc):
        h = expit(h @ params[2 * k] + params[2 * k + 1])
    return h


def objective(params, X, Xd, lap, weights: SdneWeights, xm: XmConfig, F=None,
              need_grad: bool = True, bmat=None):
    """Loss terms and gradients for one batch.

    ``X`` is the input batch (rows of the adjacency, possibly sparse), ``Xd`` its
    dense copy and ``lap`` the weighted Laplacian of the batch-induced subgraph.
    Returns ``(total, parts, grads, code_grad_xm)`` where ``code_grad_xm`` is the
    XM contribution to the gradient with respect to the codes. ``bmat`` is the
    reconstruction penalty matrix for ``Xd``, rebuilt when not given.
    """
    acts = forward(params, X)
    depth = len(params) // 2
    code_layer = depth // 2
    Y = acts[code_layer]
    Xhat = acts[-1]

    if bmat is None:
        bmat = np.where(Xd != 0, weights.beta_pen, 1.0)
    diff = Xhat - Xd
    diff *= bmat
    parts = {
        "first": weights.alpha * float(np.sum(Y * (lap @ Y))),
        "recon": weights.beta * float(np.einsum("ij,ij->", diff, diff)),
        "reg": weights.nu * float(sum(np.sum(params[k] ** 2) for k in range(0, len(params), 2))),
        "xm": 0.0,
    }
    if xm.enabled:
        parts["xm"] = float(np.sum(xm_loss(Y, F, xm)))
    total = sum(parts.values())
    if not need_grad:
        return total, parts, None, None

    grads: list[np.ndarray] = [None] * len(params)
    # dL/d(output activation), then through the sigmoid
    delta = diff
    delta *= bmat
    delta *= Xhat
    delta *= 1.0 - Xhat
    delta *= 2.0 * weights.beta
    code_grad_xm = None
    for layer in range(depth - 1, -1, -1):
        a_in = acts[layer]
        W = params[2 * layer]
        gW = a_in.T @ delta
        grads[2 * layer] = np.asarray(gW) + 2.0 * weights.nu * W
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer == 0:
            break
        g_act = delta @ W.T
        if layer == code_layer:
            g_act = g_act + 2.0 * weights.alpha * (lap @ Y)
            if xm.enabled:
                code_grad_xm = xm_gradient(Y, F, xm)
                g_act = g_act + code_grad_xm
        delta = g_act * a_in * (1.0 - a_in)
    return total, parts, grads, code_grad_xm


def laplacian(a: sp.spmatrix) -> sp.csr_matrix:
    deg = np.asarray(a.sum(axis=1)).ravel()
    return (sp.diags(deg) - a).tocsr()


class SDNE(BaseEstimator, TransformerMixin):
    """Deep autoencoder embedder with first-order, reconstruction and XM terms.

    Parameters
    ----------
    dim : int
        Code (embedding) size.
    hidden : tuple of int
        Encoder hidden sizes; the decoder mirrors them.
    epochs : int
    learning_rate : float
    optimizer : {"adam", "sgd"}
    batch_size : int, optional
        Nodes per step; ``None`` trains full batch.
    alpha, beta, nu, beta_pen : float
        First-order, reconstruction, weight-decay and observed-entry penalty weights.
    gamma, delta : float
        Sparsity and orthogonality weights.
    include_diagonal : bool
    xm_warmup : int
        Epochs over which ``gamma`` and ``delta`` ramp linearly up to their full
        value. Strong XM terms from the first step can saturate every code unit
        to the same 0/1 pattern before the reconstruction has shaped the codes.
    features : str or sequence
        Sense features used when ``F`` is not passed to ``fit``.
    random_state : int
    """

    def __init__(self, dim=16, hidden=(256,), epochs=200, learning_rate=0.01, optimizer="adam",
                 batch_size=None, alpha=1.0, beta=1.0, nu=1e-4, beta_pen=5.0,
                 gamma=0.0, delta=0.0, include_diagonal=False, xm_warmup=0, features="default",
                 random_state=0):
        self.dim = dim
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.batch_size = batch_size
        self.alpha = alpha
        self.beta = beta
        self.nu = nu
        self.beta_pen = beta_pen
        self.gamma = gamma
        self.delta = delta
        self.include_diagonal = include_diagonal
        self.xm_warmup = xm_warmup
        self.features = features
        self.random_state = random_state

    def _validate(self):
        check_positive_int(self.dim, "dim")
        check_positive_int(self.epochs, "epochs")
        for h in self.hidden:
            check_positive_int(h, "hidden size")
        if self.batch_size is not None:
            check_positive_int(self.batch_size, "batch_size", minimum=2)
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        for name in ("alpha", "beta", "nu"):
            check_nonneg(getattr(self, name), name)
        check_positive_int(self.xm_warmup, "xm_warmup", minimum=0)
        if not self.beta_pen > 1:
            raise ValueError("beta_pen must be > 1")
        return (SdneWeights(self.alpha, self.beta, self.nu, self.beta_pen),
                XmConfig(self.gamma, self.delta, self.include_diagonal))

    def fit(self, g, F=None):
        """Train on graph ``g``; ``F`` is the normalized sense-feature matrix for the XM terms."""
        g = check_graph(g)
        weights, xm = self._validate()
        feats = resolve_features(g, F, xm, self.features)
        rng = np.random.default_rng(self.random_state)
        params = init_params(layer_sizes(g.n, tuple(self.hidden), self.dim), rng)
        a = g.adjacency
        dense = a.toarray()
        full_lap = laplacian(a)
        full_bmat = np.where(dense != 0, weights.beta_pen, 1.0)
        batches = self.batch_size is not None and self.batch_size < g.n

        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        b1, b2, eps, lr = 0.9, 0.999, 1e-8, self.learning_rate
        step = 0
        seconds, losses = [], []
        for epoch in range(self.epochs):
            start = time.perf_counter()
            order = rng.permutation(g.n) if batches else None
            chunks = ([order[i:i + self.batch_size] for i in range(0, g.n, self.batch_size)]
                      if batches else [None])
            epoch_loss = 0.0
            xm_now = xm
            if xm.enabled and epoch < self.xm_warmup:
                ramp = (epoch + 1) / self.xm_warmup
                xm_now = XmConfig(xm.gamma * ramp, xm.delta * ramp, xm.include_diagonal)
            for idx in chunks:
                if idx is None:
                    X, Xd, lap, Fb, bmat = a, dense, full_lap, feats, full_bmat
                else:
                    X, Xd, bmat = a[idx], dense[idx], full_bmat[idx]
                    lap = laplacian(a[idx][:, idx])
                    Fb = None if feats is None else feats[idx]
                total, _, grads, _ = objective(params, X, Xd, lap, weights, xm_now, Fb, bmat=bmat)
                if not np.isfinite(total):
                    raise TrainingDiverged(f"sdne: loss became non-finite at epoch {epoch}")
                epoch_loss += total
                step += 1
                for k, gk in enumerate(grads):
                    if self.optimizer == "sgd":
                        params[k] -= lr * gk
                        continue
                    m[k] = b1 * m[k] + (1 - b1) * gk
                    v[k] = b2 * v[k] + (1 - b2) * gk * gk
                    mhat = m[k] / (1 - b1 ** step)
                    vhat = v[k] / (1 - b2 ** step)
                    params[k] -= lr * mhat / (np.sqrt(vhat) + eps)
            seconds.append(time.perf_counter() - start)
            losses.append(epoch_loss)

        Y = encode(params, a)
        check_embedding_health(Y, "sdne")
        self.params_ = params
        self.embedding_ = Y
        self.epoch_seconds_ = seconds
        self.losses_ = losses
        self.n_nodes_ = g.n
        return self

    def transform(self, g=None) -> np.ndarray:
        """Codes of the training graph, or of the adjacency rows of ``g`` if given (same node count)."""
        check_is_fitted(self, "embedding_")
        if g is None:
            return self.embedding_
        g = check_graph(g)
        if g.n != self.n_nodes_:
            raise ValueError(f"model was trained on {self.n_nodes_} nodes, got {g.n}")
        return encode(self.params_, g.adjacency)

    def fit_transform(self, g, F=None, **fit_params) -> np.ndarray:
        return self.fit(g, F).embedding_

    def reconstruction_losses(self) -> list[float]:
        check_is_fitted(self, "losses_")
        return list(self.losses_)

    def result(self) -> EmbeddingMatrix:
        check_is_fitted(self, "embedding_")
        cfg = {"method": "sdne", **self.get_params()}
        cfg["hidden"] = list(cfg["hidden"])
        return EmbeddingMatrix(
            self.embedding_.copy(), method="sdne", xm_enabled=self.gamma > 0 or self.delta > 0,
            seed=self.random_state, epochs=self.epochs, epoch_seconds=list(self.epoch_seconds_),
            losses=list(self.losses_), config=cfg)


def sdne_objective_for_graph(g: Graph, params, weights: SdneWeights, xm: XmConfig, F=None):
    """Full-batch objective for ``g`` (used by gradient checks)."""
    a = g.adjacency
    return objective(params, a, a.toarray(), laplacian(a), weights, xm, F)
