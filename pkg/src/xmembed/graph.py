"""Undirected graph container, edge-list I/O, bundled generators and summary statistics."""

from __future__ import annotations

import hashlib
import io
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphParseError(ValueError):
    """Raised for malformed edge-list input."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with dense integer node ids.

    Edges are stored once each, canonically as ``src < dst`` and sorted.
    ``labels[i]`` keeps the original token for node ``i``.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    labels: tuple[str, ...] = ()
    self_loops_dropped: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph must have at least one node")
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        w = np.asarray(self.weight, dtype=np.float64)
        if not (src.shape == dst.shape == w.shape):
            raise ValueError("src, dst and weight must have equal length")
        if src.size:
            if np.any(src >= dst):
                raise ValueError("edges must be canonical (src < dst, no self-loops)")
            if src.min() < 0 or dst.max() >= self.n:
                raise ValueError("node id out of range")
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValueError("edge weights must be positive and finite")
            order = np.lexsort((dst, src))
            src, dst, w = src[order], dst[order], w[order]
            dup = (np.diff(src) == 0) & (np.diff(dst) == 0)
            if np.any(dup):
                raise ValueError("duplicate edges")
        for name, arr in (("src", src), ("dst", dst), ("weight", w)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.n)))
        elif len(self.labels) != self.n:
            raise ValueError("labels must have one entry per node")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable, **kwargs) -> "Graph":
        """Build from ``(u, v)`` or ``(u, v, w)`` tuples; duplicates and orientation are normalized."""
        seen: dict[tuple[int, int], float] = {}
        loops = 0
        for e in edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if u == v:
                loops += 1
                continue
            key = (u, v) if u < v else (v, u)
            seen.setdefault(key, w)
        keys = sorted(seen)
        src = np.array([k[0] for k in keys], dtype=np.int64)
        dst = np.array([k[1] for k in keys], dtype=np.int64)
        w = np.array([seen[k] for k in keys], dtype=np.float64)
        kwargs.setdefault("self_loops_dropped", loops)
        return cls(n, src, dst, w, **kwargs)

    @property
    def edge_count(self) -> int:
        return int(self.src.size)

    @property
    def weighted(self) -> bool:
        return bool(np.any(self.weight != 1.0))

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency in CSR form (sorted neighbor lists)."""
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        vals = np.concatenate([self.weight, self.weight])
        a = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        a.sort_indices()
        return a

    @cached_property
    def binary_adjacency(self) -> sp.csr_matrix:
        a = self.adjacency.copy()
        a.data[:] = 1.0
        return a

    def dense_adjacency(self, binary: bool = False) -> np.ndarray:
        return (self.binary_adjacency if binary else self.adjacency).toarray()

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.float64)

    @cached_property
    def weighted_degree(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def neighbors(self, v: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[v]:a.indptr[v + 1]]

    @cached_property
    def neighbor_lists(self) -> list[np.ndarray]:
        return [self.neighbors(v) for v in range(self.n)]

    def edges(self) -> np.ndarray:
        """Edge array of shape (m, 2), canonical orientation."""
        return np.column_stack([self.src, self.dst])

    def has_edge(self, u: int, v: int) -> bool:
        a = self.adjacency
        row = a.indices[a.indptr[u]:a.indptr[u + 1]]
        i = np.searchsorted(row, v)
        return bool(i < row.size and row[i] == v)

    def subgraph_edges(self, keep: np.ndarray) -> "Graph":
        """Same node set, only the edges selected by boolean/index mask ``keep``."""
        return Graph(self.n, self.src[keep], self.dst[keep], self.weight[keep],
                     labels=self.labels)

    def components(self) -> np.ndarray:
        """Connected-component label per node."""
        _, labels = sp.csgraph.connected_components(self.adjacency, directed=False)
        return labels

    def content_hash(self) -> str:
        buf = io.StringIO()
        dump_edge_list(self, buf, weighted=True)
        return hashlib.sha256(buf.getvalue().encode()).hexdigest()

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.edge_count})"


def load_edge_list(source: TextIO | str, weighted: bool = False) -> Graph:
    """Parse a whitespace-separated edge list.

    Lines are ``u v`` or ``u v w``; ``#`` starts a comment. Labels are arbitrary
    tokens: if they are all integers they are ordered numerically, otherwise by
    first appearance. Reversed and duplicate edges keep the first occurrence;
    self-loops are dropped and counted.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    raw: list[tuple[str, str, float]] = []
    for lineno, line in enumerate(source, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphParseError(f"expected 'u v' or 'u v w', got {line!r}", lineno)
        w = 1.0
        if len(parts) == 3 and weighted:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphParseError(f"bad weight {parts[2]!r}", lineno) from None
            if not (w > 0 and math.isfinite(w)):
                raise GraphParseError(f"weight must be positive, got {parts[2]!r}", lineno)
        raw.append((parts[0], parts[1], w))
    if not raw:
        raise GraphParseError("empty graph: no edges found")

    order: dict[str, None] = {}
    for u, v, _ in raw:
        order.setdefault(u)
        order.setdefault(v)
    tokens = list(order)
    try:
        tokens.sort(key=int)
    except ValueError:
        pass
    ids = {tok: i for i, tok in enumerate(tokens)}
    g = Graph.from_edges(len(tokens), ((ids[u], ids[v], w) for u, v, w in raw),
                         labels=tuple(tokens))
    if g.self_loops_dropped:
        logger.warning("dropped %d self-loop(s)", g.self_loops_dropped)
    return g


def dump_edge_list(g: Graph, stream: TextIO, weighted: bool | None = None) -> None:
    """Write ``g`` in the format read by :func:`load_edge_list`."""
    if weighted is None:
        weighted = g.weighted
    for u, v, w in zip(g.src, g.dst, g.weight):
        if weighted:
            stream.write(f"{g.labels[u]} {g.labels[v]} {w:.17g}\n")
        else:
            stream.write(f"{g.labels[u]} {g.labels[v]}\n")


# ---------------------------------------------------------------------------
# generators


def karate() -> Graph:
    """Zachary's karate club (34 nodes, 78 edges), 0-indexed."""
    text = resources.files("xmembed").joinpath("data", "karate.edgelist").read_text()
    g = load_edge_list(text)
    g.meta["name"] = "karate"
    return g


def barbell(clique_size: int, path_len: int = 0) -> Graph:
    """Two ``clique_size`` cliques joined by ``path_len`` intermediate nodes.

    Node ``clique_size - 1`` and node ``clique_size + path_len`` are the bridge
    endpoints; the first clique occupies ids ``0..clique_size-1``.
    """
    if clique_size < 3:
        raise ValueError("clique_size must be >= 3")
    if path_len < 0:
        raise ValueError("path_len must be >= 0")
    k = clique_size
    edges = [(i, j) for i in range(k) for j in range(i + 1, k)]
    off = k + path_len
    edges += [(off + i, off + j) for i in range(k) for j in range(i + 1, k)]
    chain = [k - 1] + list(range(k, k + path_len)) + [off]
    edges += list(zip(chain[:-1], chain[1:]))
    g = Graph.from_edges(2 * k + path_len, edges)
    g.meta["name"] = f"barbell-{clique_size}-{path_len}"
    return g


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    """Center 0 with ``leaves`` pendant nodes."""
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def planted_partition(sizes: list[int], p_in: float, p_out: float, seed: int = 0) -> Graph:
    """Stochastic block model with uniform within/between block edge probabilities."""
    rng = np.random.default_rng(seed)
    n = int(sum(sizes))
    block = np.repeat(np.arange(len(sizes)), sizes)
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(block[iu] == block[ju], p_in, p_out)
    keep = rng.random(iu.size) < p
    g = Graph(n, iu[keep], ju[keep], np.ones(int(keep.sum())))
    g.meta["blocks"] = block
    return g


def email_like(n: int = 1000, mean_degree: float = 34.0, communities: int = 20,
               mixing: float = 0.2, seed: int = 0) -> Graph:
    """Synthetic community graph with a target mean degree.

    ``mixing`` is the expected fraction of each node's edges that leave its
    community. Isolated nodes are attached to a random member of their block so
    every node has degree >= 1.
    """
    sizes = [n // communities + (1 if i < n % communities else 0) for i in range(communities)]
    s = np.mean(sizes)
    p_in = min(1.0, mean_degree * (1 - mixing) / (s - 1))
    p_out = mean_degree * mixing / (n - s)
    g = planted_partition(sizes, p_in, p_out, seed=seed)
    deg = g.degree
    if np.any(deg == 0):
        rng = np.random.default_rng(seed + 1)
        block = g.meta["blocks"]
        extra = []
        for v in np.flatnonzero(deg == 0):
            mates = np.flatnonzero((block == block[v]) & (np.arange(n) != v))
            extra.append((v, int(rng.choice(mates))))
        edges = [tuple(e) for e in g.edges()] + extra
        blocks = g.meta["blocks"]
        g = Graph.from_edges(n, edges)
        g.meta["blocks"] = blocks
    g.meta["name"] = f"email-like-{n}"
    return g


BUILTINS = {
    "karate": karate,
    "barbell": lambda: barbell(5, 0),
    "email-like": email_like,
}


def builtin(name: str) -> Graph:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown builtin graph {name!r}; choose from {sorted(BUILTINS)}") from None


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    mean_degree: float
    degree_std: float
    assortativity: float
    mean_clustering: float
    transitivity: float
    degenerate: bool = False

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def triangles_per_node(g: Graph) -> np.ndarray:
    a = g.binary_adjacency
    return np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0


def local_clustering(g: Graph) -> np.ndarray:
    """Unweighted local clustering coefficient; nodes with degree < 2 get 0."""
    k = g.degree
    wedges = k * (k - 1) / 2.0
    t = triangles_per_node(g)
    return np.divide(t, wedges, out=np.zeros(g.n), where=wedges > 0)


def degree_assortativity(g: Graph) -> float:
    if g.edge_count == 0:
        return 0.0
    k = g.degree
    x = np.concatenate([k[g.src], k[g.dst]])
    y = np.concatenate([k[g.dst], k[g.src]])
    if np.std(x) == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def graph_stats(g: Graph) -> GraphStats:
    """Table-style summary: size, degree moments, assortativity, clustering."""
    k = g.degree
    wedges = float(np.sum(k * (k - 1) / 2.0))
    tri = float(np.sum(triangles_per_node(g)))  # each triangle counted 3 times
    degenerate = g.n == 1 or g.edge_count == 0
    return GraphStats(
        node_count=g.n,
        edge_count=g.edge_count,
        mean_degree=2.0 * g.edge_count / g.n,
        degree_std=float(np.std(k)),
        assortativity=0.0 if degenerate else degree_assortativity(g),
        mean_clustering=0.0 if degenerate else float(np.mean(local_clustering(g))),
        transitivity=tri / wedges if wedges > 0 else 0.0,
        degenerate=degenerate,
    )
