"""Graph tokenization: nodes and edges both become attention tokens.

Each node gets a positional encoding drawn from a zero-mean gaussian with a
learnable per-dimension scale, shifted by a feature MLP; each edge encoding
is the difference of its endpoint encodings, so reversing an edge negates
it and encodings telescope along paths.  The random part is functional (it
identifies nodes), so it stays on at evaluation, drawn from a caller-seeded
stream.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import (
    Tensor,
    concat_cols,
    concat_rows,
    default_dtype,
    gather_rows,
    gelu,
    matmul,
    mul,
)


@dataclass
class GraphInstance:
    """Directed graph with dense node and edge features.

    (i, j) and (j, i) are distinct edges; undirected inputs should pass
    through ``expand_undirected`` first.
    """

    node_features: np.ndarray            # |V| x f
    edges: np.ndarray                    # |E| x 2 int (src, dst)
    edge_features: np.ndarray            # |E| x g_e
    target: Optional[float] = None

    def __post_init__(self):
        self.node_features = np.asarray(self.node_features, dtype=np.float64)
        self.edges = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        self.edge_features = np.asarray(self.edge_features, dtype=np.float64)
        n = self.node_features.shape[0]
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= n):
            raise IndexError(f"edge endpoint out of range for {n} nodes")
        if self.edge_features.shape[0] != self.edges.shape[0]:
            raise ValueError(
                f"{self.edges.shape[0]} edges but {self.edge_features.shape[0]} feature rows")

    @property
    def n_nodes(self):
        return self.node_features.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]


def expand_undirected(node_features, und_edges, und_edge_features, target=None):
    """Duplicate each undirected edge into both directions."""
    und_edges = np.asarray(und_edges, dtype=np.intp).reshape(-1, 2)
    und_feats = np.asarray(und_edge_features, dtype=np.float64)
    edges = np.concatenate([und_edges, und_edges[:, ::-1]], axis=0)
    feats = np.concatenate([und_feats, und_feats], axis=0)
    return GraphInstance(node_features, edges, feats, target=target)


@dataclass
class GraphTokenBatch:
    """Unified token matrix for one graph: all nodes first, then all edges."""

    tokens: Tensor
    token_type: np.ndarray   # 0 = node, 1 = edge
    n_nodes: int
    n_edges: int


def _mlp_params(gen, d_in, d_hidden, d_out):
    def mk(shape):
        std = 1.0 / np.sqrt(shape[0])
        return Tensor((gen.standard_normal(shape) * std).astype(default_dtype()),
                      requires_grad=True)

    zero = lambda shape: Tensor(np.zeros(shape, dtype=default_dtype()), requires_grad=True)
    return mk((d_in, d_hidden)), zero((d_hidden,)), mk((d_hidden, d_out)), zero((d_out,))


def _mlp(x, w1, b1, w2, b2):
    return matmul(gelu(matmul(x, w1) + b1), w2) + b2


class GraphTokenizer:
    """Learnable map from a graph to a (|V|+|E|) x d token matrix."""

    def __init__(self, node_dim, edge_dim, d_model, gen):
        self.node_dim = node_dim
        self.edge_dim = edge_dim
        self.d_model = d_model
        d = d_model
        # per-dimension noise scale; its square is the encoding variance
        self.sigma = Tensor(np.full((d,), 0.1, dtype=default_dtype()), requires_grad=True)
        self.phi = _mlp_params(gen, node_dim, d, d)
        self.phi_v = _mlp_params(gen, d + node_dim, d, d)
        self.phi_e = _mlp_params(gen, d + edge_dim, d, d)

    def parameters(self):
        named = {"sigma": self.sigma}
        for prefix, group in (("phi", self.phi), ("phi_v", self.phi_v), ("phi_e", self.phi_e)):
            for part, tensor in zip(("w1", "b1", "w2", "b2"), group):
                named[f"{prefix}.{part}"] = tensor
        return named

    def node_encoding(self, node_features, rng=None, noise=None):
        """Per-node encoding: noise * sigma + feature MLP, reparameterized so
        gradients reach sigma through the draw."""
        x = Tensor(np.asarray(node_features), dtype=default_dtype())
        n = x.shape[0]
        if noise is None:
            if rng is not None:
                noise = rng.normal((n, self.d_model))
            else:
                noise = np.zeros((n, self.d_model))
        eps = Tensor(np.asarray(noise), dtype=default_dtype())
        return mul(eps, self.sigma) + _mlp(x, *self.phi)

    def edge_encoding(self, node_pe, edges):
        """Edge encoding p_src - p_dst; antisymmetric under edge reversal."""
        edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
        n = node_pe.shape[0]
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise IndexError(f"edge endpoint out of range for {n} nodes")
        return gather_rows(node_pe, edges[:, 0]) - gather_rows(node_pe, edges[:, 1])

    def tokenize(self, graph, rng=None, noise=None):
        node_pe = self.node_encoding(graph.node_features, rng=rng, noise=noise)
        node_in = concat_cols([node_pe,
                               Tensor(graph.node_features, dtype=default_dtype())])
        node_tokens = _mlp(node_in, *self.phi_v)
        if graph.n_edges:
            edge_pe = self.edge_encoding(node_pe, graph.edges)
            edge_in = concat_cols([edge_pe,
                                   Tensor(graph.edge_features, dtype=default_dtype())])
            edge_tokens = _mlp(edge_in, *self.phi_e)
            tokens = concat_rows([node_tokens, edge_tokens])
        else:
            tokens = node_tokens
        token_type = np.concatenate([
            np.zeros(graph.n_nodes, dtype=np.int8),
            np.ones(graph.n_edges, dtype=np.int8),
        ])
        return GraphTokenBatch(tokens, token_type, graph.n_nodes, graph.n_edges)


def write_graph_file(graph, path):
    """Line-oriented text format: header ``|V| |E| f g_e``, then one node
    feature row per line, then one ``src dst features...`` line per edge."""
    lines = [f"{graph.n_nodes} {graph.n_edges} "
             f"{graph.node_features.shape[1]} {graph.edge_features.shape[1]}"]
    for row in graph.node_features:
        lines.append(" ".join(repr(float(v)) for v in row))
    for (src, dst), feats in zip(graph.edges, graph.edge_features):
        parts = [str(int(src)), str(int(dst))] + [repr(float(v)) for v in feats]
        lines.append(" ".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph_file(path):
    with open(path) as fh:
        tokens = fh.read().split("\n")
    header = tokens[0].split()
    if len(header) != 4:
        raise ValueError(f"bad graph header {tokens[0]!r}; expected '|V| |E| f g_e'")
    n_nodes, n_edges, f, g_e = (int(v) for v in header)
    node_rows = []
    for line in tokens[1:1 + n_nodes]:
        vals = [float(v) for v in line.split()]
        if len(vals) != f:
            raise ValueError(f"node row has {len(vals)} features, expected {f}")
        node_rows.append(vals)
    edges, edge_rows = [], []
    for line in tokens[1 + n_nodes:1 + n_nodes + n_edges]:
        parts = line.split()
        if len(parts) != 2 + g_e:
            raise ValueError(f"edge row has {len(parts)} fields, expected {2 + g_e}")
        edges.append((int(parts[0]), int(parts[1])))
        edge_rows.append([float(v) for v in parts[2:]])
    return GraphInstance(
        np.asarray(node_rows, dtype=np.float64).reshape(n_nodes, f),
        np.asarray(edges, dtype=np.intp).reshape(n_edges, 2),
        np.asarray(edge_rows, dtype=np.float64).reshape(n_edges, g_e),
    )
