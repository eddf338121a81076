"""Desk-scale synthetic tasks.

Four generators, each shaped so that selecting the right tokens matters:

* ``seq-select``: classify the class channel of the token with the highest
  score channel; only that one token carries the answer.
* ``seq-listops-lite``: evaluate short nested min/max/med expressions.
* ``graph-degree``: regress the mean undirected degree of a random graph.
* ``cloud-centroid``: find the octant containing the densest cluster of a
  3-D point cloud.

Splits never share samples: each (seed, split) pair seeds an independent
stream.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict
from statistics import median

import numpy as np

from .graph import GraphInstance, expand_undirected

TASK_KINDS = ("seq-select", "seq-listops-lite", "graph-degree", "cloud-centroid")

# listops vocabulary: digits, operators, brackets
LISTOPS_VOCAB = {str(d): d for d in range(10)}
LISTOPS_VOCAB.update({"MIN": 10, "MAX": 11, "MED": 12, "[": 13, "]": 14})
LISTOPS_VOCAB_SIZE = len(LISTOPS_VOCAB)
_LISTOPS_ID_TO_TOKEN = {v: k for k, v in LISTOPS_VOCAB.items()}


@dataclass
class TaskSpec:
    kind: str = "seq-select"
    n: int = 256                 # sequence length / point count
    vocab: int = 16              # seq-select classes
    min_nodes: int = 6
    max_nodes: int = 14
    n_train: int = 2048
    n_val: int = 256
    n_test: int = 256
    seed: int = 0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}; choose from {TASK_KINDS}")

    def spec_hash(self):
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


_SPLIT_IDS = {"train": 0, "val": 1, "test": 2}


def _split_rng(spec, split):
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([spec.seed, _SPLIT_IDS[split], 0xA55])))


def _gen_seq_select(spec, gen):
    classes = gen.integers(0, spec.vocab, size=spec.n)
    scores = gen.random(spec.n)
    # plant the winner with a clear margin over the n-1 distractors
    winner = int(gen.integers(0, spec.n))
    scores[winner] = 1.2 + 0.3 * gen.random()
    x = np.zeros((spec.n, spec.vocab + 1), dtype=np.float64)
    x[np.arange(spec.n), classes] = 1.0
    x[:, -1] = scores
    label = int(classes[winner])
    return x, label


def _gen_listops_expr(gen, depth):
    # returns (token list, value)
    if depth == 0 or gen.random() < 0.35:
        digit = int(gen.integers(0, 10))
        return [str(digit)], digit
    op = ["MIN", "MAX", "MED"][int(gen.integers(0, 3))]
    n_args = int(gen.integers(2, 5))
    tokens = ["[", op]
    values = []
    for _ in range(n_args):
        sub, val = _gen_listops_expr(gen, depth - 1)
        tokens.extend(sub)
        values.append(val)
    tokens.append("]")
    if op == "MIN":
        out = min(values)
    elif op == "MAX":
        out = max(values)
    else:
        out = int(median(values))
    return tokens, out


def _gen_listops(spec, gen):
    max_len = min(spec.n, 128)
    while True:
        tokens, value = _gen_listops_expr(gen, depth=3)
        if len(tokens) <= max_len and len(tokens) >= 5:
            ids = np.asarray([LISTOPS_VOCAB[t] for t in tokens], dtype=np.intp)
            return ids, int(value)


def listops_eval(ids):
    """Independent recursive evaluator over a token-id sequence; the oracle
    the generator's labels are checked against."""
    tokens = [_LISTOPS_ID_TO_TOKEN[int(i)] for i in ids]

    def parse(pos):
        tok = tokens[pos]
        if tok != "[":
            return int(tok), pos + 1
        op = tokens[pos + 1]
        pos += 2
        values = []
        while tokens[pos] != "]":
            val, pos = parse(pos)
            values.append(val)
        result = {"MIN": min, "MAX": max, "MED": lambda v: int(median(v))}[op](values)
        return result, pos + 1

    value, end = parse(0)
    if end != len(tokens):
        raise ValueError("trailing tokens after expression")
    return value


def _gen_graph_degree(spec, gen):
    n_nodes = int(gen.integers(spec.min_nodes, spec.max_nodes + 1))
    # random spanning tree, then extra undirected edges
    und = set()
    for v in range(1, n_nodes):
        und.add((int(gen.integers(0, v)), v))
    n_extra = int(gen.integers(0, 2 * n_nodes))
    for _ in range(n_extra):
        a, b = gen.integers(0, n_nodes, size=2)
        if a == b:
            continue
        und.add((min(int(a), int(b)), max(int(a), int(b))))
    und = sorted(und)
    node_feats = gen.standard_normal((n_nodes, 3))
    edge_feats = gen.standard_normal((len(und), 2))
    graph = expand_undirected(node_feats, np.asarray(und), edge_feats)
    label = 2.0 * len(und) / n_nodes
    graph.target = label
    return graph, label


def cycle_graph(n_nodes, node_dim=3, edge_dim=2):
    """Ring of n nodes; every node has undirected degree exactly 2."""
    und = [(v, (v + 1) % n_nodes) for v in range(n_nodes)]
    graph = expand_undirected(np.zeros((n_nodes, node_dim)),
                              np.asarray(und), np.zeros((len(und), edge_dim)))
    graph.target = 2.0
    return graph


def _gen_cloud_centroid(spec, gen):
    octant = int(gen.integers(0, 8))
    center = np.array([0.5 if octant & (1 << a) else -0.5 for a in range(3)])
    n_cluster = max(spec.n // 4, 1)
    cluster = center + 0.1 * gen.standard_normal((n_cluster, 3))
    rest = gen.uniform(-1.0, 1.0, size=(spec.n - n_cluster, 3))
    points = np.concatenate([cluster, rest], axis=0)
    gen.shuffle(points, axis=0)
    return points, octant


_GENERATORS = {
    "seq-select": _gen_seq_select,
    "seq-listops-lite": _gen_listops,
    "graph-degree": _gen_graph_degree,
    "cloud-centroid": _gen_cloud_centroid,
}


def generate_split(spec, split, count=None):
    gen = _split_rng(spec, split)
    count = {"train": spec.n_train, "val": spec.n_val, "test": spec.n_test}[split] \
        if count is None else count
    make = _GENERATORS[spec.kind]
    return [make(spec, gen) for _ in range(count)]


def generate_task(spec, cache_dir=None):
    """All three splits; optionally cached on disk keyed by (spec hash, seed)."""
    if cache_dir and spec.kind != "graph-degree":
        path = os.path.join(cache_dir, f"{spec.kind}-{spec.spec_hash()}.npz")
        if os.path.exists(path):
            return _load_cache(path)
        splits = {split: generate_split(spec, split) for split in _SPLIT_IDS}
        os.makedirs(cache_dir, exist_ok=True)
        _save_cache(path, splits)
        return splits
    return {split: generate_split(spec, split) for split in _SPLIT_IDS}


def _save_cache(path, splits):
    payload = {}
    for split, samples in splits.items():
        payload[f"{split}_count"] = np.asarray(len(samples))
        for i, (x, y) in enumerate(samples):
            payload[f"{split}_x_{i}"] = x
            payload[f"{split}_y_{i}"] = np.asarray(y)
    np.savez_compressed(path, **payload)


def _load_cache(path):
    data = np.load(path)
    splits = {}
    for split in _SPLIT_IDS:
        count = int(data[f"{split}_count"])
        samples = []
        for i in range(count):
            x = data[f"{split}_x_{i}"]
            y = data[f"{split}_y_{i}"]
            samples.append((x, y.item()))
        splits[split] = samples
    return splits


def task_model_settings(kind, vocab=16):
    """Embedding/head wiring each task expects from the model."""
    if kind == "seq-select":
        # order never matters here; positions would only mask the score channel
        return {"embed": "features", "in_dim": vocab + 1, "head": "classify",
                "use_positions": False}
    if kind == "seq-listops-lite":
        return {"embed": "tokens", "in_dim": LISTOPS_VOCAB_SIZE, "head": "classify",
                "use_positions": True}
    if kind == "graph-degree":
        return {"embed": "graph", "in_dim": 3, "edge_dim": 2, "head": "regress",
                "use_positions": False}
    if kind == "cloud-centroid":
        return {"embed": "features", "in_dim": 3, "head": "classify",
                "use_positions": False}
    raise ValueError(f"unknown task kind {kind!r}")


def task_n_out(kind, vocab=16):
    return {"seq-select": vocab, "seq-listops-lite": 10,
            "graph-degree": 1, "cloud-centroid": 8}[kind]


def constant_predictor_mae(samples):
    """MAE of always predicting the mean target; regression baseline."""
    targets = np.asarray([y for _, y in samples], dtype=np.float64)
    return float(np.abs(targets - targets.mean()).mean())
