"""Sampling self-attention layers and the model stack.

One layer runs: pre-norm, query/key-value projections, a per-token
multi-head importance score (computed from the raw, un-normalized input),
concatenation with 2k learnable support rows, per-head top-k sampling of
key-value rows, scaled dot-product attention against the sampled rows, an
output projection, and a GELU feed-forward block.  Both residual branches
are scaled by a single zero-initialized scalar shared across every layer,
so a fresh model is the identity map.

``full_attention_layer_forward`` reuses the same parameters but attends to
every row, for baselines and equivalence tests.
"""

from dataclasses import dataclass, field

import numpy as np

from . import counters
from .graph import GraphInstance, GraphTokenizer
from .sampler import multi_head_sample
from .tensor import (
    Tensor,
    concat_cols,
    concat_rows,
    cross_entropy_logits,
    default_dtype,
    gather_rows,
    gelu,
    matmul,
    mean,
    mul,
    powi,
    reduce_sum,
    reshape,
    scale,
    scale_rows,
    slice_cols,
    smooth_l1,
    softmax_lastdim,
    transpose,
)


@dataclass
class AttentionConfig:
    d_model: int = 64
    n_heads: int = 4
    k: int = 32
    d_ffn: int = 128
    mode: str = "hard"            # hard | soft
    locality: str = "truncated"   # truncated | full
    tau: float = 1.0
    p_dropout: float = 0.0
    p_droppath: float = 0.0
    score_on_raw: bool = True     # importance scores from raw tokens, not the normed ones
    outer_noise: bool = True      # gumbel noise on the score matrix while training
    pair_noise: bool = True       # fresh gumbel noise inside the pairwise sigmoid

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if not 0.0 <= self.p_dropout < 1.0 or not 0.0 <= self.p_droppath < 1.0:
            raise ValueError("dropout probabilities must lie in [0, 1)")
        if self.mode not in ("hard", "soft"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.locality not in ("truncated", "full"):
            raise ValueError(f"unknown locality {self.locality!r}")

    @property
    def head_dim(self):
        return self.d_model // self.n_heads


@dataclass
class SamsaLayerParams:
    """All learnables of one layer; ``alpha`` is a reference to the model-wide
    shared residual scalar, never a per-layer copy."""

    w_q: Tensor
    b_q: Tensor
    w_kv: Tensor
    b_kv: Tensor
    w_score1: Tensor
    b_score1: Tensor
    w_score2: Tensor
    b_score2: Tensor
    p_supp: Tensor
    z_supp: Tensor
    gain_attn: Tensor
    gain_ffn: Tensor
    w_o: Tensor
    b_o: Tensor
    w_ffn1: Tensor
    b_ffn1: Tensor
    w_ffn2: Tensor
    b_ffn2: Tensor
    alpha: Tensor


def _param(gen, shape, std=None):
    if std is None:
        std = 1.0 / np.sqrt(shape[0])   # fan-in scaling
    data = gen.standard_normal(shape) * std
    return Tensor(data.astype(default_dtype()), requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape, dtype=default_dtype()), requires_grad=True)


def _ones(shape):
    return Tensor(np.ones(shape, dtype=default_dtype()), requires_grad=True)


def init_layer_params(cfg, gen, alpha):
    d, h, k = cfg.d_model, cfg.n_heads, cfg.k
    return SamsaLayerParams(
        w_q=_param(gen, (d, d)), b_q=_zeros((d,)),
        w_kv=_param(gen, (d, 2 * d)), b_kv=_zeros((2 * d,)),
        w_score1=_param(gen, (d, d)), b_score1=_zeros((d,)),
        w_score2=_param(gen, (d, h)), b_score2=_zeros((h,)),
        p_supp=_param(gen, (2 * k, 2 * d)),
        z_supp=_zeros((2 * k, h)),
        gain_attn=_ones((d,)), gain_ffn=_ones((d,)),
        w_o=_param(gen, (d, d)), b_o=_zeros((d,)),
        w_ffn1=_param(gen, (d, cfg.d_ffn)), b_ffn1=_zeros((cfg.d_ffn,)),
        w_ffn2=_param(gen, (cfg.d_ffn, d)), b_ffn2=_zeros((d,)),
        alpha=alpha,
    )


def linear(x, w, b):
    return matmul(x, w) + b


def rms_norm(x, gain, eps=1e-6):
    """Rows scaled to unit root-mean-square, then an elementwise gain."""
    d = x.shape[-1]
    ms = scale(reduce_sum(powi(x, 2.0), axis=1), 1.0 / d)
    inv = powi(ms + eps, -0.5)
    return mul(scale_rows(x, inv), gain)


def scaled_dot_attention(q, k, v):
    """softmax(q k^T / sqrt(d_h)) v; every query row mixes the same key set."""
    if k.shape[0] == 0:
        raise ValueError("attention needs at least one key row")
    if k.shape[0] != v.shape[0]:
        raise ValueError(f"key rows {k.shape[0]} != value rows {v.shape[0]}")
    counters.bump("attn_scores", q.shape[0] * k.shape[0])
    scores = scale(matmul(q, transpose(k)), 1.0 / np.sqrt(q.shape[1]))
    return matmul(softmax_lastdim(scores), v)


def dropout(x, p, rng, training):
    if not training or p <= 0.0:
        return x
    mask = (rng.uniform(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return mul(x, Tensor(mask, dtype=x.dtype))


def drop_path(x, p, rng, training):
    # stochastic depth on a whole residual branch
    if not training or p <= 0.0:
        return x
    keep = float(rng.uniform(()) >= p)
    return scale(x, keep / (1.0 - p))


def _importance_scores(x_raw, x_normed, params, cfg):
    src = x_raw if cfg.score_on_raw else x_normed
    hidden = gelu(linear(src, params.w_score1, params.b_score1))
    return linear(hidden, params.w_score2, params.b_score2)


def _attend_heads(q, kv_per_head, cfg):
    d, dh = cfg.d_model, cfg.head_dim
    outs = []
    for t, rows in enumerate(kv_per_head):
        k_t = slice_cols(rows, t * dh, (t + 1) * dh)
        v_t = slice_cols(rows, d + t * dh, d + (t + 1) * dh)
        q_t = slice_cols(q, t * dh, (t + 1) * dh)
        outs.append(scaled_dot_attention(q_t, k_t, v_t))
    return concat_cols(outs)


def samsa_layer_forward(x, params, cfg, training=False, rng=None):
    """One sampling-attention layer; returns the updated token matrix."""
    normed = rms_norm(x, params.gain_attn)
    q = linear(normed, params.w_q, params.b_q)
    p = linear(normed, params.w_kv, params.b_kv)
    z = _importance_scores(x, normed, params, cfg)
    if training and cfg.outer_noise and rng is not None:
        z = z + Tensor(rng.gumbel(z.shape), dtype=z.dtype)
    pool = concat_rows([p, params.p_supp])
    scores = concat_rows([z, params.z_supp])
    results = multi_head_sample(
        scores, pool, cfg.k, mode=cfg.mode, locality=cfg.locality,
        tau=cfg.tau, rng=rng, noisy=training and cfg.pair_noise)
    attn = _attend_heads(q, [r.rows for r in results], cfg)
    attn = linear(attn, params.w_o, params.b_o)
    attn = dropout(attn, cfg.p_dropout, rng, training)
    x = x + mul(drop_path(attn, cfg.p_droppath, rng, training), params.alpha)

    normed = rms_norm(x, params.gain_ffn)
    hidden = gelu(linear(normed, params.w_ffn1, params.b_ffn1))
    hidden = dropout(hidden, cfg.p_dropout, rng, training)
    ffn = linear(hidden, params.w_ffn2, params.b_ffn2)
    x = x + mul(drop_path(ffn, cfg.p_droppath, rng, training), params.alpha)
    return x


def full_attention_layer_forward(x, params, cfg, training=False, rng=None):
    """Same block with un-sampled attention: every head sees all n rows."""
    normed = rms_norm(x, params.gain_attn)
    q = linear(normed, params.w_q, params.b_q)
    p = linear(normed, params.w_kv, params.b_kv)
    attn = _attend_heads(q, [p] * cfg.n_heads, cfg)
    attn = linear(attn, params.w_o, params.b_o)
    attn = dropout(attn, cfg.p_dropout, rng, training)
    x = x + mul(drop_path(attn, cfg.p_droppath, rng, training), params.alpha)

    normed = rms_norm(x, params.gain_ffn)
    hidden = gelu(linear(normed, params.w_ffn1, params.b_ffn1))
    hidden = dropout(hidden, cfg.p_dropout, rng, training)
    ffn = linear(hidden, params.w_ffn2, params.b_ffn2)
    x = x + mul(drop_path(ffn, cfg.p_droppath, rng, training), params.alpha)
    return x


def sinusoid_positions(n, d):
    """Fixed 1-D sinusoidal position table."""
    pos = np.arange(n, dtype=np.float64)[:, None]
    idx = np.arange(0, d, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, idx / d)
    table = np.zeros((n, d), dtype=np.float64)
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : table[:, 1::2].shape[1]])
    return table


@dataclass
class ModelConfig:
    attention: str = "samsa"        # samsa | full
    depth: int = 2
    layer: AttentionConfig = field(default_factory=AttentionConfig)
    embed: str = "features"         # features | tokens | graph
    in_dim: int = 8                 # feature width or vocab size
    edge_dim: int = 0               # graph only
    n_out: int = 2
    head: str = "classify"          # classify | regress
    use_positions: bool = False

    def __post_init__(self):
        if self.attention not in ("samsa", "full"):
            raise ValueError(f"unknown attention {self.attention!r}")
        if self.embed not in ("features", "tokens", "graph"):
            raise ValueError(f"unknown embed kind {self.embed!r}")
        if self.head not in ("classify", "regress"):
            raise ValueError(f"unknown head {self.head!r}")


class Model:
    """Embedding, a stack of attention layers, and a mean-pooled task head."""

    def __init__(self, cfg, seed=0):
        self.cfg = cfg
        self.seed = int(seed)
        self.training = False
        gen = np.random.Generator(np.random.PCG64(self.seed))
        d = cfg.layer.d_model
        self.alpha = _zeros(())
        self.tokenizer = None
        if cfg.embed == "graph":
            self.tokenizer = GraphTokenizer(cfg.in_dim, cfg.edge_dim, d, gen)
            self.w_embed = None
            self.b_embed = None
        elif cfg.embed == "tokens":
            self.w_embed = _param(gen, (cfg.in_dim, d))
            self.b_embed = None
        else:
            self.w_embed = _param(gen, (cfg.in_dim, d))
            self.b_embed = _zeros((d,))
        self.layers = [init_layer_params(cfg.layer, gen, self.alpha)
                       for _ in range(cfg.depth)]
        n_out = cfg.n_out if cfg.head == "classify" else 1
        self.w_head = _param(gen, (d, n_out))
        self.b_head = _zeros((n_out,))
        self._pos_cache = {}

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def parameters(self):
        named = {"alpha": self.alpha}
        if self.tokenizer is not None:
            named.update({f"tokenizer.{k}": v for k, v in self.tokenizer.parameters().items()})
        if self.w_embed is not None:
            named["embed.w"] = self.w_embed
        if self.b_embed is not None:
            named["embed.b"] = self.b_embed
        for i, lp in enumerate(self.layers):
            for name in ("w_q", "b_q", "w_kv", "b_kv", "w_score1", "b_score1",
                         "w_score2", "b_score2", "p_supp", "z_supp", "gain_attn",
                         "gain_ffn", "w_o", "b_o", "w_ffn1", "b_ffn1", "w_ffn2", "b_ffn2"):
                named[f"layers.{i}.{name}"] = getattr(lp, name)
        named["head.w"] = self.w_head
        named["head.b"] = self.b_head
        return named

    def _positions(self, n, d):
        if n not in self._pos_cache:
            self._pos_cache[n] = sinusoid_positions(n, d)
        return self._pos_cache[n]

    def embed(self, x, rng=None):
        cfg = self.cfg
        d = cfg.layer.d_model
        if cfg.embed == "graph":
            if not isinstance(x, GraphInstance):
                raise TypeError("graph models take GraphInstance inputs")
            return self.tokenizer.tokenize(x, rng=rng).tokens
        if cfg.embed == "tokens":
            ids = np.asarray(x, dtype=np.intp)
            tok = gather_rows(self.w_embed, ids)
        else:
            feats = Tensor(np.asarray(x), dtype=default_dtype())
            tok = linear(feats, self.w_embed, self.b_embed)
        if cfg.use_positions:
            tok = tok + Tensor(self._positions(tok.shape[0], d), dtype=tok.dtype)
        return tok

    def forward(self, x, rng=None):
        tokens = self.embed(x, rng=rng)
        layer_fn = (samsa_layer_forward if self.cfg.attention == "samsa"
                    else full_attention_layer_forward)
        for lp in self.layers:
            tokens = layer_fn(tokens, lp, self.cfg.layer,
                              training=self.training, rng=rng)
        pooled = mean(tokens, axis=0)
        out = matmul(reshape(pooled, (1, tokens.shape[1])), self.w_head) + self.b_head
        out = reshape(out, (out.shape[1],))
        if self.cfg.head == "regress":
            return reshape(out, ())
        return out

    def output_loss(self, out, y):
        if self.cfg.head == "classify":
            return cross_entropy_logits(out, int(y))
        return smooth_l1(out, np.asarray(y, dtype=out.dtype))

    def loss(self, x, y, rng=None):
        return self.output_loss(self.forward(x, rng=rng), y)

    def output_prediction(self, out):
        if self.cfg.head == "classify":
            return int(np.argmax(out.data))
        return float(out.data)

    def predict(self, x, rng=None):
        return self.output_prediction(self.forward(x, rng=rng))


def build_model(cfg, seed=0):
    return Model(cfg, seed=seed)
