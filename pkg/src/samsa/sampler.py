"""Differentiable top-k row sampling.

Three routes:

* ``sample_with_replacement`` concatenates k independent straight-through
  categorical draws; duplicates allowed.
* ``brute_force_set_sample`` enumerates every k-subset and maximizes the
  summed score.  Verification oracle only; it never runs in a model.
* ``sample_without_replacement`` selects the k highest-scored rows and
  estimates gradients by relaxing each pairwise comparison between a
  selected row and a competitor from the locality (the strongest excluded
  rows).  Hard mode emits the exact top-k rows with the soft blend's
  Jacobian as backward; soft mode emits the blend itself.

Selected rows are ordered by descending score, ties to the lower index.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from . import counters
from .kernels import topk_indices
from .relax import st_gumbel_softmax
from .tensor import (
    Tensor,
    _lift,
    concat_rows,
    gather_rows,
    grad_enabled,
    matmul,
    neg,
    outer_difference,
    reduce_sum,
    reshape,
    scale,
    scale_rows,
    sigmoid,
    slice_cols,
    straight_through,
)


@dataclass
class SampleResult:
    """Output of one without-replacement sampling pass.

    ``indices`` (selected) and ``locality`` (competitors) are disjoint index
    arrays; ``relaxation`` is the k x |locality| pairwise matrix, all-ones in
    hard mode; ``rows`` is the gathered (hard) or blended (soft) output.
    """

    indices: np.ndarray
    locality: np.ndarray
    relaxation: object
    rows: Tensor


def _scores_1d(z):
    data = z.data if isinstance(z, Tensor) else np.asarray(z)
    if data.ndim != 1:
        raise ValueError(f"scores must be a vector, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("non-finite importance scores")
    return data


def arg_topk(z, k):
    """Indices of the k largest scores, descending, ties to the lower index.

    Partial selection only: cost is one scan plus heap maintenance, never an
    enumeration of k-subsets.
    """
    data = _scores_1d(z)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    counters.bump("topk_scans", n)
    return topk_indices(np.ascontiguousarray(data), k)


def sample_with_replacement(z, X, k, tau=1.0, rng=None, noisy=False):
    """k independent straight-through categorical draws over the rows of X."""
    z, X = _lift(z), _lift(X)
    data = _scores_1d(z)
    if data.shape[0] != X.shape[0]:
        raise ValueError(f"scores for {data.shape[0]} rows but X has {X.shape[0]}")
    picks = []
    for _ in range(k):
        onehot = st_gumbel_softmax(z, tau=tau, rng=rng, noisy=noisy)
        picks.append(matmul(reshape(onehot, (1, data.shape[0])), X))
    return concat_rows(picks)


def brute_force_set_sample(z, X, k, budget=1_000_000):
    """Enumerate all k-subsets, score each by its summed importance, return
    the argmax set (lexicographic tie-break) and its rows.

    Verification-only: no gradients, and a hard enumeration budget.
    """
    data = _scores_1d(z)
    Xd = X.data if isinstance(X, Tensor) else np.asarray(X)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    total = comb(n, k)
    if total > budget:
        raise ValueError(f"C({n},{k})={total} exceeds the enumeration budget {budget}")
    best_set = None
    best_score = -np.inf
    for subset in combinations(range(n), k):
        counters.bump("set_enumerations")
        score = float(data[list(subset)].sum())
        if score > best_score:
            best_score = score
            best_set = subset
    return best_set, Xd[list(best_set)]


def _split_locality(data, k, locality):
    n = data.shape[0]
    if locality == "truncated":
        if n < 2 * k:
            raise ValueError(
                f"truncated locality needs at least 2k={2 * k} candidates, have {n}")
        order = arg_topk(data, 2 * k)
    elif locality == "full":
        if n < k + 1:
            raise ValueError(f"full locality needs at least k+1={k + 1} candidates, have {n}")
        order = arg_topk(data, n)
    else:
        raise ValueError(f"locality must be 'truncated' or 'full', got {locality!r}")
    return order[:k], order[k:]


def sample_without_replacement(z, X, k, mode="hard", locality="truncated",
                               tau=1.0, rng=None, noisy=False, pair_noise=None):
    """Select k distinct rows of X by importance score.

    The relaxation compares each selected score z[i_m] against each locality
    score z[j_v] through a (noised) sigmoid p[m, v]; the emitted row m is the
    convex blend

        sum_v (X[i_m] * p[m, v] + X[j_v] * (1 - p[m, v])) / |locality|.

    Hard mode forwards the exact top-k rows (p ends up all-ones) and takes
    the blend's Jacobian as backward, so gradients reach the selected and
    competitor scores with opposite signs and both row groups of X.
    ``pair_noise`` injects a pre-drawn noise block (used by multi-head
    sampling to stay independent of head order).
    """
    if mode not in ("hard", "soft"):
        raise ValueError(f"mode must be 'hard' or 'soft', got {mode!r}")
    z, X = _lift(z), _lift(X)
    data = _scores_1d(z)
    if data.shape[0] != X.shape[0]:
        raise ValueError(f"scores for {data.shape[0]} rows but X has {X.shape[0]}")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    sel, loc = _split_locality(data, k, locality)
    width = loc.shape[0]

    needs_grad = grad_enabled() and (z.requires_grad or X.requires_grad)
    if mode == "hard" and not needs_grad:
        # inference fast path: selection only, no relaxation
        rows = gather_rows(X, sel)
        return SampleResult(sel, loc, np.ones((k, width), dtype=X.dtype), rows)

    zi = gather_rows(z, sel)
    zj = gather_rows(z, loc)
    diff = outer_difference(zi, zj)
    if noisy:
        g = pair_noise if pair_noise is not None else rng.gumbel((k, width))
        diff = diff + Tensor(np.asarray(g), dtype=diff.dtype)
    p = sigmoid(scale(diff, 1.0 / tau))
    counters.bump("pair_comparisons", k * width)

    Xi = gather_rows(X, sel)
    Xj = gather_rows(X, loc)
    blend = scale(
        scale_rows(Xi, reduce_sum(p, axis=1)) + matmul(neg(p) + 1.0, Xj),
        1.0 / width,
    )
    if mode == "soft":
        return SampleResult(sel, loc, p, blend)
    rows = straight_through(X.data[sel], blend)
    return SampleResult(sel, loc, np.ones((k, width), dtype=X.dtype), rows)


def multi_head_sample(Z, P, k, mode="hard", locality="truncated",
                      tau=1.0, rng=None, noisy=False):
    """Run one without-replacement sample per head over shared candidates.

    Head t uses score column Z[:, t].  All noise for all heads is drawn as
    one block up front, so results do not depend on head execution order.
    """
    Z, P = _lift(Z), _lift(P)
    if Z.ndim != 2:
        raise ValueError(f"multi-head scores must be 2-D, got shape {Z.shape}")
    if Z.shape[0] != P.shape[0]:
        raise ValueError(f"score rows {Z.shape[0]} != candidate rows {P.shape[0]}")
    n, heads = Z.shape
    width = k if locality == "truncated" else n - k
    noise = rng.gumbel((heads, k, width)) if noisy else None
    results = []
    for t in range(heads):
        col = reshape(slice_cols(Z, t, t + 1), (n,))
        results.append(sample_without_replacement(
            col, P, k, mode=mode, locality=locality, tau=tau,
            noisy=noisy, pair_noise=None if noise is None else noise[t]))
    return results
