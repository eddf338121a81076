"""Gumbel relaxations: soft and straight-through softmax / sigmoid.

The straight-through variants emit discrete forward values but backpropagate
the Jacobian of their soft counterpart evaluated at the same noised logits.
The sigmoid uses the increasing convention sigma((pi + g) / tau), so that the
output saturates to 1 as the logit grows; its hard rule is 1 at exactly zero.
With ``noisy=False`` the noise term is zero and every operator here is
deterministic, forward and backward.
"""

import numpy as np

from .tensor import (
    Tensor,
    _lift,
    scale,
    sigmoid,
    softmax_lastdim,
    straight_through,
)


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")


def _noised(logits, rng, noisy):
    logits = _lift(logits)
    if not np.all(np.isfinite(logits.data)):
        raise ValueError("non-finite logits")
    if noisy:
        if rng is None:
            raise ValueError("noisy=True requires an rng")
        return logits + Tensor(rng.gumbel(logits.shape), dtype=logits.dtype)
    return logits


def gumbel_softmax(logits, tau=1.0, rng=None, noisy=False):
    """Softmax of (logits + gumbel noise) / tau over the last axis."""
    _check_tau(tau)
    return softmax_lastdim(scale(_noised(logits, rng, noisy), 1.0 / tau))


def st_gumbel_softmax(logits, tau=1.0, rng=None, noisy=False):
    """One-hot at the argmax of the noised logits; soft-softmax backward.

    Ties (only possible with noise off) break toward the lowest index.
    """
    _check_tau(tau)
    noised = _noised(logits, rng, noisy)
    soft = softmax_lastdim(scale(noised, 1.0 / tau))
    hard = np.zeros_like(soft.data)
    top = np.argmax(noised.data, axis=-1)
    np.put_along_axis(hard, np.expand_dims(top, -1), 1.0, axis=-1)
    return straight_through(hard, soft)


def gumbel_sigmoid(logits, tau=1.0, rng=None, noisy=False):
    """sigma((logits + gumbel noise) / tau), increasing in the logits."""
    _check_tau(tau)
    return sigmoid(scale(_noised(logits, rng, noisy), 1.0 / tau))


def st_gumbel_sigmoid(logits, tau=1.0, rng=None, noisy=False):
    """1 where the noised logit is >= 0, else 0; soft-sigmoid backward."""
    _check_tau(tau)
    noised = _noised(logits, rng, noisy)
    soft = sigmoid(scale(noised, 1.0 / tau))
    hard = (noised.data >= 0).astype(soft.dtype)
    return straight_through(hard, soft)
