"""AdamW with decoupled weight decay, plus the warmup-cosine schedule."""

import logging
import math

import numpy as np

log = logging.getLogger(__name__)


class AdamW:
    """Adam with decoupled weight decay and global gradient-norm clipping.

    Clipping happens before the moment updates.  If any gradient is
    non-finite the whole update is skipped and the event is logged; the
    step counter only advances on applied updates.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.0, clip_norm=2.0):
        if isinstance(params, dict):
            self.params = dict(params)
        else:
            self.params = {f"param{i}": p for i, p in enumerate(params)}
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.clip_norm = None if clip_norm in (None, 0) else float(clip_norm)
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.skipped = 0

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def grad_norm(self):
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float(np.sum(p.grad.astype(np.float64) ** 2))
        return math.sqrt(total)

    def step(self, lr=None):
        """Apply one update; returns False if skipped on non-finite gradients."""
        lr = self.lr if lr is None else float(lr)
        grads = {}
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                self.skipped += 1
                log.warning("non-finite gradient in %s; update skipped", name)
                return False
            grads[name] = g

        if self.clip_norm is not None:
            norm = self.grad_norm()
            if norm > self.clip_norm:
                factor = self.clip_norm / norm
                grads = {name: g * factor for name, g in grads.items()}

        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data = p.data - lr * (update + self.weight_decay * p.data)
        return True


def cosine_warmup_lr(step, warmup_steps, total_steps, peak_lr):
    """Linear ramp 0 -> peak over the warmup, then cosine decay peak -> 0."""
    step = min(max(step, 0), total_steps)
    if warmup_steps > 0 and step < warmup_steps:
        return peak_lr * step / warmup_steps
    span = max(total_steps - warmup_steps, 1)
    progress = (step - warmup_steps) / span
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
