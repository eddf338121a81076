"""Seeded noise streams.

All randomness in the library flows through an explicit ``GumbelRng`` owned
by the caller: identical seeds give identical sequences, and the number of
scalar draws is counted for verbose reporting.
"""

import numpy as np

from .tensor import default_dtype

# keeps u strictly inside (0, 1); random() can return exactly 0.0
_U_LO = 1e-12
_U_HI = 1.0 - 1e-12


def gumbel_from_uniform(u):
    """Gumbel(0,1) quantile transform of uniform draws on (0,1)."""
    return -np.log(-np.log(u))


class GumbelRng:
    """Deterministic noise source with a draw counter."""

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self.draws = 0

    def gumbel(self, shape=()):
        """i.i.d. Gumbel(0,1) samples via the quantile transform."""
        u = np.clip(self._gen.random(size=shape), _U_LO, _U_HI)
        self.draws += int(np.size(u))
        return gumbel_from_uniform(u).astype(default_dtype(), copy=False)

    def normal(self, shape=()):
        z = self._gen.standard_normal(size=shape)
        self.draws += int(np.size(z))
        return z.astype(default_dtype(), copy=False)

    def uniform(self, shape=()):
        u = self._gen.random(size=shape)
        self.draws += int(np.size(u))
        return u.astype(default_dtype(), copy=False)
