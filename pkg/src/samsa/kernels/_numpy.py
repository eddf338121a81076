"""Pure-numpy fallbacks for the compiled kernels."""

import numpy as np


def topk_indices(z, k):
    """Indices of the k largest entries, descending, ties to the lower index."""
    n = z.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for n={n}")
    # stable sort on -z keeps equal scores in original index order
    order = np.argsort(-z, kind="stable")
    return np.ascontiguousarray(order[:k], dtype=np.intp)


def scatter_add_rows(out, idx, src):
    """out[idx[m]] += src[m] for every m; repeated indices accumulate."""
    if src.shape[0] != idx.shape[0] or src.shape[1:] != out.shape[1:]:
        raise ValueError(f"src shape {src.shape} does not match "
                         f"{(idx.shape[0],) + out.shape[1:]}")
    np.add.at(out, idx, src)
