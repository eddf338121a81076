# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
"""Compiled selection and scatter kernels.

Same contracts as the numpy fallbacks in ``_numpy.py``; ``samsa.kernels``
picks one implementation at import time.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    cnp.float32_t
    cnp.float64_t


cdef inline bint _weaker(real va, Py_ssize_t ia, real vb, Py_ssize_t ib) nogil:
    # entry a loses to entry b on lower score, or equal score and higher index
    if va != vb:
        return va < vb
    return ia > ib


cdef inline void _sift_down(real* hv, Py_ssize_t* hi, Py_ssize_t size, Py_ssize_t root) nogil:
    cdef Py_ssize_t child
    cdef real v = hv[root]
    cdef Py_ssize_t ix = hi[root]
    while True:
        child = 2 * root + 1
        if child >= size:
            break
        if child + 1 < size and _weaker(hv[child + 1], hi[child + 1], hv[child], hi[child]):
            child += 1
        if _weaker(hv[child], hi[child], v, ix):
            hv[root] = hv[child]
            hi[root] = hi[child]
            root = child
        else:
            break
    hv[root] = v
    hi[root] = ix


def topk_indices(real[::1] z, Py_ssize_t k):
    """Indices of the k largest entries, descending, ties to the lower index."""
    cdef Py_ssize_t n = z.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for n={n}")

    if real is cnp.float32_t:
        heap_v_arr = np.empty(k, dtype=np.float32)
    else:
        heap_v_arr = np.empty(k, dtype=np.float64)
    heap_i_arr = np.empty(k, dtype=np.intp)
    out_arr = np.empty(k, dtype=np.intp)
    cdef real[::1] heap_v = heap_v_arr
    cdef Py_ssize_t[::1] heap_i = heap_i_arr
    cdef Py_ssize_t[::1] out = out_arr

    cdef Py_ssize_t i, last
    cdef real v
    with nogil:
        # min-heap of the current selection, weakest entry at the root
        for i in range(k):
            heap_v[i] = z[i]
            heap_i[i] = i
        for i in range(k // 2 - 1, -1, -1):
            _sift_down(&heap_v[0], &heap_i[0], k, i)
        for i in range(k, n):
            v = z[i]
            if _weaker(heap_v[0], heap_i[0], v, i):
                heap_v[0] = v
                heap_i[0] = i
                _sift_down(&heap_v[0], &heap_i[0], k, 0)
        # pop weakest-first into the tail of the output
        for last in range(k - 1, -1, -1):
            out[last] = heap_i[0]
            heap_v[0] = heap_v[last]
            heap_i[0] = heap_i[last]
            _sift_down(&heap_v[0], &heap_i[0], last, 0)
    return out_arr


def scatter_add_rows(real[:, ::1] out, Py_ssize_t[::1] idx, real[:, ::1] src):
    """out[idx[m]] += src[m] for every m; repeated indices accumulate."""
    cdef Py_ssize_t m = idx.shape[0]
    cdef Py_ssize_t d = out.shape[1]
    if src.shape[0] != m or src.shape[1] != d:
        raise ValueError(f"src shape {(src.shape[0], src.shape[1])} does not match "
                         f"{(m, d)}")
    cdef Py_ssize_t r, c, t
    with nogil:
        for r in range(m):
            t = idx[r]
            for c in range(d):
                out[t, c] += src[r, c]
    return None
