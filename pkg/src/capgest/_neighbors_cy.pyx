# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exact nearest-neighbor search (hot-path backend).

Per query, a sorted insertion buffer of size k is maintained while scanning
the reference set once.  Ties on distance keep the lower reference index,
matching the numpy fallback.
"""

from libc.math cimport sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


def query_topk(object refs_obj, object queries_obj, Py_ssize_t k):
    """Distances and indices of the k nearest refs per query, ascending."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] refs = \
        np.ascontiguousarray(refs_obj, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] queries = \
        np.ascontiguousarray(queries_obj, dtype=np.float64)
    cdef Py_ssize_t n = refs.shape[0]
    cdef Py_ssize_t d = refs.shape[1]
    cdef Py_ssize_t m = queries.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for {n} reference points")
    if queries.shape[1] != d:
        raise ValueError("query dimensionality does not match references")

    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] dist = np.empty((m, k))
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] idx = \
        np.empty((m, k), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] best_d = np.empty(k)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] best_i = \
        np.empty(k, dtype=np.int64)

    cdef Py_ssize_t qi, ri, j, pos, count
    cdef double acc, diff, worst

    for qi in range(m):
        count = 0
        worst = 0.0
        for ri in range(n):
            acc = 0.0
            for j in range(d):
                diff = queries[qi, j] - refs[ri, j]
                acc += diff * diff
            if count == k and acc >= worst:
                continue
            # find insertion point: after any equal distances (stable by index)
            pos = count if count < k else k - 1
            while pos > 0 and best_d[pos - 1] > acc:
                if pos < k:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = acc
            best_i[pos] = ri
            if count < k:
                count += 1
            worst = best_d[count - 1]
        for j in range(k):
            dist[qi, j] = sqrt(best_d[j])
            idx[qi, j] = best_i[j]
    return dist, idx
