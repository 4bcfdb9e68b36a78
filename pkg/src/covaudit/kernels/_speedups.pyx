# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled rank/concordance kernels.

Semantics are identical to covaudit.kernels._purepy; callers go through
covaudit.kernels, which picks whichever backend imported and adapts the
argument types (this module wants 'd'-typed buffers).
"""
from libc.math cimport sqrt
from libc.stdlib cimport free, malloc


cdef Py_ssize_t _merge_argsort(
    double* primary, double* secondary,
    Py_ssize_t* idx, Py_ssize_t* tmp,
    Py_ssize_t lo, Py_ssize_t hi,
) noexcept nogil:
    """Sort idx[lo:hi] by (primary, secondary); returns 0 (swap counting
    is done separately on the reordered secondary array)."""
    cdef Py_ssize_t mid, i, j, k, a, b
    if hi - lo < 2:
        return 0
    mid = (lo + hi) // 2
    _merge_argsort(primary, secondary, idx, tmp, lo, mid)
    _merge_argsort(primary, secondary, idx, tmp, mid, hi)
    i = lo
    j = mid
    k = lo
    while i < mid and j < hi:
        a = idx[i]
        b = idx[j]
        if primary[a] < primary[b] or (
            primary[a] == primary[b] and secondary[a] <= secondary[b]
        ):
            tmp[k] = a
            i += 1
        else:
            tmp[k] = b
            j += 1
        k += 1
    while i < mid:
        tmp[k] = idx[i]
        i += 1
        k += 1
    while j < hi:
        tmp[k] = idx[j]
        j += 1
        k += 1
    for k in range(lo, hi):
        idx[k] = tmp[k]
    return 0


cdef long long _merge_count(
    double* seq, double* buf, Py_ssize_t lo, Py_ssize_t hi
) noexcept nogil:
    """Count strict inversions while merge-sorting seq[lo:hi]."""
    cdef Py_ssize_t mid, i, j, k
    cdef long long swaps = 0
    if hi - lo < 2:
        return 0
    mid = (lo + hi) // 2
    swaps += _merge_count(seq, buf, lo, mid)
    swaps += _merge_count(seq, buf, mid, hi)
    i = lo
    j = mid
    k = lo
    while i < mid and j < hi:
        if seq[i] <= seq[j]:
            buf[k] = seq[i]
            i += 1
        else:
            buf[k] = seq[j]
            j += 1
            swaps += mid - i
        k += 1
    while i < mid:
        buf[k] = seq[i]
        i += 1
        k += 1
    while j < hi:
        buf[k] = seq[j]
        j += 1
        k += 1
    for k in range(lo, hi):
        seq[k] = buf[k]
    return swaps


cdef long long _tie_term(double* values, Py_ssize_t n) noexcept nogil:
    """Sum t*(t-1)/2 over runs of equal values in a sorted array."""
    cdef long long total = 0
    cdef long long run
    cdef Py_ssize_t i = 0, j
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        run = j - i + 1
        total += run * (run - 1) // 2
        i = j + 1
    return total


def midrank(double[:] values):
    """1-based ranks; tied values all receive the mean of their positions."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double shared
    cdef double* vals = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t* idx = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* tmp = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    if vals == NULL or idx == NULL or tmp == NULL:
        free(vals); free(idx); free(tmp)
        raise MemoryError()
    ranks = [0.0] * n
    try:
        for i in range(n):
            vals[i] = values[i]
            idx[i] = i
        _merge_argsort(vals, vals, idx, tmp, 0, n)
        i = 0
        while i < n:
            j = i
            while j + 1 < n and vals[idx[j + 1]] == vals[idx[i]]:
                j += 1
            shared = (i + j) / 2.0 + 1.0
            for k in range(i, j + 1):
                ranks[idx[k]] = shared
            i = j + 1
        return ranks
    finally:
        free(vals); free(idx); free(tmp)


def kendall_tau_b(double[:] x, double[:] y):
    """Tie-corrected Kendall rank correlation via merge-sort counting."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef long long n0, n1, n2, n3, run, swaps, d1, d2, numerator
    if y.shape[0] != n:
        raise ValueError("vectors differ in length")
    if n < 2:
        raise ValueError("need at least two observations")

    cdef double* xs = <double*> malloc(n * sizeof(double))
    cdef double* ys = <double*> malloc(n * sizeof(double))
    cdef double* buf = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t* idx = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* tmp = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    if xs == NULL or ys == NULL or buf == NULL or idx == NULL or tmp == NULL:
        free(xs); free(ys); free(buf); free(idx); free(tmp)
        raise MemoryError()
    try:
        for i in range(n):
            xs[i] = x[i]
            ys[i] = y[i]
            idx[i] = i
        _merge_argsort(xs, ys, idx, tmp, 0, n)
        for i in range(n):
            buf[i] = xs[idx[i]]
        for i in range(n):
            xs[i] = buf[i]
        for i in range(n):
            buf[i] = ys[idx[i]]
        for i in range(n):
            ys[i] = buf[i]

        n0 = <long long> n * (n - 1) // 2
        n1 = _tie_term(xs, n)

        n3 = 0
        i = 0
        while i < n:
            j = i
            while j + 1 < n and xs[j + 1] == xs[i] and ys[j + 1] == ys[i]:
                j += 1
            run = j - i + 1
            n3 += run * (run - 1) // 2
            i = j + 1

        swaps = _merge_count(ys, buf, 0, n)
        n2 = _tie_term(ys, n)

        d1 = n0 - n1
        d2 = n0 - n2
        if d1 == 0 or d2 == 0:
            raise ValueError("tau-b undefined: one side is entirely tied")
        numerator = n0 - n1 - n2 + n3 - 2 * swaps
        return numerator / sqrt(<double> d1 * <double> d2)
    finally:
        free(xs); free(ys); free(buf); free(idx); free(tmp)
