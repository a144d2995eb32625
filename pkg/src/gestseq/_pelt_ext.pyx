# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled PELT with the Gaussian-kernel segment cost.

Same recursion, pruning rule, and summation order as ``_pelt_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, INFINITY

cnp.import_array()

cdef double PRUNE_ATOL = 1e-9
cdef double PRUNE_RTOL = 1e-12


def pelt_rbf(Y, double gamma, double penalty, Py_ssize_t min_size=1, bint prune=True):
    cdef const double[:, ::1] y = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t k = y.shape[1]
    cdef Py_ssize_t m = min_size if min_size > 1 else 1
    if n < m:
        from ._pelt_py import _block_cost_direct
        return [n], _block_cost_direct(np.asarray(Y, dtype=np.float64), 0, n, gamma)

    F_arr = np.full(n + 1, np.inf)
    last_arr = np.zeros(n + 1, dtype=np.intp)
    cand_arr = np.zeros(n + 1, dtype=np.intp)
    gsum_arr = np.zeros(n + 1)
    expiry_arr = np.zeros(n + 1, dtype=np.intp)
    suffix_arr = np.zeros(n + 1)
    cdef double[::1] F = F_arr
    cdef Py_ssize_t[::1] last = last_arr
    cdef Py_ssize_t[::1] cand = cand_arr
    cdef double[::1] gsum = gsum_arr
    cdef Py_ssize_t[::1] expiry = expiry_arr
    cdef double[::1] suffix = suffix_arr

    cdef Py_ssize_t ncand = 0, t, s, i, j, c, lo, length, best_s, w
    cdef Py_ssize_t never = n + 1
    cdef double acc, d2, diff, cost, val, best, thresh, L

    F[0] = 0.0
    for t in range(1, n + 1):
        s = t - 1
        if s == 0 or s >= m:
            cand[ncand] = s
            gsum[ncand] = 0.0
            expiry[ncand] = never
            ncand += 1
        lo = cand[0]
        # suffix[i - lo] = sum_{i..t-2} kappa(y_i, y_{t-1}), accumulated downwards
        acc = 0.0
        suffix[t - 1 - lo] = 0.0
        i = t - 2
        while i >= lo:
            d2 = 0.0
            for j in range(k):
                diff = y[i, j] - y[t - 1, j]
                d2 = d2 + diff * diff
            acc = acc + exp(-gamma * d2)
            suffix[i - lo] = acc
            i -= 1
        for c in range(ncand):
            gsum[c] = gsum[c] + (2.0 * suffix[cand[c] - lo] + 1.0)

        best = INFINITY
        best_s = -1
        for c in range(ncand):
            length = t - cand[c]
            if length < m:
                continue
            L = <double>length
            cost = L - gsum[c] / L
            if cost < 0.0:
                cost = 0.0
            val = F[cand[c]] + cost + penalty
            if val < best:
                best = val
                best_s = cand[c]
        if best_s < 0:
            continue
        F[t] = best
        last[t] = best_s

        if prune:
            thresh = F[t] + PRUNE_ATOL + PRUNE_RTOL * fabs(F[t])
            w = 0
            for c in range(ncand):
                length = t - cand[c]
                if length >= m:
                    L = <double>length
                    cost = L - gsum[c] / L
                    if cost < 0.0:
                        cost = 0.0
                    if F[cand[c]] + cost > thresh and t + m < expiry[c]:
                        expiry[c] = t + m
                if expiry[c] > t + 1:
                    cand[w] = cand[c]
                    gsum[w] = gsum[c]
                    expiry[w] = expiry[c]
                    w += 1
            ncand = w

    bkps = []
    t = n
    while t > 0:
        bkps.append(int(t))
        t = last[t]
    bkps.reverse()
    return bkps, float(F[n] - penalty)
