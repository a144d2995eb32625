"""Pure-Python/numpy PELT with the Gaussian-kernel segment cost.

Reference twin of ``_pelt_ext.pyx``; both walk the same recursion and
accumulate kernel sums in the same order.
"""
import numpy as np

PRUNE_ATOL = 1e-9
PRUNE_RTOL = 1e-12


def pelt_rbf(Y, gamma, penalty, min_size=1, prune=True):
    """Optimal breakpoints of ``Y`` (n x k) under kernel cost + ``penalty`` per segment.

    Returns ``(breakpoints, total)`` where ``breakpoints`` is ascending,
    excludes 0 and ends with n, and ``total`` is the summed segment cost
    plus ``penalty`` times the number of interior breakpoints.
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    n = Y.shape[0]
    m = max(int(min_size), 1)
    if n < m:
        return [n], _block_cost_direct(Y, 0, n, gamma)

    F = np.full(n + 1, np.inf)
    F[0] = 0.0
    last = np.zeros(n + 1, dtype=np.int64)

    # live candidates: start index, running within-block kernel sum, expiry step
    cand = np.zeros(0, dtype=np.int64)
    gsum = np.zeros(0)
    expiry = np.zeros(0, dtype=np.int64)
    never = n + 1

    for t in range(1, n + 1):
        s_new = t - 1
        if s_new == 0 or s_new >= m:
            cand = np.append(cand, s_new)
            gsum = np.append(gsum, 0.0)
            expiry = np.append(expiry, never)
        # extend every block [s, t-1) by row t-1
        lo = int(cand[0])
        suffix = np.zeros(t - lo)
        if t - 1 > lo:
            d2 = ((Y[lo:t - 1] - Y[t - 1]) ** 2).sum(axis=1)
            # summed from i = t-2 downwards so the value at s is range independent
            suffix[:-1] = np.cumsum(np.exp(-gamma * d2)[::-1])[::-1]
        gsum += 2.0 * suffix[cand - lo] + 1.0

        length = t - cand
        ok = length >= m
        if not ok.any():
            continue
        cost = np.maximum(length - gsum / length, 0.0)
        vals = np.where(ok, F[cand] + cost + penalty, np.inf)
        j = int(np.argmin(vals))
        F[t] = vals[j]
        last[t] = cand[j]

        if prune:
            dead = ok & (F[cand] + cost > F[t] + PRUNE_ATOL + PRUNE_RTOL * abs(F[t]))
            expiry = np.where(dead, np.minimum(expiry, t + m), expiry)
            keep = expiry > t + 1
            if not keep.all():
                cand, gsum, expiry = cand[keep], gsum[keep], expiry[keep]

    bkps = []
    t = n
    while t > 0:
        bkps.append(t)
        t = int(last[t])
    bkps.reverse()
    return bkps, float(F[n] - penalty)


def _block_cost_direct(Y, a, b, gamma):
    block = Y[a:b]
    d2 = ((block[:, None, :] - block[None, :, :]) ** 2).sum(axis=2)
    return float(max((b - a) - np.exp(-gamma * d2).sum() / (b - a), 0.0))
