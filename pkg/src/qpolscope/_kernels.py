"""Compiled inner loops over sorted time-tag arrays."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dead_time_mask(t, dead_ps):
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return keep
    keep[0] = True
    last = t[0]
    for i in range(1, n):
        if t[i] - last >= dead_ps:
            keep[i] = True
            last = t[i]
    return keep


@njit(cache=True, nogil=True)
def greedy_coincidences(a, b, window2, delay):
    """One-to-one coincidences with |a - (b + delay)| <= window/2.

    ``window2`` is the full window, so the test is ``2*|d| <= window2`` and stays
    exact in integers. Returns (count, comparisons).
    """
    i = 0
    j = 0
    na = a.shape[0]
    nb = b.shape[0]
    count = 0
    steps = 0
    while i < na and j < nb:
        steps += 1
        d = 2 * (a[i] - (b[j] + delay))
        if d > window2:
            j += 1
        elif d < -window2:
            i += 1
        else:
            count += 1
            i += 1
            j += 1
    return count, steps


@njit(cache=True, nogil=True)
def delay_histogram(a, b, max_delay, bin_width, nbins):
    """All-pairs histogram of tau = b - a over bins centred on k * bin_width."""
    counts = np.zeros(nbins, dtype=np.int64)
    half = nbins // 2
    nb = b.shape[0]
    lo = 0
    reach = max_delay * 2 + bin_width  # in doubled units: -reach <= 2 tau < reach
    for i in range(a.shape[0]):
        ta = a[i]
        while lo < nb and 2 * (b[lo] - ta) < -reach:
            lo += 1
        j = lo
        while j < nb:
            d2 = 2 * (b[j] - ta)
            if d2 >= reach:
                break
            # nearest bin centre, half-open bins [c - w/2, c + w/2)
            k = (d2 + bin_width) // (2 * bin_width)
            counts[k + half] += 1
            j += 1
    return counts
