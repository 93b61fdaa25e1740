"""numba kernel for the triangle-column reduction over Z/2.

Columns are kept as edge-rank arrays sorted in decreasing order, so the
pivot (lowest one) of a column is its first entry.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _grow(a, need):
    if need <= a.shape[0]:
        return a
    size = a.shape[0] * 2
    while size < need:
        size *= 2
    b = np.empty(size, dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def reduce_columns(ranks, n_edges):
    n_tri = ranks.shape[0]
    owner = np.full(max(n_edges, 1), -1, dtype=np.int64)
    starts = np.empty(max(n_edges, 1), dtype=np.int64)
    lens = np.empty(max(n_edges, 1), dtype=np.int64)
    pool = np.empty(max(64, 4 * n_edges), dtype=np.int64)
    tri_low = np.full(n_tri, -1, dtype=np.int64)
    tri_slot = np.full(n_tri, -1, dtype=np.int64)
    work = np.empty(64, dtype=np.int64)
    tmp = np.empty(64, dtype=np.int64)
    used = 0
    n_slots = 0
    for t in range(n_tri):
        a, b, c = ranks[t, 0], ranks[t, 1], ranks[t, 2]
        if a < b:
            a, b = b, a
        if b < c:
            b, c = c, b
        if a < b:
            a, b = b, a
        work[0], work[1], work[2] = a, b, c
        wl = 3
        while wl > 0:
            s = owner[work[0]]
            if s < 0:
                break
            st = starts[s]
            ln = lens[s]
            tmp = _grow(tmp, wl + ln)
            i = 0
            j = 0
            k = 0
            while i < wl and j < ln:
                x = work[i]
                y = pool[st + j]
                if x > y:
                    tmp[k] = x
                    k += 1
                    i += 1
                elif y > x:
                    tmp[k] = y
                    k += 1
                    j += 1
                else:
                    i += 1
                    j += 1
            while i < wl:
                tmp[k] = work[i]
                k += 1
                i += 1
            while j < ln:
                tmp[k] = pool[st + j]
                k += 1
                j += 1
            work, tmp = tmp, work
            wl = k
        if wl > 0:
            pool = _grow(pool, used + wl)
            pool[used : used + wl] = work[:wl]
            starts[n_slots] = used
            lens[n_slots] = wl
            owner[work[0]] = n_slots
            tri_low[t] = work[0]
            tri_slot[t] = n_slots
            n_slots += 1
            used += wl
    return tri_low, tri_slot, starts[:n_slots], lens[:n_slots], pool[:used]


@njit(cache=True)
def cohomology_pairs(cob_ptr, cob_idx, positive):
    """Pair each positive edge with its killing triangle via coboundary columns.

    Edges are visited in reverse filtration order; a coboundary column lists
    triangle positions ascending, so its pivot is the first entry. Returns the
    paired triangle per edge, -1 for unpaired (essential) or skipped edges.
    """
    n_edges = positive.shape[0]
    n_tri = cob_idx.shape[0] // 3 if cob_idx.shape[0] else 0
    owner = np.full(max(n_tri, 1), -1, dtype=np.int64)
    starts = np.empty(max(n_edges, 1), dtype=np.int64)
    lens = np.empty(max(n_edges, 1), dtype=np.int64)
    pool = np.empty(max(64, cob_idx.shape[0]), dtype=np.int64)
    paired = np.full(n_edges, -1, dtype=np.int64)
    work = np.empty(64, dtype=np.int64)
    tmp = np.empty(64, dtype=np.int64)
    used = 0
    n_slots = 0
    for e in range(n_edges - 1, -1, -1):
        if not positive[e]:
            continue
        lo = cob_ptr[e]
        wl = cob_ptr[e + 1] - lo
        work = _grow(work, wl)
        work[:wl] = cob_idx[lo : lo + wl]
        while wl > 0:
            s = owner[work[0]]
            if s < 0:
                break
            st = starts[s]
            ln = lens[s]
            tmp = _grow(tmp, wl + ln)
            i = 0
            j = 0
            k = 0
            while i < wl and j < ln:
                x = work[i]
                y = pool[st + j]
                if x < y:
                    tmp[k] = x
                    k += 1
                    i += 1
                elif y < x:
                    tmp[k] = y
                    k += 1
                    j += 1
                else:
                    i += 1
                    j += 1
            while i < wl:
                tmp[k] = work[i]
                k += 1
                i += 1
            while j < ln:
                tmp[k] = pool[st + j]
                k += 1
                j += 1
            work, tmp = tmp, work
            wl = k
        if wl > 0:
            pool = _grow(pool, used + wl)
            pool[used : used + wl] = work[:wl]
            starts[n_slots] = used
            lens[n_slots] = wl
            owner[work[0]] = n_slots
            paired[e] = work[0]
            n_slots += 1
            used += wl
    return paired
