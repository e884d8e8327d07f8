"""Hot counting kernels: numba-jitted loops with a pure-numpy fallback.

All adjacency is bit-packed into uint64 words, 64 right-vertices per word,
LSB first.  Every kernel exists in two implementations:

  * ``*_nb`` -- explicit loops compiled with ``numba.njit``
  * ``*_np`` -- vectorized numpy (SWAR popcounts, broadcasting)

The active implementation is chosen at import time: setting the environment
variable ``DELTAREG_NO_NUMBA=1`` (or numba failing to import) selects the
numpy path.  ``IMPLS`` exposes both variants so the benchmark and the
equivalence tests can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def popcount_words_np(words: np.ndarray) -> np.ndarray:
    """SWAR popcount of a uint64 array, elementwise."""
    v = words.astype(np.uint64, copy=True)
    v -= (v >> np.uint64(1)) & _M1
    v = (v & _M2) + ((v >> np.uint64(2)) & _M2)
    v = (v + (v >> np.uint64(4))) & _M4
    return ((v * _H01) >> np.uint64(56)).astype(np.int64)


def popcount_rows_np(rows: np.ndarray) -> np.ndarray:
    return popcount_words_np(rows).sum(axis=1)


def and_popcount_pairs_np(rows, pairs):
    a = rows[pairs[:, 0]]
    b = rows[pairs[:, 1]]
    return popcount_words_np(a & b).sum(axis=1)


def xor_popcount_pairs_np(rows, pairs):
    a = rows[pairs[:, 0]]
    b = rows[pairs[:, 1]]
    return popcount_words_np(a ^ b).sum(axis=1)


def and_popcount_pairs_segmented_np(rows, pairs, seg_starts, seg_ends):
    """Popcount of row_i & row_j restricted to word segments.

    Returns an array of shape (len(pairs), len(seg_starts)); segment s covers
    words [seg_starts[s], seg_ends[s]).  Used for per-cell codegree counts
    when cells are word-aligned.
    """
    out = np.empty((len(pairs), len(seg_starts)), dtype=np.int64)
    a = rows[pairs[:, 0]]
    b = rows[pairs[:, 1]]
    pc = popcount_words_np(a & b)
    for s in range(len(seg_starts)):
        out[:, s] = pc[:, seg_starts[s]:seg_ends[s]].sum(axis=1)
    return out


def masked_degrees_np(rows, mask):
    """Per-row popcount of rows & mask (mask is one packed row)."""
    return popcount_words_np(rows & mask[None, :]).sum(axis=1)


def triangle_count_np(rows_ab, rows_ac, rows_bc, nb):
    """Number of triangles (a, b, c) across a tripartite bit-packed triple.

    rows_ab: per-a bits over B; rows_ac: per-a bits over C;
    rows_bc: per-b bits over C.
    """
    total = 0
    for a in range(rows_ab.shape[0]):
        bs = np.flatnonzero(np.unpackbits(rows_ab[a].view(np.uint8), bitorder="little")[:nb])
        for b in bs:
            total += int(popcount_words_np(rows_ac[a] & rows_bc[b]).sum())
    return total


def triangle_list_np(rows_ab, rows_ac, rows_bc, nb, nc):
    """All triangles as an (m, 3) int array, lexicographically sorted."""
    tris = []
    for a in range(rows_ab.shape[0]):
        bs = np.flatnonzero(np.unpackbits(rows_ab[a].view(np.uint8), bitorder="little")[:nb])
        for b in bs:
            both = rows_ac[a] & rows_bc[b]
            cs = np.flatnonzero(np.unpackbits(both.view(np.uint8), bitorder="little")[:nc])
            for c in cs:
                tris.append((a, int(b), int(c)))
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def min_block_sum_np(degs: np.ndarray, t: int) -> int:
    """Sum of the t smallest entries of degs."""
    if t >= len(degs):
        return int(degs.sum())
    part = np.partition(degs, t - 1)[:t]
    return int(part.sum())


def _unpack_degrees(rows, n_right):
    """(nl, n_right) 0/1 matrix from packed rows."""
    bits = np.unpackbits(rows.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :n_right].astype(np.int64)


HAVE_NUMBA = False
if not os.environ.get("DELTAREG_NO_NUMBA"):
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised only without numba
        HAVE_NUMBA = False

if HAVE_NUMBA:

    @njit(cache=True)
    def _popcnt64(x):
        x = x - ((x >> 1) & 0x5555555555555555)
        x = (x & 0x3333333333333333) + ((x >> 2) & 0x3333333333333333)
        x = (x + (x >> 4)) & 0x0F0F0F0F0F0F0F0F
        return (x * 0x0101010101010101) >> 56

    @njit(cache=True)
    def popcount_rows_nb(rows):
        n, w = rows.shape
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            s = 0
            for j in range(w):
                s += _popcnt64(rows[i, j])
            out[i] = s
        return out

    @njit(cache=True)
    def and_popcount_pairs_nb(rows, pairs):
        m = pairs.shape[0]
        w = rows.shape[1]
        out = np.empty(m, dtype=np.int64)
        for p in range(m):
            i, j = pairs[p, 0], pairs[p, 1]
            s = 0
            for t in range(w):
                s += _popcnt64(rows[i, t] & rows[j, t])
            out[p] = s
        return out

    @njit(cache=True)
    def xor_popcount_pairs_nb(rows, pairs):
        m = pairs.shape[0]
        w = rows.shape[1]
        out = np.empty(m, dtype=np.int64)
        for p in range(m):
            i, j = pairs[p, 0], pairs[p, 1]
            s = 0
            for t in range(w):
                s += _popcnt64(rows[i, t] ^ rows[j, t])
            out[p] = s
        return out

    @njit(cache=True)
    def and_popcount_pairs_segmented_nb(rows, pairs, seg_starts, seg_ends):
        m = pairs.shape[0]
        ns = seg_starts.shape[0]
        out = np.empty((m, ns), dtype=np.int64)
        for p in range(m):
            i, j = pairs[p, 0], pairs[p, 1]
            for s in range(ns):
                acc = 0
                for t in range(seg_starts[s], seg_ends[s]):
                    acc += _popcnt64(rows[i, t] & rows[j, t])
                out[p, s] = acc
        return out

    @njit(cache=True)
    def masked_degrees_nb(rows, mask):
        n, w = rows.shape
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            s = 0
            for j in range(w):
                s += _popcnt64(rows[i, j] & mask[j])
            out[i] = s
        return out

    @njit(cache=True)
    def triangle_count_nb(rows_ab, rows_ac, rows_bc, nb_):
        na = rows_ab.shape[0]
        w = rows_ac.shape[1]
        total = 0
        for a in range(na):
            for b in range(nb_):
                if (rows_ab[a, b >> 6] >> np.uint64(b & 63)) & np.uint64(1):
                    s = 0
                    for t in range(w):
                        s += _popcnt64(rows_ac[a, t] & rows_bc[b, t])
                    total += s
        return total

    @njit(cache=True)
    def triangle_list_nb(rows_ab, rows_ac, rows_bc, nb_, nc_):
        na = rows_ab.shape[0]
        cap = 1024
        out = np.empty((cap, 3), dtype=np.int64)
        cnt = 0
        for a in range(na):
            for b in range(nb_):
                if (rows_ab[a, b >> 6] >> np.uint64(b & 63)) & np.uint64(1):
                    for c in range(nc_):
                        bit_ac = (rows_ac[a, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)
                        bit_bc = (rows_bc[b, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)
                        if bit_ac and bit_bc:
                            if cnt == cap:
                                cap *= 2
                                grown = np.empty((cap, 3), dtype=np.int64)
                                grown[:cnt] = out[:cnt]
                                out = grown
                            out[cnt, 0] = a
                            out[cnt, 1] = b
                            out[cnt, 2] = c
                            cnt += 1
        return out[:cnt].copy()

    @njit(cache=True)
    def subset_min_edges_nb(rows, n_right, size_left, size_right, e_total, half_num, half_den):
        nl = rows.shape[0]
        nr = n_right
        deg = np.zeros((nl, nr), dtype=np.int64)
        for i in range(nl):
            for v in range(nr):
                deg[i, v] = (rows[i, v >> 6] >> np.uint64(v & 63)) & np.uint64(1)
        idx = np.empty(size_left, dtype=np.int64)
        for i in range(size_left):
            idx[i] = i
        degs = np.zeros(nr, dtype=np.int64)
        for i in range(size_left):
            degs += deg[idx[i]]
        while True:
            sorted_degs = np.sort(degs)
            e_st = 0
            for t in range(size_right):
                e_st += sorted_degs[t]
            if e_st * half_den * nl * nr < e_total * half_num * size_left * size_right:
                return True, idx.copy(), e_st
            # advance to next lexicographic combination, updating degs
            j = size_left - 1
            while j >= 0 and idx[j] == nl - size_left + j:
                j -= 1
            if j < 0:
                return False, idx[:0].copy(), -1
            degs -= deg[idx[j]]
            for t in range(j + 1, size_left):
                degs -= deg[idx[t]]
            idx[j] += 1
            degs += deg[idx[j]]
            for t in range(j + 1, size_left):
                idx[t] = idx[t - 1] + 1
                degs += deg[idx[t]]


def subset_min_edges_py(rows, n_right, size_left, size_right, e_total, half_num, half_den):
    """Pure-python/numpy equivalent of subset_min_edges_nb."""
    from itertools import combinations

    nl = rows.shape[0]
    deg = _unpack_degrees(rows, n_right)
    for comb in combinations(range(nl), size_left):
        degs = deg[list(comb)].sum(axis=0)
        e_st = min_block_sum_np(degs, size_right)
        if e_st * half_den * nl * n_right < e_total * half_num * size_left * size_right:
            return True, np.array(comb, dtype=np.int64), e_st
    return False, np.empty(0, dtype=np.int64), -1


if HAVE_NUMBA:
    popcount_rows = popcount_rows_nb
    and_popcount_pairs = and_popcount_pairs_nb
    xor_popcount_pairs = xor_popcount_pairs_nb
    and_popcount_pairs_segmented = and_popcount_pairs_segmented_nb
    masked_degrees = masked_degrees_nb
    triangle_count = triangle_count_nb
    triangle_list = triangle_list_nb
    subset_min_edges = subset_min_edges_nb
else:
    popcount_rows = popcount_rows_np
    and_popcount_pairs = and_popcount_pairs_np
    xor_popcount_pairs = xor_popcount_pairs_np
    and_popcount_pairs_segmented = and_popcount_pairs_segmented_np
    masked_degrees = masked_degrees_np
    triangle_count = triangle_count_np
    triangle_list = triangle_list_np
    subset_min_edges = subset_min_edges_py

IMPLS = {
    "numpy": {
        "popcount_rows": popcount_rows_np,
        "and_popcount_pairs": and_popcount_pairs_np,
        "xor_popcount_pairs": xor_popcount_pairs_np,
        "and_popcount_pairs_segmented": and_popcount_pairs_segmented_np,
        "masked_degrees": masked_degrees_np,
        "triangle_count": triangle_count_np,
        "triangle_list": triangle_list_np,
        "subset_min_edges": subset_min_edges_py,
    }
}
if HAVE_NUMBA:
    IMPLS["numba"] = {
        "popcount_rows": popcount_rows_nb,
        "and_popcount_pairs": and_popcount_pairs_nb,
        "xor_popcount_pairs": xor_popcount_pairs_nb,
        "and_popcount_pairs_segmented": and_popcount_pairs_segmented_nb,
        "masked_degrees": masked_degrees_nb,
        "triangle_count": triangle_count_nb,
        "triangle_list": triangle_list_nb,
        "subset_min_edges": subset_min_edges_nb,
    }
