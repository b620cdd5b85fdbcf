"""Compiled inner loops for pairwise metrics and Ward agglomeration.

Everything here is numba-jitted and operates on plain ndarrays. Each
pairwise kernel fills a packed lower triangle (row-major, pair (i, j)
with i > j at offset i*(i-1)//2 + j) with one write per pair, so results
are bit-identical regardless of how many threads run the prange.

The LCS matrix kernel uses the bit-parallel row encoding: one 64-bit
word carries the whole DP row when sequences have at most 56 positions
(the word needs log2(T+1) bits of carry headroom). Longer sequences fall
back to the classic rolling-row DP.
"""
from __future__ import annotations

import warnings

import numpy as np

# the TBB fallback notice is environment noise, not actionable here
warnings.filterwarnings("ignore", message=".*TBB.*")
from numba import njit, prange

BITPARALLEL_MAX_LEN = 56

_U1 = np.uint64(1)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(cache=True)
def _popcount(v):
    v = v - ((v >> _U1) & _M1)
    v = (v & _M2) + ((v >> np.uint64(2)) & _M2)
    v = (v + (v >> np.uint64(4))) & _M4
    return int((v * _H01) >> np.uint64(56))


@njit(cache=True)
def lcs_len_dp(x, y):
    m = x.shape[0]
    n = y.shape[0]
    prev = np.zeros(n + 1, dtype=np.int64)
    cur = np.zeros(n + 1, dtype=np.int64)
    for i in range(m):
        xi = x[i]
        for j in range(n):
            if xi == y[j]:
                cur[j + 1] = prev[j] + 1
            else:
                a = cur[j]
                b = prev[j + 1]
                cur[j + 1] = a if a > b else b
        tmp = prev
        prev = cur
        cur = tmp
    return prev[n]


@njit(cache=True)
def build_masks(codes, n_states):
    """Per-sequence bit masks: masks[i, s] has bit t set iff codes[i, t] == s."""
    n, t_len = codes.shape
    masks = np.zeros((n, n_states), dtype=np.uint64)
    for i in range(n):
        for t in range(t_len):
            masks[i, codes[i, t]] |= _U1 << np.uint64(t)
    return masks


@njit(cache=True)
def _lcs_len_bits(xmask, m, y):
    full = (_U1 << np.uint64(m)) - _U1
    v = full
    for t in range(y.shape[0]):
        mt = xmask[y[t]]
        u = v & mt
        v = (v + u) | (v & ~mt)
    return m - _popcount(v & full)


@njit(cache=True, parallel=True)
def pairwise_lcs_bits(codes, masks, out):
    n, t_len = codes.shape
    full = (_U1 << np.uint64(t_len)) - _U1
    for i in prange(1, n):
        base = i * (i - 1) // 2
        xmask = masks[i]
        for j in range(i):
            row = codes[j]
            v = full
            for t in range(t_len):
                mt = xmask[row[t]]
                u = v & mt
                v = (v + u) | (v & ~mt)
            lcs = t_len - _popcount(v & full)
            out[base + j] = 2.0 * (t_len - lcs)


@njit(cache=True, parallel=True)
def pairwise_lcs_dp(codes, out):
    n, t_len = codes.shape
    for i in prange(1, n):
        base = i * (i - 1) // 2
        prev = np.zeros(t_len + 1, dtype=np.int64)
        cur = np.zeros(t_len + 1, dtype=np.int64)
        for j in range(i):
            for t in range(t_len + 1):
                prev[t] = 0
            for p in range(t_len):
                xp = codes[i, p]
                for q in range(t_len):
                    if xp == codes[j, q]:
                        cur[q + 1] = prev[q] + 1
                    else:
                        a = cur[q]
                        b = prev[q + 1]
                        cur[q + 1] = a if a > b else b
                tmp = prev
                prev = cur
                cur = tmp
            out[base + j] = 2.0 * (t_len - prev[t_len])


@njit(cache=True)
def om_cost(x, y, costs, indel):
    m = x.shape[0]
    n = y.shape[0]
    prev = np.empty(n + 1, dtype=np.float64)
    cur = np.empty(n + 1, dtype=np.float64)
    for j in range(n + 1):
        prev[j] = j * indel
    for i in range(1, m + 1):
        cur[0] = i * indel
        xi = x[i - 1]
        for j in range(1, n + 1):
            best = prev[j - 1] + costs[xi, y[j - 1]]
            dele = prev[j] + indel
            if dele < best:
                best = dele
            ins = cur[j - 1] + indel
            if ins < best:
                best = ins
            cur[j] = best
        tmp = prev
        prev = cur
        cur = tmp
    return prev[n]


@njit(cache=True, parallel=True)
def pairwise_om(codes, costs, indel, out):
    n, t_len = codes.shape
    for i in prange(1, n):
        base = i * (i - 1) // 2
        prev = np.empty(t_len + 1, dtype=np.float64)
        cur = np.empty(t_len + 1, dtype=np.float64)
        for j in range(i):
            for q in range(t_len + 1):
                prev[q] = q * indel
            for p in range(1, t_len + 1):
                cur[0] = p * indel
                xp = codes[i, p - 1]
                for q in range(1, t_len + 1):
                    best = prev[q - 1] + costs[xp, codes[j, q - 1]]
                    dele = prev[q] + indel
                    if dele < best:
                        best = dele
                    ins = cur[q - 1] + indel
                    if ins < best:
                        best = ins
                    cur[q] = best
                tmp = prev
                prev = cur
                cur = tmp
            out[base + j] = prev[t_len]


@njit(cache=True, parallel=True)
def pairwise_positionwise(codes, costs, out):
    """Hamming-family distances: sum of costs[x_t, y_t] over positions."""
    n, t_len = codes.shape
    for i in prange(1, n):
        base = i * (i - 1) // 2
        for j in range(i):
            acc = 0.0
            for t in range(t_len):
                acc += costs[codes[i, t], codes[j, t]]
            out[base + j] = acc


@njit(cache=True, parallel=True)
def pairwise_timevarying(codes, costs_by_time, out):
    """Dynamic Hamming: sum of costs_by_time[t, x_t, y_t] over positions."""
    n, t_len = codes.shape
    for i in prange(1, n):
        base = i * (i - 1) // 2
        for j in range(i):
            acc = 0.0
            for t in range(t_len):
                acc += costs_by_time[t, codes[i, t], codes[j, t]]
            out[base + j] = acc


@njit(cache=True)
def ward_chain(d2, size):
    """Nearest-neighbor-chain agglomeration with the Ward update on
    squared dissimilarities.

    ``d2`` (modified in place) is the full square matrix of squared
    dissimilarities, ``size`` the per-slot member counts. Returns three
    arrays of length n-1 in chain-discovery order: the smallest original
    leaf index of each merged side and the squared merge height. All
    scans break ties toward the smallest slot index, and the chain's
    previous element wins ties outright, which keeps the walk finite.
    """
    n = d2.shape[0]
    active = np.ones(n, dtype=np.bool_)
    rep = np.arange(n, dtype=np.int64)  # smallest original leaf per slot
    out_a = np.empty(n - 1, dtype=np.int64)
    out_b = np.empty(n - 1, dtype=np.int64)
    out_h2 = np.empty(n - 1, dtype=np.float64)
    chain = np.empty(n, dtype=np.int64)
    chain_len = 0
    n_merges = 0
    while n_merges < n - 1:
        if chain_len == 0:
            for s in range(n):
                if active[s]:
                    chain[0] = s
                    chain_len = 1
                    break
        while True:
            cur = chain[chain_len - 1]
            prev = chain[chain_len - 2] if chain_len >= 2 else -1
            best = -1
            bestd = np.inf
            if prev >= 0:
                best = prev
                bestd = d2[cur, prev]
            for s in range(n):
                if active[s] and s != cur and s != prev:
                    ds = d2[cur, s]
                    if ds < bestd:
                        best = s
                        bestd = ds
            if best == prev:
                i = prev
                j = cur
                if rep[j] < rep[i]:
                    i, j = j, i
                out_a[n_merges] = rep[i]
                out_b[n_merges] = rep[j]
                out_h2[n_merges] = bestd
                ni = size[i]
                nj = size[j]
                for s in range(n):
                    if active[s] and s != i and s != j:
                        ns = size[s]
                        upd = (
                            (ni + ns) * d2[i, s] + (nj + ns) * d2[j, s] - ns * bestd
                        ) / (ni + nj + ns)
                        d2[i, s] = upd
                        d2[s, i] = upd
                size[i] = ni + nj
                active[j] = False
                n_merges += 1
                chain_len -= 2
                break
            chain[chain_len] = best
            chain_len += 1
    return out_a, out_b, out_h2
