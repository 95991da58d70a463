"""Degree and common-neighbor statistics of an observed graph."""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ._bits import popcount64

# rows of the packed adjacency kept hot while streaming the others past them
TILE = 32


@dataclass(frozen=True)
class PairStats:
    pair: tuple
    common_count: int


def degree(G, i):
    return int(G.neighbors(i).shape[0])


@nb.njit(cache=True)
def _intersect_count(a, b):
    p = q = s = 0
    while p < a.shape[0] and q < b.shape[0]:
        if a[p] < b[q]:
            p += 1
        elif a[p] > b[q]:
            q += 1
        else:
            s += 1
            p += 1
            q += 1
    return s


def common_neighbors(G, i, j):
    """|N(i) & N(j)| by merging the two sorted neighbor lists."""
    if i == j:
        raise ValueError("common_neighbors needs two distinct vertices")
    return int(_intersect_count(G.neighbors(i), G.neighbors(j)))


@nb.njit(cache=True, parallel=True)
def _cooc_counts(m, indptr, indices):
    nnz = np.zeros(m, dtype=np.int64)
    for i in nb.prange(m):
        acc = np.zeros(m, dtype=np.int32)
        k = 0
        for p in range(indptr[i], indptr[i + 1]):
            w = indices[p]
            for q in range(indptr[w + 1] - 1, indptr[w] - 1, -1):
                v = indices[q]
                if v <= i:
                    break
                if acc[v] == 0:
                    k += 1
                acc[v] += 1
        nnz[i] = k
    return nnz


@nb.njit(cache=True, parallel=True)
def _cooc_fill(m, indptr, indices, rowptr, cols, vals):
    for i in nb.prange(m):
        acc = np.zeros(m, dtype=np.int32)
        touched = np.empty(rowptr[i + 1] - rowptr[i], dtype=np.int32)
        k = 0
        for p in range(indptr[i], indptr[i + 1]):
            w = indices[p]
            for q in range(indptr[w + 1] - 1, indptr[w] - 1, -1):
                v = indices[q]
                if v <= i:
                    break
                if acc[v] == 0:
                    touched[k] = v
                    k += 1
                acc[v] += 1
        touched.sort()
        base = rowptr[i]
        for t in range(k):
            cols[base + t] = touched[t]
            vals[base + t] = acc[touched[t]]


class CooccurrenceTable:
    """Common-neighbor counts for every pair that has at least one.

    Keyed on (min, max); pairs that are absent have count 0. Built by
    walking, for each vertex i, the two-hop paths i - w - v with v > i, which
    is the same sum-of-squared-degrees work as enumerating pairs inside each
    neighborhood, but with a private accumulator per row so the result does
    not depend on scheduling.
    """

    def __init__(self, m, rowptr, cols, vals):
        self.m = m
        self.rowptr = rowptr
        self.cols = cols
        self.vals = vals

    @classmethod
    def build(cls, G):
        nnz = _cooc_counts(G.m, G.indptr, G.indices)
        rowptr = np.zeros(G.m + 1, dtype=np.int64)
        np.cumsum(nnz, out=rowptr[1:])
        cols = np.empty(rowptr[-1], dtype=np.int32)
        vals = np.empty(rowptr[-1], dtype=np.int32)
        _cooc_fill(G.m, G.indptr, G.indices, rowptr, cols, vals)
        return cls(G.m, rowptr, cols, vals)

    def __len__(self):
        return int(self.cols.shape[0])

    def __getitem__(self, pair):
        i, j = pair
        if i == j:
            raise ValueError("pairs need two distinct vertices")
        i, j = min(i, j), max(i, j)
        row = self.cols[self.rowptr[i]:self.rowptr[i + 1]]
        k = np.searchsorted(row, j)
        if k < row.shape[0] and row[k] == j:
            return int(self.vals[self.rowptr[i] + k])
        return 0

    def __contains__(self, pair):
        return self[pair] > 0

    def get(self, pair):
        return PairStats((min(pair), max(pair)), self[pair])

    def pairs(self):
        rows = np.repeat(np.arange(self.m, dtype=np.int64), np.diff(self.rowptr))
        return np.stack([rows, self.cols.astype(np.int64)], axis=1)

    def items(self):
        for (i, j), v in zip(self.pairs(), self.vals):
            yield (int(i), int(j)), PairStats((int(i), int(j)), int(v))

    def total(self):
        return int(self.vals.sum(dtype=np.int64))


def cooccurrence_table(G):
    return CooccurrenceTable.build(G)


@nb.njit(cache=True, parallel=True)
def _common_matrix(bits):
    m, words = bits.shape
    out = np.zeros((m, m), dtype=np.int32)
    nblocks = (m + TILE - 1) // TILE
    for blk in nb.prange(nblocks):
        i0 = blk * TILE
        i1 = min(i0 + TILE, m)
        for j in range(i0 + 1, m):
            b = bits[j]
            for i in range(i0, min(i1, j)):
                a = bits[i]
                s = 0
                for w in range(words):
                    s += popcount64(a[w] & b[w])
                out[i, j] = s
                out[j, i] = s
    return out


def common_count_matrix(G):
    """Dense all-pairs common-neighbor counts (m x m); for moderate m only."""
    return _common_matrix(G.bitset())
