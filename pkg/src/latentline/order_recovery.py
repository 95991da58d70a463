"""Order recovery from approximate pairwise distances.

Triples (i, j, k) certify that j lies between i and k. Vertices that are never
certified as a middle sit near an end of the segment; one of them anchors an
orientation, which is propagated through the triples into a directed graph
whose reachability counts give the order.

The triple set is never materialized inside ``recover_order``: a directed pair
(i, j) entering the oriented edge set is popped from a worklist exactly once
and its admissible continuations k are re-derived from the flank set of j.
A triple {i, k} around j counts as deleted once either (i, j) or (k, j) has
been popped, which is the same bookkeeping as removing both orientations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ._bits import popcount64
from .errors import EmptyAnchorSet


@dataclass(frozen=True)
class OrderResult:
    order: np.ndarray
    scores: np.ndarray
    anchor: int
    oriented_graph_size: int
    anchor_set_size: int = 0
    components: int = 0

    @property
    def m(self):
        return int(self.order.shape[0])

    def ranks(self):
        r = np.empty_like(self.order)
        r[self.order] = np.arange(self.order.shape[0])
        return r


# --- flank sets and triples -------------------------------------------------

@nb.njit(cache=True, parallel=True)
def _flank_counts(D, lo, hi):
    m = D.shape[0]
    cnt = np.zeros(m, dtype=np.int64)
    for j in nb.prange(m):
        k = 0
        for i in range(m):
            v = D[j, i]
            if v >= lo and v <= hi and i != j:
                k += 1
        cnt[j] = k
    return cnt


@nb.njit(cache=True, parallel=True)
def _flank_fill(D, lo, hi, indptr, idx, vals):
    m = D.shape[0]
    for j in nb.prange(m):
        p = indptr[j]
        for i in range(m):
            v = D[j, i]
            if v >= lo and v <= hi and i != j:
                idx[p] = i
                vals[p] = v
                p += 1


def flank_sets(D, window):
    """CSR of C_j = {i : D[i, j] in [L + delta, 2L + 7 delta]}, sorted by i."""
    lo = np.float32(window.flank_lo)
    hi = np.float32(window.flank_hi)
    cnt = _flank_counts(D, lo, hi)
    indptr = np.zeros(D.shape[0] + 1, dtype=np.int64)
    np.cumsum(cnt, out=indptr[1:])
    idx = np.empty(indptr[-1], dtype=np.int32)
    vals = np.empty(indptr[-1], dtype=np.float32)
    _flank_fill(D, lo, hi, indptr, idx, vals)
    return indptr, idx, vals


@nb.njit(cache=True)
def _admit(D, i, k, dij, djk, margin, floor):
    # floor: an estimate below L only promises d_hat < L + delta, so two close flanks
    # on one side could otherwise pass the margin test; true middles always clear it
    dik = D[i, k]
    return dik > abs(dij - djk) + margin and dik >= floor


@nb.njit(cache=True, parallel=True)
def _middle_flags(D, indptr, idx, vals, margin, floor):
    m = D.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    for j in nb.prange(m):
        found = False
        for a in range(indptr[j], indptr[j + 1]):
            i = idx[a]
            for b in range(a + 1, indptr[j + 1]):
                if _admit(D, i, idx[b], vals[a], vals[b], margin, floor):
                    found = True
                    break
            if found:
                break
        out[j] = found
    return out


@nb.njit(cache=True)
def _triples_count(D, indptr, idx, vals, margin, floor):
    total = 0
    for j in range(D.shape[0]):
        for a in range(indptr[j], indptr[j + 1]):
            for b in range(indptr[j], indptr[j + 1]):
                if a != b and _admit(D, idx[a], idx[b], vals[a], vals[b], margin, floor):
                    total += 1
    return total


@nb.njit(cache=True)
def _triples_fill(D, indptr, idx, vals, margin, floor, out):
    t = 0
    for j in range(D.shape[0]):
        for a in range(indptr[j], indptr[j + 1]):
            for b in range(indptr[j], indptr[j + 1]):
                if a != b and _admit(D, idx[a], idx[b], vals[a], vals[b], margin, floor):
                    out[t, 0] = idx[a]
                    out[t, 1] = j
                    out[t, 2] = idx[b]
                    t += 1


class TripleSet:
    """Admitted ordered triples (i, j, k), both orientations stored.

    Rows are sorted by (j, i, k), so the continuations of a directed pair
    (i, j) form one contiguous run.
    """

    def __init__(self, triples, m):
        t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        order = np.lexsort((t[:, 2], t[:, 0], t[:, 1]))
        self.triples = t[order]
        self.m = m
        self._keys = self.triples[:, 1] * m + self.triples[:, 0]

    def __len__(self):
        return int(self.triples.shape[0])

    def __iter__(self):
        for i, j, k in self.triples:
            yield int(i), int(j), int(k)

    def __contains__(self, triple):
        i, j, k = triple
        ks = self.continuations(i, j)
        p = np.searchsorted(ks, k)
        return bool(p < ks.shape[0] and ks[p] == k)

    def continuations(self, i, j):
        key = j * self.m + i
        lo = np.searchsorted(self._keys, key, side="left")
        hi = np.searchsorted(self._keys, key, side="right")
        return self.triples[lo:hi, 2]

    def middles(self):
        return np.unique(self.triples[:, 1])


def _estimate_matrix(est):
    return est if isinstance(est, np.ndarray) else est.matrix()


def collect_triples(est, m=None, window=None):
    """Materialize every admitted triple; meant for small instances."""
    window = window or est.window
    D = _estimate_matrix(est)
    indptr, idx, vals = flank_sets(D, window)
    margin = np.float32(3.0 * window.delta)
    floor = np.float32(2.0 * window.L - window.delta)
    total = _triples_count(D, indptr, idx, vals, margin, floor)
    out = np.empty((total, 3), dtype=np.int64)
    _triples_fill(D, indptr, idx, vals, margin, floor, out)
    return TripleSet(out, D.shape[0])


# --- saturation -------------------------------------------------------------

@nb.njit(cache=True)
def _slot_of(idx, lo, hi, target):
    while lo < hi:
        mid = (lo + hi) >> 1
        if idx[mid] < target:
            lo = mid + 1
        else:
            hi = mid
    return lo


@nb.njit(cache=True)
def _saturate(D, indptr, idx, vals, seeds, margin, floor):
    total = indptr[-1]
    in_e = np.zeros(total, dtype=np.uint8)      # slot (j, k): (j, k) is in E'
    popped_in = np.zeros(total, dtype=np.uint8)  # slot (j, k): (k, j) was popped
    wsrc = np.empty(total, dtype=np.int32)
    wslot = np.empty(total, dtype=np.int64)
    tail = 0
    for s in range(seeds.shape[0]):
        v = seeds[s]
        for b in range(indptr[v], indptr[v + 1]):
            if in_e[b] == 0:
                in_e[b] = 1
                wsrc[tail] = v
                wslot[tail] = b
                tail += 1
    head = 0
    while head < tail:
        i = wsrc[head]
        sl = wslot[head]
        head += 1
        j = idx[sl]
        dij = vals[sl]
        popped_in[_slot_of(idx, indptr[j], indptr[j + 1], i)] = 1
        for b in range(indptr[j], indptr[j + 1]):
            k = idx[b]
            # (j, k) already in E' means the triple only needs its deletion,
            # which the popped flags already record
            if k == i or popped_in[b] != 0 or in_e[b] != 0:
                continue
            if _admit(D, i, k, dij, vals[b], margin, floor):
                in_e[b] = 1
                wsrc[tail] = j
                wslot[tail] = b
                tail += 1
    src = wsrc[:tail].copy()
    dst = np.empty(tail, dtype=np.int32)
    for t in range(tail):
        dst[t] = idx[wslot[t]]
    return src, dst


# --- reachability -----------------------------------------------------------

@nb.njit(cache=True)
def _csr(m, src, dst):
    indptr = np.zeros(m + 1, dtype=np.int64)
    for t in range(src.shape[0]):
        indptr[src[t] + 1] += 1
    for v in range(m):
        indptr[v + 1] += indptr[v]
    fill = indptr[:-1].copy()
    out = np.empty(src.shape[0], dtype=np.int32)
    for t in range(src.shape[0]):
        out[fill[src[t]]] = dst[t]
        fill[src[t]] += 1
    return indptr, out


@nb.njit(cache=True)
def _tarjan(m, indptr, adj):
    # iterative Tarjan; components come out sinks-first
    index = np.full(m, -1, dtype=np.int64)
    low = np.zeros(m, dtype=np.int64)
    on_stack = np.zeros(m, dtype=np.bool_)
    comp = np.full(m, -1, dtype=np.int64)
    stack = np.empty(m, dtype=np.int64)
    call_v = np.empty(m, dtype=np.int64)
    call_p = np.empty(m, dtype=np.int64)
    sp = 0
    cp = 0
    counter = 0
    ncomp = 0
    for root in range(m):
        if index[root] != -1:
            continue
        call_v[0] = root
        call_p[0] = indptr[root]
        cp = 1
        index[root] = low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        on_stack[root] = True
        while cp > 0:
            v = call_v[cp - 1]
            p = call_p[cp - 1]
            if p < indptr[v + 1]:
                call_p[cp - 1] = p + 1
                w = adj[p]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    on_stack[w] = True
                    call_v[cp] = w
                    call_p[cp] = indptr[w]
                    cp += 1
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            else:
                cp -= 1
                if cp > 0:
                    u = call_v[cp - 1]
                    if low[v] < low[u]:
                        low[u] = low[v]
                if low[v] == index[v]:
                    while True:
                        sp -= 1
                        w = stack[sp]
                        on_stack[w] = False
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
    return comp, ncomp


@nb.njit(cache=True)
def _closure_counts(m, comp, ncomp, indptr, adj, rindptr, radj, forward):
    # full[c] = members of c plus everything reachable from c (forward) or
    # reaching c (backward); returns |full[c]| - |c| per vertex.
    words = (m + 63) // 64
    full = np.zeros((ncomp, words), dtype=np.uint64)
    size = np.zeros(ncomp, dtype=np.int64)
    cstart = np.zeros(ncomp + 1, dtype=np.int64)
    for v in range(m):
        cstart[comp[v] + 1] += 1
    for c in range(ncomp):
        cstart[c + 1] += cstart[c]
    members = np.empty(m, dtype=np.int64)
    fill = cstart[:-1].copy()
    for v in range(m):
        members[fill[comp[v]]] = v
        fill[comp[v]] += 1
    seen = np.full(ncomp, -1, dtype=np.int64)
    for step in range(ncomp):
        c = step if forward else ncomp - 1 - step
        row = full[c]
        for t in range(cstart[c], cstart[c + 1]):
            v = members[t]
            row[v >> 6] |= np.uint64(1) << np.uint64(v & 63)
        size[c] = cstart[c + 1] - cstart[c]
        for t in range(cstart[c], cstart[c + 1]):
            v = members[t]
            if forward:
                lo, hi, nbrs = indptr[v], indptr[v + 1], adj
            else:
                lo, hi, nbrs = rindptr[v], rindptr[v + 1], radj
            for p in range(lo, hi):
                c2 = comp[nbrs[p]]
                if c2 == c or seen[c2] == c:
                    continue
                seen[c2] = c
                other = full[c2]
                for w in range(words):
                    row[w] |= other[w]
    out = np.empty(m, dtype=np.int64)
    cnt = np.empty(ncomp, dtype=np.int64)
    for c in range(ncomp):
        s = 0
        for w in range(words):
            s += popcount64(full[c, w])
        cnt[c] = s - size[c]
    for v in range(m):
        out[v] = cnt[comp[v]]
    return out


def reachability_scores(m, src, dst):
    """R(v) = #vertices reaching v - #vertices reachable from v.

    Strongly connected components are collapsed first, so every vertex of a
    cycle gets the same score.
    """
    src = np.ascontiguousarray(src, dtype=np.int32)
    dst = np.ascontiguousarray(dst, dtype=np.int32)
    indptr, adj = _csr(m, src, dst)
    rindptr, radj = _csr(m, dst, src)
    comp, ncomp = _tarjan(m, indptr, adj)
    # Tarjan numbers sinks first, so ascending ids see successors done already
    reach_out = _closure_counts(m, comp, ncomp, indptr, adj, rindptr, radj, True)
    reach_in = _closure_counts(m, comp, ncomp, indptr, adj, rindptr, radj, False)
    return reach_in - reach_out, int(ncomp)


# --- driver -----------------------------------------------------------------

def oriented_edges(D, window):
    """Run the triple/anchor/saturation stages; returns (src, dst, anchor, |V0|)."""
    m = D.shape[0]
    indptr, idx, vals = flank_sets(D, window)
    margin = np.float32(3.0 * window.delta)
    floor = np.float32(2.0 * window.L - window.delta)
    middle = _middle_flags(D, indptr, idx, vals, margin, floor)
    free = np.flatnonzero(~middle)
    if free.size == 0:
        raise EmptyAnchorSet("every vertex is the middle of some triple; no endpoint anchor")
    anchor = int(free[0])
    far = D[anchor, free] > np.float32(window.U - window.delta)
    seeds = free[far].astype(np.int64)
    if seeds.size == 0:
        raise EmptyAnchorSet(
            f"anchor {anchor} has no never-middle partner farther than U - delta = "
            f"{window.U - window.delta:g}")
    src, dst = _saturate(D, indptr, idx, vals, seeds, margin, floor)
    return src, dst, anchor, int(seeds.size)


def recover_order(est, m=None, window=None):
    """Recover the vertex order (up to reflection) from a distance estimate.

    ``est`` is a DistanceEstimate or an already materialized dense matrix (in
    which case ``window`` is required). Ties in R are broken by vertex index.
    """
    window = window or est.window
    D = _estimate_matrix(est)
    m = D.shape[0] if m is None else m
    if m != D.shape[0]:
        raise ValueError(f"estimate covers {D.shape[0]} vertices, expected {m}")
    if m == 1:
        return OrderResult(np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64), 0, 0, 0, 1)
    src, dst, anchor, n_seeds = oriented_edges(D, window)
    scores, ncomp = reachability_scores(m, src, dst)
    order = np.lexsort((np.arange(m), scores)).astype(np.int64)
    return OrderResult(order, scores, anchor, int(src.shape[0]), n_seeds, ncomp)
