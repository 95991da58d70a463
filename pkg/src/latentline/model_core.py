"""Latent line model: parameters, sampling, likelihood and closed-form densities."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import _rng
from .errors import DomainError
from .math_kernels import _g_log, _h_lin, _log1m_exp_neg


class Decay(enum.Enum):
    EXPONENTIAL = "exp"
    LINEAR = "lin"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for member in cls:
            if value in (member.value, member.name, member.name.lower()):
                return member
        raise DomainError(f"unknown decay {value!r}; expected 'exp' or 'lin'")

    @property
    def code(self):
        return 0 if self is Decay.EXPONENTIAL else 1


@dataclass(frozen=True)
class ModelParams:
    n: float
    c: float = 1.0
    decay: Decay = Decay.EXPONENTIAL
    delta: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "decay", Decay.parse(self.decay))
        for name in ("n", "c", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not self.n > 0:
            raise DomainError(f"segment length n must be > 0, got {self.n}")
        if not 0 < self.c <= 1:
            raise DomainError(f"edge constant c must satisfy 0 < c <= 1, got {self.c}")
        if not 0 < self.delta < 0.1:
            raise DomainError(f"precision delta must satisfy 0 < delta < 0.1, got {self.delta}")


@dataclass(frozen=True)
class PositionVector:
    n: float
    positions: np.ndarray

    def __post_init__(self):
        x = np.array(self.positions, dtype=np.float64)
        if x.ndim != 1:
            raise DomainError("positions must be one-dimensional")
        if x.size and (not np.all(np.isfinite(x)) or x.min() < 0 or x.max() > self.n):
            raise DomainError(f"every position must lie in [0, {self.n}]")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)

    @property
    def m(self):
        return self.positions.shape[0]

    def __len__(self):
        return self.m

    def __getitem__(self, i):
        return self.positions[i]


class RandomGraph:
    """Immutable simple undirected graph stored as sorted CSR neighbor lists."""

    def __init__(self, m, indptr, indices):
        self.m = int(m)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        if self.indptr.shape[0] != self.m + 1:
            raise ValueError("indptr must have m + 1 entries")
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        self._bits = None

    @classmethod
    def from_edges(cls, m, edges):
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= m:
                raise IndexError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        key = np.unique(lo * m + hi)
        lo, hi = key // m, key % m
        both_src = np.concatenate([lo, hi])
        both_dst = np.concatenate([hi, lo])
        order = np.lexsort((both_dst, both_src))
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(both_src, minlength=m), out=indptr[1:])
        return cls(m, indptr, both_dst[order])

    @property
    def degrees(self):
        return np.diff(self.indptr)

    @property
    def edge_count(self):
        return int(self.indices.shape[0] // 2)

    def neighbors(self, i):
        if not 0 <= i < self.m:
            raise IndexError(f"vertex {i} out of range [0, {self.m})")
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edges(self):
        """(E, 2) array of pairs i < j in lexicographic order."""
        src = np.repeat(np.arange(self.m, dtype=np.int64), self.degrees)
        dst = self.indices.astype(np.int64)
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    def has_edge(self, i, j):
        nb_i = self.neighbors(i)
        k = np.searchsorted(nb_i, j)
        return bool(k < nb_i.shape[0] and nb_i[k] == j)

    def bitset(self):
        """Packed adjacency rows (m x ceil(m/64) uint64), built on first use."""
        if self._bits is None:
            self._bits = _pack_bits(self.m, self.indptr, self.indices)
            self._bits.setflags(write=False)
        return self._bits

    def __eq__(self, other):
        return (isinstance(other, RandomGraph) and self.m == other.m
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __repr__(self):
        return f"RandomGraph(m={self.m}, edges={self.edge_count})"


@nb.njit(cache=True)
def _pack_bits(m, indptr, indices):
    words = (m + 63) // 64
    bits = np.zeros((m, words), dtype=np.uint64)
    for i in range(m):
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            bits[i, k >> 6] |= np.uint64(1) << np.uint64(k & 63)
    return bits


# --- sampling ---------------------------------------------------------------

@nb.njit(cache=True, parallel=True)
def _sample_uniform(seed, m, n):
    out = np.empty(m, dtype=np.float64)
    for i in nb.prange(m):
        out[i] = n * _rng.key_uniform(seed, _rng.STREAM_POSITIONS, np.uint64(i), np.uint64(0))
    return out


def sample_positions(m, params, seed):
    """m i.i.d. uniform points on [0, n]; point i depends only on (seed, i)."""
    if m < 0:
        raise DomainError("m must be non-negative")
    return PositionVector(params.n, _sample_uniform(np.uint64(seed), int(m), float(params.n)))


@nb.njit(cache=True)
def _edge_p(decay, c, d):
    if decay == 0:
        return c * math.exp(-d)
    return c / (d + 1.0)


def edge_probability(params, d):
    if not math.isfinite(d) or d < 0:
        raise DomainError(f"distance must be finite and non-negative, got {d!r}")
    return _edge_p(params.decay.code, params.c, float(d))


@nb.njit(cache=True, parallel=True)
def _count_upper(x, decay, c, seed, cut, order, lo_rank, hi_rank):
    m = x.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    for i in nb.prange(m):
        k = 0
        if cut < 0:
            for j in range(i + 1, m):
                p = _edge_p(decay, c, abs(x[i] - x[j]))
                if _rng.key_uniform(seed, _rng.STREAM_EDGES, np.uint64(i), np.uint64(j)) < p:
                    k += 1
        else:
            for r in range(lo_rank[i], hi_rank[i]):
                j = order[r]
                if j <= i:
                    continue
                d = abs(x[i] - x[j])
                if d > cut:
                    continue
                if _rng.key_uniform(seed, _rng.STREAM_EDGES, np.uint64(i), np.uint64(j)) < _edge_p(decay, c, d):
                    k += 1
        counts[i] = k
    return counts


@nb.njit(cache=True, parallel=True)
def _fill_upper(x, decay, c, seed, cut, order, lo_rank, hi_rank, uptr, out):
    m = x.shape[0]
    for i in nb.prange(m):
        p0 = uptr[i]
        if cut < 0:
            for j in range(i + 1, m):
                p = _edge_p(decay, c, abs(x[i] - x[j]))
                if _rng.key_uniform(seed, _rng.STREAM_EDGES, np.uint64(i), np.uint64(j)) < p:
                    out[p0] = j
                    p0 += 1
        else:
            start = p0
            for r in range(lo_rank[i], hi_rank[i]):
                j = order[r]
                if j <= i:
                    continue
                d = abs(x[i] - x[j])
                if d > cut:
                    continue
                if _rng.key_uniform(seed, _rng.STREAM_EDGES, np.uint64(i), np.uint64(j)) < _edge_p(decay, c, d):
                    out[p0] = j
                    p0 += 1
            out[start:p0].sort()


@nb.njit(cache=True)
def _symmetrize(m, uptr, upper):
    deg = np.zeros(m, dtype=np.int64)
    for i in range(m):
        deg[i] += uptr[i + 1] - uptr[i]
        for p in range(uptr[i], uptr[i + 1]):
            deg[upper[p]] += 1
    indptr = np.zeros(m + 1, dtype=np.int64)
    for i in range(m):
        indptr[i + 1] = indptr[i] + deg[i]
    fill = indptr[:-1].copy()
    indices = np.empty(indptr[m], dtype=np.int32)
    # rows are visited in ascending order, so every list comes out sorted
    for i in range(m):
        for p in range(uptr[i], uptr[i + 1]):
            j = upper[p]
            indices[fill[i]] = j
            fill[i] += 1
            indices[fill[j]] = i
            fill[j] += 1
    return indptr, indices


def cutoff_distance(params, threshold=1e-15):
    """Distance past which an exponential-model edge has probability < threshold."""
    if params.decay is not Decay.EXPONENTIAL:
        raise DomainError("the probability cutoff is only defined for the exponential model")
    return max(0.0, math.log(params.c / threshold))


def sample_graph(X, params, seed, cutoff=False):
    """Draw each pair {i, j} independently with its edge probability.

    The Bernoulli draw for {i, j} is keyed by (seed, i, j), so the result does
    not depend on how the pair loop is partitioned. With ``cutoff`` set
    (exponential model only) pairs with probability below 1e-15 are skipped;
    this is an approximation and off by default.
    """
    x = np.ascontiguousarray(X.positions, dtype=np.float64)
    m = x.shape[0]
    seed = np.uint64(seed)
    if cutoff:
        cut = cutoff_distance(params)
        order = np.argsort(x, kind="stable").astype(np.int64)
        xs = x[order]
        lo_rank = np.searchsorted(xs, x - cut, side="left").astype(np.int64)
        hi_rank = np.searchsorted(xs, x + cut, side="right").astype(np.int64)
    else:
        cut = -1.0
        order = lo_rank = hi_rank = np.zeros(1, dtype=np.int64)
    args = (x, params.decay.code, float(params.c), seed, cut, order, lo_rank, hi_rank)
    counts = _count_upper(*args)
    uptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(counts, out=uptr[1:])
    upper = np.empty(uptr[-1], dtype=np.int32)
    _fill_upper(*args, uptr, upper)
    indptr, indices = _symmetrize(m, uptr, upper)
    return RandomGraph(m, indptr, indices)


# --- likelihood -------------------------------------------------------------

@nb.njit(cache=True)
def _pair_loglik(decay, c, d, present):
    p = _edge_p(decay, c, d)
    if present:
        return math.log(p) if p > 0.0 else -math.inf
    if decay == 0 and c == 1.0:
        if d == 0.0:
            return -math.inf
        return _log1m_exp_neg(d)
    if p >= 1.0:
        return -math.inf
    return math.log1p(-p)


@nb.njit(cache=True, parallel=True)
def _loglik_rows(x, decay, c, indptr, indices):
    m = x.shape[0]
    rows = np.zeros(m, dtype=np.float64)
    for i in nb.prange(m):
        s = 0.0
        p = indptr[i]
        end = indptr[i + 1]
        while p < end and indices[p] <= i:
            p += 1
        for j in range(i + 1, m):
            present = p < end and indices[p] == j
            if present:
                p += 1
            s += _pair_loglik(decay, c, abs(x[i] - x[j]), present)
        rows[i] = s
    return rows


def log_likelihood(X, G, params):
    """log P_X(G); -inf (not an exception) for zero-probability configurations."""
    if G.m != X.m:
        raise DomainError(f"graph has {G.m} vertices but X has {X.m}")
    if X.m < 2:
        return 0.0
    rows = _loglik_rows(np.ascontiguousarray(X.positions), params.decay.code, float(params.c),
                        G.indptr, G.indices)
    return float(math.fsum(rows))


# --- closed-form densities --------------------------------------------------

def _check_on_segment(n, *xs):
    for x in xs:
        if not (math.isfinite(x) and 0 <= x <= n):
            raise DomainError(f"position {x!r} is off the segment [0, {n}]")


def expected_degree_density(params, x):
    """Probability that one uniform point on [0, n] is adjacent to a vertex at x."""
    n, c = params.n, params.c
    _check_on_segment(n, x)
    if params.decay is Decay.EXPONENTIAL:
        return c * (2.0 - math.exp(-x) - math.exp(x - n)) / n
    return c * (math.log1p(x) + math.log1p(n - x)) / n


def expected_common_density(params, x_i, x_j):
    """Probability that one uniform point on [0, n] is adjacent to both x_i and x_j."""
    n, c = params.n, params.c
    _check_on_segment(n, x_i, x_j)
    a, b = min(x_i, x_j), max(x_i, x_j)
    d = b - a
    if params.decay is Decay.EXPONENTIAL:
        return c * c / n * ((d + 1.0) * math.exp(-d) - 0.5 * (math.exp(-a - b) + math.exp(a + b - 2.0 * n)))
    return c * c / n * (_h_lin(d) - _g_log(a + 1.0, b + 1.0) - _g_log(n - a + 1.0, n - b + 1.0))
