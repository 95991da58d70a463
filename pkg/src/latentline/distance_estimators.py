"""(L, U, delta)-approximate pairwise distances from graph statistics.

Three backends share one interface: the exact oracle (ground truth, for
isolating the order-recovery step), the exponential-decay estimator and the
linear-decay estimator. ``query`` evaluates one pair lazily and memoizes it;
``matrix`` evaluates every pair in bulk with the common-neighbor counts taken
from packed adjacency rows.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from ._bits import popcount64
from .errors import DomainError
from .graph_stats import TILE, common_neighbors
from .math_kernels import EXP_WINDOW, LIN_WINDOW, _g_log, _invert_g_exp, _invert_h_lin
from .model_core import Decay

TAU_SAME = 0.1
# a same-side pair within 2.5 keeps at least (d + 1/2) e^-d of common density even at an
# end of the segment; below this the pair is beyond the window however it sits
EXP_FAR_GATE = 3.0 * math.exp(-2.5)


class EstimateKind(enum.Enum):
    EXACT = "exact"
    EXPONENTIAL = "exp"
    LINEAR = "lin"


@dataclass(frozen=True)
class DistanceWindow:
    L: float
    U: float
    delta: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.L, self.U, self.delta)) or self.delta <= 0:
            raise DomainError(f"invalid window {self}")

    @property
    def flank_lo(self):
        return self.L + self.delta

    @property
    def flank_hi(self):
        return 2.0 * self.L + 7.0 * self.delta

    def check(self, n):
        """Raise unless 3d < L < n/2 - 2d and U > 2L + 8d."""
        L, U, d = self.L, self.U, self.delta
        if not 3 * d < L < n / 2 - 2 * d:
            raise DomainError(f"window needs 3*delta < L < n/2 - 2*delta (n={n}): {self}")
        if not U > 2 * L + 8 * d:
            raise DomainError(f"window needs U > 2L + 8*delta: {self}")
        return self


def exp_window(delta):
    return DistanceWindow(EXP_WINDOW.lo, EXP_WINDOW.hi, delta)


def lin_window(delta):
    return DistanceWindow(0.5, 2.0, delta)


# --- per-pair rules ---------------------------------------------------------

@nb.njit(cache=True)
def _exp_pair(cnt, deg_i, deg_j, n, c, m):
    if cnt <= 0.0 or m < 3:
        return n
    w = cnt * n / (c * c * (m - 2))
    if w < EXP_FAR_GATE:
        # the degree product also carries opposite-end cross terms, so skip the correction
        return _invert_g_exp(w, 0.3, 2.5)
    h_i = 2.0 - deg_i * n / (c * (m - 1))
    h_j = 2.0 - deg_j * n / (c * (m - 1))
    # the boundary loss in w is half the product of the degree deficits, so add it back
    return _invert_g_exp(w + 0.5 * h_i * h_j, 0.3, 2.5)


@nb.njit(cache=True)
def _endpoint_lin(deg, n, c, m):
    if m < 2:
        return 0.0
    a = deg * n / (c * (m - 1))
    return max(0.0, math.exp(a - math.log(n)) - 1.0)


@nb.njit(cache=True)
def _lin_pair(cnt, xh_i, xh_j, n, c, m, eps, tau):
    if m < 3:
        return n
    a = cnt * n / (c * c * (m - 2))
    lo = min(xh_i, xh_j)
    hi = max(xh_i, xh_j)
    if lo >= 1.0 / eps:
        return _invert_h_lin(a, 0.3, 2.0)
    if hi > 2.0 / eps + 1.0 and lo < 1.0 / eps:
        return n
    if a < tau:
        return n
    if hi <= 8.0:
        return abs(xh_i - xh_j)
    if hi >= 8.0 and lo <= 5.0:
        return n
    return _invert_h_lin(a + _g_log(xh_i + 1.0, xh_j + 1.0), 0.3, 2.0)


@nb.njit(cache=True, parallel=True)
def _bulk_matrix(bits, kind, stat, n, c, m, eps, tau):
    # kind 1: exponential (stat = degrees), kind 2: linear (stat = endpoint estimates)
    size, words = bits.shape
    out = np.zeros((size, size), dtype=np.float32)
    nblocks = (size + TILE - 1) // TILE
    for blk in nb.prange(nblocks):
        i0 = blk * TILE
        i1 = min(i0 + TILE, size)
        for j in range(i0 + 1, size):
            b = bits[j]
            for i in range(i0, min(i1, j)):
                a = bits[i]
                s = 0
                for w in range(words):
                    s += popcount64(a[w] & b[w])
                if kind == 1:
                    d = _exp_pair(float(s), stat[i], stat[j], n, c, m)
                else:
                    d = _lin_pair(float(s), stat[i], stat[j], n, c, m, eps, tau)
                out[i, j] = d
                out[j, i] = d
    return out


@nb.njit(cache=True, parallel=True)
def _abs_diff_matrix(x):
    m = x.shape[0]
    out = np.empty((m, m), dtype=np.float32)
    for i in nb.prange(m):
        for j in range(m):
            out[i, j] = abs(x[i] - x[j])
    return out


# --- estimate objects -------------------------------------------------------

class DistanceEstimate:
    """Symmetric, non-negative distance function d(i, j) over m vertices."""

    kind: EstimateKind

    def __init__(self, m, n, window):
        self.m = int(m)
        self.n = float(n)
        self.window = window
        self.sentinel = float(n)
        self._memo = {}

    def _pair(self, i, j):
        raise NotImplementedError

    def query(self, i, j):
        if not (0 <= i < self.m and 0 <= j < self.m):
            raise IndexError(f"pair ({i}, {j}) out of range for m={self.m}")
        if i == j:
            return 0.0
        key = (i, j) if i < j else (j, i)
        val = self._memo.get(key)
        if val is None:
            val = float(self._pair(*key))
            self._memo.setdefault(key, val)
        return val

    __call__ = query

    def matrix(self):
        """Dense float32 (m x m) matrix of every pairwise estimate."""
        out = np.zeros((self.m, self.m), dtype=np.float32)
        for i in range(self.m):
            for j in range(i + 1, self.m):
                out[i, j] = out[j, i] = self.query(i, j)
        return out

    def computed(self):
        """Memoized (i, j, d_hat) triples, sorted by pair."""
        return sorted((i, j, v) for (i, j), v in self._memo.items())


class ExactOracle(DistanceEstimate):
    kind = EstimateKind.EXACT

    def __init__(self, X, window):
        super().__init__(X.m, X.n, window)
        self.x = np.ascontiguousarray(X.positions, dtype=np.float64)

    def _pair(self, i, j):
        return abs(self.x[i] - self.x[j])

    def matrix(self):
        return _abs_diff_matrix(self.x)


class ExponentialEstimate(DistanceEstimate):
    """Exponential-decay estimator.

    A pair with no common neighbor is reported as far (the sentinel n).
    Otherwise the normalized common count, minus the product of the two
    boundary-loss estimates taken from the degrees, estimates (d+1)e^{-d},
    which is inverted on [0.3, 2.5].
    """

    kind = EstimateKind.EXPONENTIAL

    def __init__(self, degrees, common, params, m, graph=None, window=None):
        super().__init__(m, params.n, window or exp_window(params.delta))
        self.params = params
        self.degrees = np.asarray(degrees, dtype=np.float64)
        self.common = common
        self.graph = graph

    def _pair(self, i, j):
        p = self.params
        return _exp_pair(float(self.common(i, j)), self.degrees[i], self.degrees[j],
                         p.n, p.c, self.m)

    def matrix(self):
        if self.graph is None:
            return super().matrix()
        p = self.params
        return _bulk_matrix(self.graph.bitset(), 1, self.degrees, float(p.n), float(p.c),
                            self.m, 0.0, 0.0)


class LinearEstimate(DistanceEstimate):
    """Linear-decay estimator: endpoint estimates plus a decision cascade."""

    kind = EstimateKind.LINEAR

    def __init__(self, degrees, common, params, m, graph=None, window=None, tau_same=TAU_SAME):
        super().__init__(m, params.n, window or lin_window(params.delta))
        self.params = params
        self.eps = params.delta / 20.0
        self.tau_same = float(tau_same)
        self.degrees = np.asarray(degrees, dtype=np.float64)
        self.endpoints = np.array([_endpoint_lin(d, params.n, params.c, self.m) for d in self.degrees])
        self.common = common
        self.graph = graph

    def _pair(self, i, j):
        p = self.params
        return _lin_pair(float(self.common(i, j)), self.endpoints[i], self.endpoints[j],
                         p.n, p.c, self.m, self.eps, self.tau_same)

    def matrix(self):
        if self.graph is None:
            return super().matrix()
        p = self.params
        return _bulk_matrix(self.graph.bitset(), 2, self.endpoints, float(p.n), float(p.c),
                            self.m, self.eps, self.tau_same)


def exact_oracle(X, window):
    return ExactOracle(X, window)


def _graph_common(G):
    return lambda i, j: common_neighbors(G, i, j)


def estimate_exp(G, params, m=None, window=None):
    if params.decay is not Decay.EXPONENTIAL:
        raise DomainError("estimate_exp needs exponential-model parameters")
    m = G.m if m is None else m
    return ExponentialEstimate(G.degrees, _graph_common(G), params, m, graph=G, window=window)


def estimate_endpoint_lin(G, i, params, m=None):
    """Estimate of min(x_i, n - x_i) from the degree of i, floored at 0."""
    m = G.m if m is None else m
    return float(_endpoint_lin(float(G.neighbors(i).shape[0]), params.n, params.c, m))


def estimate_lin(G, params, m=None, window=None, tau_same=TAU_SAME):
    if params.decay is not Decay.LINEAR:
        raise DomainError("estimate_lin needs linear-model parameters")
    m = G.m if m is None else m
    return LinearEstimate(G.degrees, _graph_common(G), params, m, graph=G, window=window,
                          tau_same=tau_same)


def estimate_for(G, params, window=None, tau_same=TAU_SAME):
    """Model-matched estimator for ``params.decay``."""
    if params.decay is Decay.EXPONENTIAL:
        return estimate_exp(G, params, window=window)
    return estimate_lin(G, params, window=window, tau_same=tau_same)


def write_csv(path, rows, config=None):
    """Write (i, j, d_hat) rows as CSV with header ``i,j,d_hat``."""
    with open(path, "w") as fh:
        for k, v in (config or {}).items():
            fh.write(f"# {k}={v}\n")
        fh.write("i,j,d_hat\n")
        for i, j, v in rows:
            fh.write(f"{int(i)},{int(j)},{float(v)!r}\n")


def matrix_rows(D, below=None):
    """Upper-triangle (i, j, d_hat) rows of a dense estimate, row by row.

    With ``below`` set only values strictly under it are kept (e.g. the
    sentinel n to drop pairs reported as far).
    """
    m = D.shape[0]
    for i in range(m - 1):
        vals = D[i, i + 1:].astype(np.float64)
        js = np.arange(i + 1, m)
        if below is not None:
            keep = vals < below
            js, vals = js[keep], vals[keep]
        yield from zip([i] * js.shape[0], js.tolist(), vals.tolist())
