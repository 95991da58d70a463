"""Position recovery from a vertex order and the inversion / position-error metrics."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .model_core import PositionVector

INVERSION_CAP = 10_000_000
QUANTILES = (90.0, 95.0, 99.0)


class Orientation(enum.Enum):
    AS_IS = "AsIs"
    REFLECTED = "Reflected"


@dataclass(frozen=True)
class Percentiles:
    p90: float = 0.0
    p95: float = 0.0
    p99: float = 0.0
    max: float = 0.0

    def as_tuple(self):
        return (self.p90, self.p95, self.p99, self.max)


@dataclass(frozen=True)
class InversionReport:
    percentiles: Percentiles
    count: int
    orientation: Orientation
    sampled: bool = False


@dataclass(frozen=True)
class PositionErrorReport:
    percentiles: Percentiles
    count: int
    orientation: Orientation


@dataclass(frozen=True)
class EvalReport:
    inversion_distance_percentiles: Percentiles
    inversion_count: int
    position_error_percentiles: Percentiles
    orientation_used: Orientation

    @classmethod
    def combine(cls, inv, pos):
        return cls(inv.percentiles, inv.count, pos.percentiles, inv.orientation)

    def csv_rows(self, m):
        o = self.orientation_used.value
        return [
            ("inversion_distance", *self.inversion_distance_percentiles.as_tuple(), self.inversion_count, o),
            ("position_error", *self.position_error_percentiles.as_tuple(), m, o),
        ]


REPORT_HEADER = ("metric", "p90", "p95", "p99", "max", "count", "orientation")


def nearest_rank(values, q):
    """Nearest-rank percentile: the ceil(q/100 * N)-th smallest value."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return 0.0
    k = max(1, math.ceil(q / 100.0 * v.size))
    return float(np.partition(v, k - 1)[k - 1])


def percentiles(values):
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        return Percentiles()
    picks = [v[max(1, math.ceil(q / 100.0 * v.size)) - 1] for q in QUANTILES]
    return Percentiles(*(float(p) for p in picks), float(v[-1]))


# --- positions --------------------------------------------------------------

def _order_array(order):
    return np.asarray(getattr(order, "order", order), dtype=np.int64)


def recover_positions(order, n, m=None):
    """Spread the vertices evenly along the order: rank i (1-based) sits at i*n/m."""
    ordv = _order_array(order)
    m = ordv.shape[0] if m is None else m
    if ordv.shape[0] != m:
        raise ValueError(f"order covers {ordv.shape[0]} vertices, expected {m}")
    x = np.empty(m, dtype=np.float64)
    x[ordv] = np.arange(1, m + 1, dtype=np.float64) * (n / m) if m else 0.0
    return PositionVector(n, np.minimum(x, n))


# --- inversions -------------------------------------------------------------

@nb.njit(cache=True)
def _count_inversions(seq):
    # bottom-up merge sort; counts pairs p < q with seq[p] > seq[q]
    a = seq.copy()
    buf = np.empty_like(a)
    m = a.shape[0]
    total = 0
    width = 1
    while width < m:
        for lo in range(0, m, 2 * width):
            mid = min(lo + width, m)
            hi = min(lo + 2 * width, m)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if a[i] <= a[j]:
                    buf[k] = a[i]
                    i += 1
                else:
                    buf[k] = a[j]
                    total += mid - i
                    j += 1
                k += 1
            while i < mid:
                buf[k] = a[i]
                i += 1
                k += 1
            while j < hi:
                buf[k] = a[j]
                j += 1
                k += 1
        a, buf = buf, a
        width *= 2
    return total


@nb.njit(cache=True)
def _collect_inversions(xs, seq, picks, out):
    # walk all inverted pairs in a fixed order; keep those whose running
    # index appears in the sorted ``picks`` (all of them when picks is empty)
    m = seq.shape[0]
    t = 0
    w = 0
    take_all = picks.shape[0] == 0
    for q in range(m):
        sq = seq[q]
        for p in range(q):
            if seq[p] > sq and xs[p] < xs[q]:
                if take_all:
                    out[w] = xs[q] - xs[p]
                    w += 1
                elif w < picks.shape[0] and picks[w] == t:
                    out[w] = xs[q] - xs[p]
                    w += 1
                t += 1
    return w


def _oriented_sequence(x, ranks, reflected):
    # truth order with ties broken so tied pairs never count as inverted
    r = -ranks if reflected else ranks
    by_truth = np.lexsort((r, x))
    return x[by_truth], r[by_truth]


def inversion_report(truth, order, cap=INVERSION_CAP, seed=0):
    """Distances between truly ordered pairs that the recovered order inverts.

    The orientation (as is, or reflected) with fewer inversions is used; ties
    go to as-is. When more than ``cap`` pairs are inverted, the percentiles
    are taken over a uniform sample of ``cap`` of them drawn with ``seed``.
    """
    x = np.asarray(truth.positions, dtype=np.float64)
    ordv = _order_array(order)
    if ordv.shape[0] != x.shape[0]:
        raise ValueError(f"order covers {ordv.shape[0]} vertices but truth has {x.shape[0]}")
    ranks = np.empty_like(ordv)
    ranks[ordv] = np.arange(ordv.shape[0])
    best = None
    for orient in (Orientation.AS_IS, Orientation.REFLECTED):
        xs, seq = _oriented_sequence(x, ranks, orient is Orientation.REFLECTED)
        count = int(_count_inversions(seq))
        if best is None or count < best[0]:
            best = (count, orient, xs, seq)
    count, orient, xs, seq = best
    if count == 0:
        return InversionReport(Percentiles(), 0, orient)
    sampled = count > cap
    if sampled:
        rng = np.random.default_rng(seed)
        picks = np.sort(rng.choice(count, size=cap, replace=False)).astype(np.int64)
    else:
        picks = np.empty(0, dtype=np.int64)
    out = np.empty(cap if sampled else count, dtype=np.float64)
    w = _collect_inversions(xs, seq, picks, out)
    return InversionReport(percentiles(out[:w]), count, orient, sampled)


def position_error_report(truth, recovered, orientation=Orientation.AS_IS):
    """Percentiles of |x_hat - x|; a reflected orientation compares against n - x_hat."""
    x = np.asarray(truth.positions, dtype=np.float64)
    xh = np.asarray(recovered.positions, dtype=np.float64)
    if x.shape != xh.shape:
        raise ValueError(f"truth has {x.shape[0]} vertices, recovered has {xh.shape[0]}")
    if Orientation(orientation) is Orientation.REFLECTED:
        xh = recovered.n - xh
    return PositionErrorReport(percentiles(np.abs(xh - x)), x.shape[0], Orientation(orientation))


def evaluate(truth, order, n=None, cap=INVERSION_CAP):
    """Both reports for one recovered order; positions come from recover_positions."""
    n = truth.n if n is None else n
    inv = inversion_report(truth, order, cap=cap)
    pos = position_error_report(truth, recover_positions(order, n, truth.m), inv.orientation)
    return EvalReport.combine(inv, pos)
