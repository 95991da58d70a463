"""Distinguishing two order-preserving position vectors from one sampled graph.

Exponential decay with c = 1 throughout. The statistic L is the exact
log-likelihood ratio log P_X(G) - log P_Y(G); its expectation under X is the
KL divergence between the two graph distributions and has a closed form per
vertex pair.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import _rng
from .errors import DomainError
from .math_kernels import _log1m_exp_neg
from .model_core import Decay, ModelParams, PositionVector, sample_graph, sample_positions

LB_CONSTANT = 0.05


class Hypothesis(enum.Enum):
    FROM_X = "FromX"
    FROM_Y = "FromY"


@dataclass(frozen=True)
class HypothesisPair:
    X: PositionVector
    Y: PositionVector
    delta: float

    def __post_init__(self):
        x, y = self.X.positions, self.Y.positions
        if x.shape != y.shape or self.X.n != self.Y.n:
            raise DomainError("X and Y must have the same m and n")
        if x.size > 1:
            dx, dy = np.diff(x), np.diff(y)
            if np.any(dx < 0):
                raise DomainError("X must be sorted ascending")
            if np.any(np.sign(dx) != np.sign(dy)):
                raise DomainError("Y does not preserve the vertex order of X")

    @property
    def m(self):
        return self.X.m

    @property
    def n(self):
        return self.X.n

    def is_far(self):
        if self.m == 0:
            return False
        return bool(np.max(np.abs(self.X.positions - self.Y.positions)) > self.delta)

    def dprime(self, i, j):
        x, y = self.X.positions, self.Y.positions
        return abs(abs(x[i] - x[j]) - abs(y[i] - y[j]))


def construct_scaled(X, delta):
    """The shrunk copy y_i = (1 - 2 delta / n) x_i."""
    if not 0 <= delta < X.n / 2:
        raise DomainError(f"delta must lie in [0, n/2), got {delta}")
    x = X.positions
    if x.size > 1 and np.any(np.diff(x) < 0):
        raise DomainError("X must be sorted ascending")
    return HypothesisPair(X, PositionVector(X.n, (1.0 - 2.0 * delta / X.n) * x), delta)


def perturb_monotone(X, seed, spread=0.5):
    """A random order-preserving Y: each gap of X is rescaled by U(1-spread, 1+spread).

    The result is shrunk back onto [0, n] if it overshoots.
    """
    rng = np.random.default_rng(seed)
    x = X.positions
    if x.size == 0:
        return HypothesisPair(X, X, 0.0)
    gaps = np.diff(x) * rng.uniform(1 - spread, 1 + spread, x.size - 1)
    y = x[0] * rng.uniform(1 - spread, 1 + spread) + np.concatenate(([0.0], np.cumsum(gaps)))
    if y[-1] > X.n:
        y *= X.n / y[-1]
    return HypothesisPair(X, PositionVector(X.n, y), float(np.max(np.abs(x - y))))


# --- the statistic ----------------------------------------------------------

@nb.njit(cache=True)
def _l_term(dx, dy, present):
    if dx == dy:
        return 0.0
    if present:
        return dy - dx
    if dx == 0.0:
        return -math.inf
    if dy == 0.0:
        return math.inf
    return _log1m_exp_neg(dx) - _log1m_exp_neg(dy)


def pair_l_term(d_x, d_y, edge_present):
    """log P_X - log P_Y for one vertex pair, exponential decay with c = 1."""
    if not (d_x > 0 and d_y > 0):
        raise DomainError(f"distances must be positive, got {d_x!r}, {d_y!r}")
    return float(_l_term(float(d_x), float(d_y), bool(edge_present)))


@nb.njit(cache=True, parallel=True)
def _l_rows(x, y, indptr, indices):
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
            s += _l_term(abs(x[i] - x[j]), abs(y[i] - y[j]), present)
        rows[i] = s
    return rows


def l_statistic(pair, G):
    """L = log P_X(G) - log P_Y(G), summed pair by pair."""
    if G.m != pair.m:
        raise DomainError(f"graph has {G.m} vertices, pair has {pair.m}")
    if pair.m < 2:
        return 0.0
    rows = _l_rows(pair.X.positions, pair.Y.positions, G.indptr, G.indices)
    return float(math.fsum(rows))


@nb.njit(cache=True)
def _kl_term(dx, dy):
    # KL(Bern(p) || Bern(q)) with p = e^-dx, q = e^-dy; the non-edge log ratio
    # log((1-p)/(1-q)) = log1p((q-p)/(1-q)) avoids subtracting two close logs
    if dx == dy:
        return 0.0
    p = math.exp(-dx)
    q_minus_p = -math.exp(-dy) * math.expm1(dy - dx)
    term = p * (dy - dx) + (1.0 - p) * math.log1p(q_minus_p / -math.expm1(-dy))
    # exact value is >= 0; rounding can leave a few ulps below zero
    return term if term > 0.0 else 0.0


@nb.njit(cache=True, parallel=True)
def _kl_rows(x, y):
    m = x.shape[0]
    rows = np.zeros(m, dtype=np.float64)
    for i in nb.prange(m):
        s = 0.0
        for j in range(i + 1, m):
            s += _kl_term(abs(x[i] - x[j]), abs(y[i] - y[j]))
        rows[i] = s
    return rows


def expected_l(pair):
    """E_{G ~ X}[L], the exact KL divergence KL(P_X || P_Y)."""
    x, y = pair.X.positions, pair.Y.positions
    if pair.m < 2:
        return 0.0
    if np.any(np.diff(np.sort(x)) == 0) or np.any(np.diff(np.sort(y)) == 0):
        raise DomainError("coincident points make the KL divergence infinite")
    return float(math.fsum(_kl_rows(x, y)))


def pair_expected_l(d_x, d_y):
    """Closed-form E[L_ij] for one pair with x-distance d_x and y-distance d_y."""
    if not (d_x > 0 and d_y > 0):
        raise DomainError(f"distances must be positive, got {d_x!r}, {d_y!r}")
    return float(_kl_term(float(d_x), float(d_y)))


def check_dprime_triangle(pair, samples=100_000, seed=0, exhaustive_max=100):
    """d'_ij <= d'_ik + d'_kj on every triple (m small) or on random triples."""
    x, y = pair.X.positions, pair.Y.positions
    m = pair.m
    if m < 3:
        return True
    if m <= exhaustive_max:
        i, j, k = (a.ravel() for a in np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij"))
    else:
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, m, size=(3, samples))

    def dp(a, b):
        return np.abs(np.abs(x[a] - x[b]) - np.abs(y[a] - y[b]))

    tol = 1e-12 * max(1.0, pair.n)
    return bool(np.all(dp(i, j) <= dp(i, k) + dp(k, j) + tol))


# --- Monte Carlo trials -----------------------------------------------------

@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    truth: Hypothesis
    L_value: float
    expected_l: float
    tester_choice: Hypothesis

    @property
    def correct(self):
        return self.truth is self.tester_choice


@dataclass(frozen=True)
class DistinguishSummary:
    n: float
    m: int
    delta: float
    trials: int
    error_rate: float
    mean_expected_l: float
    regime: str
    outcomes: list = field(default_factory=list, repr=False)


def regime_label(n, m, delta):
    """Where m sits relative to 0.05 n^1.5/delta and n^1.5 log n/delta."""
    if delta <= 0:
        return "null"
    lb = LB_CONSTANT * n ** 1.5 / delta
    ub = n ** 1.5 * math.log(n) / delta
    if m < lb:
        return "below_lb"
    if m > ub:
        return "above_ub"
    return "gap"


def _distinct_sorted_positions(m, params, seed):
    for attempt in range(1000):
        x = np.sort(sample_positions(m, params, _rng.derive_seed(seed, attempt)).positions)
        if m < 2 or np.all(np.diff(x) > 0):
            return PositionVector(params.n, x)
    raise RuntimeError("could not draw distinct positions")


def run_distinguish_trials(n, m, delta, trials, seed, fixed_x=False, truth=None):
    """Monte Carlo probe of the likelihood-ratio tester on the scaled pair.

    Each trial draws X (fresh unless ``fixed_x``), builds Y = construct_scaled,
    picks the truth by a fair coin (or forces ``truth``), samples G from it and
    lets the tester answer FromX iff L >= 0.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    params = ModelParams(n, 1.0, Decay.EXPONENTIAL)
    forced = None if truth is None else Hypothesis(truth)
    outcomes = []
    shared = _distinct_sorted_positions(m, params, _rng.derive_seed(seed, 0, 0)) if fixed_x else None
    for t in range(trials):
        X = shared if fixed_x else _distinct_sorted_positions(m, params, _rng.derive_seed(seed, t, 0))
        pair = construct_scaled(X, delta)
        if forced is None:
            coin = _rng.key_uniform(np.uint64(seed), _rng.STREAM_TRIAL, np.uint64(t), np.uint64(1))
            z = Hypothesis.FROM_X if coin < 0.5 else Hypothesis.FROM_Y
        else:
            z = forced
        G = sample_graph(pair.X if z is Hypothesis.FROM_X else pair.Y, params, _rng.derive_seed(seed, t, 1))
        L = l_statistic(pair, G)
        choice = Hypothesis.FROM_X if L >= 0 else Hypothesis.FROM_Y
        outcomes.append(TrialOutcome(t, z, L, expected_l(pair), choice))
    errors = sum(not o.correct for o in outcomes)
    mean_el = math.fsum(o.expected_l for o in outcomes) / trials
    return DistinguishSummary(n, m, delta, trials, errors / trials, mean_el,
                              regime_label(n, m, delta), outcomes)
