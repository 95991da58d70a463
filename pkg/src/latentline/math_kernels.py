"""Scalar kernels behind the distance estimators.

The jitted ``_*`` functions are what the bulk kernels call; the public
wrappers add argument checking and accept numpy arrays where it makes sense.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import DomainError

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"interval bounds must be finite: {self}")
        if not self.lo < self.hi:
            raise DomainError(f"interval needs lo < hi: {self}")


EXP_WINDOW = Interval(0.3, 2.5)
LIN_WINDOW = Interval(0.3, 2.0)


# --- jitted cores -----------------------------------------------------------

@nb.njit(cache=True)
def _g_exp(d):
    return (d + 1.0) * math.exp(-d)


@nb.njit(cache=True)
def _g_exp_prime(d):
    return -d * math.exp(-d)


@nb.njit(cache=True)
def _h_lin(d):
    if d == 0.0:
        return 2.0
    return math.log1p(d) * (2.0 / d + 2.0 / (d + 2.0))


@nb.njit(cache=True)
def _h_lin_prime(d):
    s = 2.0 / d + 2.0 / (d + 2.0)
    ds = -2.0 / (d * d) - 2.0 / ((d + 2.0) * (d + 2.0))
    return s / (d + 1.0) + math.log1p(d) * ds


@nb.njit(cache=True)
def _g_log(a, b):
    if a == b:
        return 1.0 / a
    return math.log1p((b - a) / a) / (b - a)


@nb.njit(cache=True)
def _log1m_exp_neg(d):
    if d <= 0.6931471805599453:
        return math.log(-math.expm1(-d))
    return math.log1p(-math.exp(-d))


@nb.njit(cache=True)
def _solve_decreasing(kind, y, lo, hi):
    # kind 0: g_exp, kind 1: h_lin. Clamp outside [f(hi), f(lo)], otherwise
    # bisection with a Newton step whenever it stays inside the bracket.
    if kind == 0:
        flo = _g_exp(lo)
        fhi = _g_exp(hi)
    else:
        flo = _h_lin(lo)
        fhi = _h_lin(hi)
    if y >= flo:
        return lo
    if y <= fhi:
        return hi
    a = lo
    b = hi
    x = 0.5 * (a + b)
    for _ in range(BISECT_MAX_ITER):
        if kind == 0:
            fx = _g_exp(x) - y
            dfx = _g_exp_prime(x)
        else:
            fx = _h_lin(x) - y
            dfx = _h_lin_prime(x)
        if abs(fx) <= BISECT_TOL:
            return x
        # decreasing: f(x) > y means the root lies to the right
        if fx > 0.0:
            a = x
        else:
            b = x
        nx = x - fx / dfx if dfx != 0.0 else 0.5 * (a + b)
        if not (a < nx < b):
            nx = 0.5 * (a + b)
        if nx == x:
            return x
        x = nx
    return x


@nb.njit(cache=True)
def _invert_g_exp(y, lo, hi):
    return _solve_decreasing(0, y, lo, hi)


@nb.njit(cache=True)
def _invert_h_lin(y, lo, hi):
    return _solve_decreasing(1, y, lo, hi)


# --- public API -------------------------------------------------------------

def _check_nonneg(name, x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} needs finite non-negative input, got {x!r}")
    return arr


def g_exp(d):
    """(d + 1) e^{-d}: normalized common-neighbor density at distance d."""
    arr = _check_nonneg("g_exp", d)
    out = (arr + 1.0) * np.exp(-arr)
    return float(out) if out.ndim == 0 else out


def h_exp(x, n):
    """e^{-x} + e^{x-n}; the boundary loss in the expected degree."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > n):
        raise DomainError(f"h_exp needs 0 <= x <= n={n}, got {x!r}")
    out = np.exp(-arr) + np.exp(arr - n)
    return float(out) if out.ndim == 0 else out


def h_lin(d):
    """log(d+1) (2/d + 2/(d+2)), extended by continuity with h_lin(0) = 2."""
    arr = _check_nonneg("h_lin", d)
    safe = np.where(arr == 0.0, 1.0, arr)
    out = np.where(arr == 0.0, 2.0, np.log1p(safe) * (2.0 / safe + 2.0 / (safe + 2.0)))
    return float(out) if out.ndim == 0 else out


def g_log(a, b):
    """Mean of 1/x over the segment between a and b (1/a when a == b)."""
    if not (math.isfinite(a) and math.isfinite(b)) or a <= 0 or b <= 0:
        raise DomainError(f"g_log needs positive arguments, got {a!r}, {b!r}")
    return _g_log(float(a), float(b))


def log1m_exp_neg(d):
    """log(1 - e^{-d}) for d > 0, accurate at both ends of the range."""
    arr = np.asarray(d, dtype=float)
    if np.any(~(arr > 0)) or np.any(np.isnan(arr)):
        raise DomainError(f"log1m_exp_neg needs d > 0, got {d!r}")
    small = arr <= math.log(2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, np.log(-np.expm1(-arr)), np.log1p(-np.exp(-arr)))
    return float(out) if out.ndim == 0 else out


def _check_range(y, rng):
    if not math.isfinite(y):
        raise DomainError(f"cannot invert non-finite value {y!r}")
    if rng.lo <= 0:
        raise DomainError(f"inversion range must lie in (0, inf): {rng}")


def invert_g_exp(y, rng=EXP_WINDOW):
    """Distance d in ``rng`` with g_exp(d) = y, clamped to the range ends."""
    _check_range(y, rng)
    return _invert_g_exp(float(y), float(rng.lo), float(rng.hi))


def invert_h_lin(y, rng=LIN_WINDOW):
    """Distance d in ``rng`` with h_lin(d) = y, clamped to the range ends."""
    _check_range(y, rng)
    return _invert_h_lin(float(y), float(rng.lo), float(rng.hi))
