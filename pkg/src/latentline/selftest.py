"""Quick built-in property checks, runnable without the test dependencies."""
from __future__ import annotations

import math
import time

import numpy as np

from . import distance_estimators as de
from . import distinguish_lab as dl
from . import math_kernels as mk
from . import model_core as mc
from .order_recovery import recover_order
from .position_eval import inversion_report


def _check_inequalities(rng, k):
    x = rng.uniform(1e-6, 0.5, k)
    val = -np.log1p(-x)
    assert np.all((x + x * x / 2 < val) & (val < x + x * x)), "-log(1-x) bracket"
    a, b = rng.uniform(1e-3, 20, (2, k))
    xp, xx = np.minimum(a, b), np.maximum(a, b)
    assert np.all(np.exp(-xx) * np.expm1(xp) / -np.expm1(-xx) <= xp / xx * (1 + 1e-12)), "log bound 1"
    assert np.all(np.exp(-xx) * -np.expm1(-xp) / -np.expm1(-xx) <= xp / xx * (1 + 1e-12)), "log bound 2"
    keep = xx > xp
    assert np.all(-np.expm1(-xx[keep]) / -np.expm1(-xp[keep]) < xx[keep] / xp[keep]), "log bound 3"


def _check_monotone(rng, k):
    grid = np.linspace(0.3, 2.5 - 1e-6, k)
    assert np.all((mk.g_exp(grid + 1e-6) - mk.g_exp(grid)) / 1e-6 < -0.2), "g_exp slope"
    grid = np.linspace(0.5, 2.0 - 1e-6, k)
    assert np.all((mk.h_lin(grid + 1e-6) - mk.h_lin(grid)) / 1e-6 < -0.1), "h_lin slope"


def _check_roundtrip(rng, k):
    for d in rng.uniform(0.3, 2.5, k):
        assert abs(mk.invert_g_exp(mk.g_exp(d)) - d) < 1e-9, f"g_exp round trip at {d}"
    for d in rng.uniform(0.3, 2.0, k):
        assert abs(mk.invert_h_lin(mk.h_lin(d)) - d) < 1e-9, f"h_lin round trip at {d}"


def _check_densities(rng, k):
    # trapezoid rule on a fine grid; the integrands are smooth apart from the
    # kink at the vertex itself, which is placed on a grid node
    for decay in (mc.Decay.EXPONENTIAL, mc.Decay.LINEAR):
        p = mc.ModelParams(25.0, 0.7, decay)
        for xi in rng.uniform(0, 25, k):
            t = np.union1d(np.linspace(0, 25, 200_001), [xi])
            f = p.c * (np.exp(-np.abs(t - xi)) if decay is mc.Decay.EXPONENTIAL else 1 / (np.abs(t - xi) + 1))
            num = np.trapezoid(f, t) / 25
            assert abs(num - mc.expected_degree_density(p, xi)) < 1e-8, "degree density"


def _check_oracle_order(rng, k):
    p = mc.ModelParams(25.0, 1.0, mc.Decay.EXPONENTIAL, 0.05)
    w = de.exp_window(0.05)
    for s in range(k):
        X = mc.sample_positions(1000, p, 1000 + s)
        res = recover_order(de.exact_oracle(X, w))
        rep = inversion_report(X, res)
        assert rep.count == 0 or rep.percentiles.max <= 0.15, "oracle inversion beyond 3 delta"


def _check_sampling(rng, k):
    p = mc.ModelParams(25.0, 1.0, mc.Decay.EXPONENTIAL, 0.05)
    X = mc.sample_positions(800, p, 5)
    G1, G2 = mc.sample_graph(X, p, 9), mc.sample_graph(X, p, 9)
    assert G1 == G2, "graph sampling is not deterministic"
    x = X.positions
    P = np.exp(-np.abs(x[:, None] - x[None, :]))[np.triu_indices(800, 1)]
    z = (G1.edge_count - P.sum()) / math.sqrt(np.sum(P * (1 - P)))
    assert abs(z) < 4, f"edge count z-score {z:.2f}"


def _check_likelihood_ratio(rng, k):
    p = mc.ModelParams(10.0, 1.0, mc.Decay.EXPONENTIAL)
    X = mc.PositionVector(10.0, np.sort(rng.uniform(0, 10, 150)))
    pair = dl.construct_scaled(X, 0.5)
    G = mc.sample_graph(X, p, 3)
    direct = mc.log_likelihood(pair.X, G, p) - mc.log_likelihood(pair.Y, G, p)
    assert abs(dl.l_statistic(pair, G) - direct) < 1e-9, "L statistic vs likelihood difference"
    assert dl.expected_l(pair) >= 0, "negative KL"
    assert dl.check_dprime_triangle(dl.perturb_monotone(X, 1)), "d' triangle"


CHECKS = [
    ("elementary inequalities", _check_inequalities, 100_000),
    ("kernel monotonicity", _check_monotone, 10_000),
    ("inversion round trips", _check_roundtrip, 2_000),
    ("degree density vs quadrature", _check_densities, 20),
    ("oracle order recovery", _check_oracle_order, 5),
    ("sampling determinism and edge count", _check_sampling, 1),
    ("likelihood ratio identities", _check_likelihood_ratio, 1),
]


def run(seed=0, out=print):
    """Run every check; returns the number of failures."""
    rng = np.random.default_rng(seed)
    failures = 0
    for name, fn, k in CHECKS:
        t0 = time.perf_counter()
        try:
            fn(rng, k)
            status = "PASS"
            detail = ""
        except AssertionError as exc:
            failures += 1
            status = "FAIL"
            detail = f"  ({exc})"
        out(f"{status}  {name}  [{time.perf_counter() - t0:.1f}s]{detail}")
    return failures
