"""Command-line entry point: generate, recover, estimate, reproduce-figure,
distinguish and selftest.

Options come from three layers: built-in defaults, an optional ``--config``
file of ``key=value`` lines, and explicit flags (which win). The effective
configuration is echoed to stdout and embedded in every output file.

Exit codes: 0 success, 2 configuration error, 3 algorithmic failure,
4 I/O or file-format error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import dataclass, fields

import numba
import numpy as np

from . import __version__
from . import formats
from ._rng import derive_seed
from .distance_estimators import (
    TAU_SAME, DistanceWindow, estimate_for, exp_window, lin_window, matrix_rows, write_csv,
)
from .distinguish_lab import regime_label, run_distinguish_trials
from .errors import ConfigError, DomainError, EmptyAnchorSet, FormatError
from .model_core import Decay, ModelParams, sample_graph, sample_positions
from .order_recovery import recover_order
from .position_eval import REPORT_HEADER, evaluate, recover_positions

log = logging.getLogger("latentline")

EXIT_OK, EXIT_CONFIG, EXIT_ALGO, EXIT_IO = 0, 2, 3, 4

FIGURE_GRID = (10000, 12500, 15000, 17500, 20000)
DISTINGUISH_GRID = (250, 500, 1000, 2000)
DISTINGUISH_DELTA = 0.5


def _flag(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


@dataclass
class RunConfig:
    n: float = 25.0
    m: int = 10000
    c: float = 1.0
    model: str = "exp"
    delta: float = 0.05
    seed: int = 0
    trials: int = 100
    graphs: int = 30
    m_grid: tuple = None
    L: float = None
    U: float = None
    cutoff: bool = False
    fixed_x: bool = False
    tau_same: float = TAU_SAME
    threads: int = None
    strict: bool = False
    positions: str = "positions.txt"
    graph: str = "graph.txt"
    truth: str = None
    order: str = "order.txt"
    recovered: str = "recovered_positions.txt"
    scores: str = None
    report: str = None
    out: str = None
    per_graph: str = None
    trials_out: str = "trials.csv"
    summary_out: str = "summary.csv"
    finite_only: bool = False

    def echo(self, keys):
        return {k: _show(getattr(self, k)) for k in keys}


def _show(v):
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return v


_TYPES = {
    "n": float, "m": int, "c": float, "model": str, "delta": float, "seed": int,
    "trials": int, "graphs": int, "m_grid": _int_list, "L": float, "U": float,
    "cutoff": _flag, "fixed_x": _flag, "tau_same": float, "threads": int, "strict": _flag,
    "positions": str, "graph": str, "truth": str, "order": str, "recovered": str,
    "scores": str, "report": str, "out": str, "per_graph": str, "trials_out": str,
    "summary_out": str, "finite_only": _flag,
}

# keys echoed into outputs, per command
_MODEL_KEYS = ("n", "m", "c", "model", "delta", "seed")
_ECHO = {
    "generate": _MODEL_KEYS + ("cutoff",),
    "recover": ("n", "c", "model", "delta", "L", "U", "tau_same", "graph", "truth"),
    "estimate": ("n", "c", "model", "delta", "L", "U", "tau_same", "graph"),
    "reproduce-figure": ("n", "c", "model", "delta", "seed", "graphs", "m_grid", "L", "U", "cutoff"),
    "distinguish": ("n", "delta", "seed", "trials", "m_grid", "fixed_x"),
    "selftest": ("seed",),
}


def read_config_file(path):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in _TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown or malformed entry {raw.strip()!r}")
            out[key] = value.strip()
    return out


def _convert(key, value):
    if value is None:
        return None
    try:
        return _TYPES[key](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def build_config(args):
    """Defaults, then the --config file, then explicit flags."""
    cfg = RunConfig()
    layered = {}
    if getattr(args, "config", None):
        layered.update(read_config_file(args.config))
    layered.update({k: v for k, v in vars(args).items() if k in _TYPES and v is not None})
    for key, value in layered.items():
        setattr(cfg, key, _convert(key, value))
    return cfg


# --- validation helpers -----------------------------------------------------

def _params(cfg, n=None, c=None, model=None):
    try:
        return ModelParams(cfg.n if n is None else n, cfg.c if c is None else c,
                           Decay.parse(cfg.model if model is None else model), cfg.delta)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _window(cfg, params):
    base = exp_window(params.delta) if params.decay is Decay.EXPONENTIAL else lin_window(params.delta)
    try:
        w = DistanceWindow(base.L if cfg.L is None else cfg.L, base.U if cfg.U is None else cfg.U,
                           params.delta)
        return w.check(params.n)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _set_threads(cfg):
    if cfg.threads is None:
        return
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    limit = numba.config.NUMBA_NUM_THREADS
    if cfg.threads > limit:
        log.warning("requested %d threads but only %d are available (set NUMBA_NUM_THREADS); "
                    "using %d", cfg.threads, limit, limit)
    numba.set_num_threads(min(cfg.threads, limit))


def _announce(cfg, command, window=None):
    """Print and return the effective config for ``command`` as ``# key=value`` lines."""
    if window is not None:
        cfg.L, cfg.U = window.L, window.U
    echo = cfg.echo(_ECHO[command])
    for key, value in echo.items():
        print(f"# {key}={value}")
    return echo


def _explicit(args, key):
    # was the key set by a flag or the config file (rather than a default)?
    return key in getattr(args, "_explicit", set())


# --- pipeline ---------------------------------------------------------------

@dataclass
class PipelineResult:
    order: object
    positions: object
    report: object


def recover_pipeline(G, params, window, tau_same=TAU_SAME, truth=None):
    """Estimator -> order recovery -> uniform positions -> optional evaluation."""
    est = estimate_for(G, params, window=window, tau_same=tau_same)
    t0 = time.perf_counter()
    D = est.matrix()
    log.info("distance matrix: %.1fs", time.perf_counter() - t0)
    t0 = time.perf_counter()
    res = recover_order(D, window=window)
    del D
    log.info("order recovery: %.1fs (|E'|=%d, components=%d)", time.perf_counter() - t0,
             res.oriented_graph_size, res.components)
    pos = recover_positions(res, params.n, G.m)
    report = evaluate(truth, res.order, params.n) if truth is not None else None
    return PipelineResult(res, pos, report)


# --- commands ---------------------------------------------------------------

def cmd_generate(cfg, args):
    params = _params(cfg)
    if cfg.m < 0:
        raise ConfigError("m must be >= 0")
    if cfg.cutoff and params.decay is not Decay.EXPONENTIAL:
        raise ConfigError("the probability cutoff is only available for the exponential model")
    echo = _announce(cfg, "generate")
    X = sample_positions(cfg.m, params, derive_seed(cfg.seed, 0))
    G = sample_graph(X, params, derive_seed(cfg.seed, 1), cutoff=cfg.cutoff)
    formats.write_positions(cfg.positions, X, echo)
    header = formats.GraphHeader(params.n, cfg.m, params.decay, params.c, cfg.seed)
    formats.write_graph(cfg.graph, G, header, echo)
    print(f"wrote {cfg.positions} and {cfg.graph} ({G.edge_count} edges)")
    return EXIT_OK


def _graph_params(cfg, args, header):
    for key, hv, same in (("model", header.model, lambda a, b: Decay.parse(a) is b),
                          ("c", header.c, lambda a, b: float(a) == b),
                          ("n", header.n, lambda a, b: float(a) == b)):
        if _explicit(args, key) and not same(getattr(cfg, key), hv):
            shown = hv.value if isinstance(hv, Decay) else hv
            raise ConfigError(f"graph header has {key}={shown} but the configuration says "
                              f"{key}={getattr(cfg, key)}")
    cfg.n, cfg.c, cfg.model = header.n, header.c, header.model.value
    return _params(cfg)


def cmd_recover(cfg, args):
    G, header = formats.read_graph(cfg.graph)
    params = _graph_params(cfg, args, header)
    window = _window(cfg, params)
    truth = formats.read_positions(cfg.truth) if cfg.truth else None
    if truth is not None and truth.m != G.m:
        raise ConfigError(f"truth file has {truth.m} positions, graph has {G.m} vertices")
    echo = _announce(cfg, "recover", window)
    out = recover_pipeline(G, params, window, cfg.tau_same, truth)
    formats.write_order(cfg.order, out.order.order, echo)
    formats.write_positions(cfg.recovered, out.positions, echo)
    if cfg.scores:
        formats.write_scores(cfg.scores, out.order.scores, echo)
    print(f"wrote {cfg.order} and {cfg.recovered} (anchor {out.order.anchor}, "
          f"|E'|={out.order.oriented_graph_size})")
    if out.report is not None:
        rows = out.report.csv_rows(G.m)
        if cfg.report:
            formats.write_csv(cfg.report, REPORT_HEADER, rows, echo)
        for row in rows:
            print(",".join(formats.format_real(v) if isinstance(v, float) else str(v) for v in row))
    return EXIT_OK


def cmd_estimate(cfg, args):
    G, header = formats.read_graph(cfg.graph)
    params = _graph_params(cfg, args, header)
    window = _window(cfg, params)
    echo = _announce(cfg, "estimate", window)
    est = estimate_for(G, params, window=window, tau_same=cfg.tau_same)
    D = est.matrix()
    path = cfg.out or "estimates.csv"
    write_csv(path, matrix_rows(D, below=params.n if cfg.finite_only else None), echo)
    print(f"wrote {path}")
    return EXIT_OK


FIGURE_HEADER = ("m", "graphs", "failed",
                 "inv_p90", "inv_p95", "inv_p99", "inv_max",
                 "pos_p90", "pos_p95", "pos_p99", "pos_max")
PER_GRAPH_HEADER = ("m", "graph", "status", "inversions", "orientation",
                    "inv_p90", "inv_p95", "inv_p99", "inv_max",
                    "pos_p90", "pos_p95", "pos_p99", "pos_max")


def reproduce_figure(cfg):
    """Rows of per-m averaged metrics (and per-graph rows) for the m grid."""
    params = _params(cfg)
    if params.decay is not Decay.EXPONENTIAL or params.c != 1.0:
        raise ConfigError("reproduce-figure runs the exponential model with c = 1")
    window = _window(cfg, params)
    grid = cfg.m_grid or FIGURE_GRID
    rows, per_graph = [], []
    for m in grid:
        metrics, failed = [], 0
        for g in range(cfg.graphs):
            t0 = time.perf_counter()
            X = sample_positions(m, params, derive_seed(cfg.seed, m, g, 0))
            G = sample_graph(X, params, derive_seed(cfg.seed, m, g, 1), cutoff=cfg.cutoff)
            try:
                rep = recover_pipeline(G, params, window, cfg.tau_same, X).report
            except EmptyAnchorSet as exc:
                if cfg.strict:
                    raise
                failed += 1
                log.warning("m=%d graph %d: %s", m, g, str(exc))
                per_graph.append((m, g, "EmptyAnchorSet", "", "") + (math.nan,) * 8)
                continue
            vals = rep.inversion_distance_percentiles.as_tuple() + rep.position_error_percentiles.as_tuple()
            metrics.append(vals)
            per_graph.append((m, g, "ok", rep.inversion_count, rep.orientation_used.value) + vals)
            log.info("m=%d graph %d: %d inversions, p95 %.4f, pos max %.4f [%.0fs]", m, g,
                     rep.inversion_count, vals[1], vals[7], time.perf_counter() - t0)
        avg = tuple(np.mean(metrics, axis=0).tolist()) if metrics else (math.nan,) * 8
        rows.append((m, cfg.graphs, failed) + avg)
    return rows, per_graph


def cmd_reproduce_figure(cfg, args):
    cfg.m_grid = cfg.m_grid or FIGURE_GRID
    echo = _announce(cfg, "reproduce-figure", _window(cfg, _params(cfg)))
    rows, per_graph = reproduce_figure(cfg)
    path = cfg.out or "figure.csv"
    formats.write_csv(path, FIGURE_HEADER, rows, echo)
    if cfg.per_graph:
        formats.write_csv(cfg.per_graph, PER_GRAPH_HEADER, per_graph, echo)
    print(",".join(FIGURE_HEADER))
    for row in rows:
        print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    return EXIT_OK


def cmd_distinguish(cfg, args):
    delta = cfg.delta if _explicit(args, "delta") else DISTINGUISH_DELTA
    if not 0 <= delta < cfg.n / 2:
        raise ConfigError(f"distinguishing delta must lie in [0, n/2), got {delta}")
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    cfg.delta = delta
    grid = cfg.m_grid or DISTINGUISH_GRID
    cfg.m_grid = grid
    echo = _announce(cfg, "distinguish")
    summaries, trial_rows = [], []
    for m in grid:
        s = run_distinguish_trials(cfg.n, m, delta, cfg.trials, derive_seed(cfg.seed, m),
                                   fixed_x=cfg.fixed_x)
        summaries.append((cfg.n, m, delta, s.trials, s.error_rate, s.mean_expected_l, s.regime))
        for o in s.outcomes:
            trial_rows.append((m, o.trial, o.truth.value, o.L_value, o.expected_l,
                               o.tester_choice.value, int(o.correct)))
        log.info("m=%d: error rate %.3f, mean E[L] %.4g (%s)", m, s.error_rate, s.mean_expected_l,
                 regime_label(cfg.n, m, delta))
    formats.write_csv(cfg.trials_out, ("m", "trial", "truth", "L", "expected_L", "choice", "correct"),
                      trial_rows, echo)
    header = ("n", "m", "delta", "trials", "error_rate", "mean_expected_L", "regime")
    formats.write_csv(cfg.summary_out, header, summaries, echo)
    print(",".join(header))
    for row in summaries:
        print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    return EXIT_OK


def cmd_selftest(cfg, args):
    from . import selftest
    _announce(cfg, "selftest")
    failures = selftest.run(cfg.seed)
    print(f"{len(selftest.CHECKS) - failures}/{len(selftest.CHECKS)} checks passed")
    return EXIT_OK if failures == 0 else EXIT_ALGO


COMMANDS = {
    "generate": cmd_generate,
    "recover": cmd_recover,
    "estimate": cmd_estimate,
    "reproduce-figure": cmd_reproduce_figure,
    "distinguish": cmd_distinguish,
    "selftest": cmd_selftest,
}


# --- argument parsing -------------------------------------------------------

def _add(p, *names, key, help, **kw):
    p.add_argument(*names, dest=key, default=None, help=help, **kw)


def _model_flags(p, with_m=True):
    _add(p, "--n", key="n", type=float, help="segment length (default 25)")
    if with_m:
        _add(p, "--m", key="m", type=int, help="number of vertices (default 10000)")
    _add(p, "--c", key="c", type=float, help="edge constant, 0 < c <= 1 (default 1)")
    _add(p, "--model", key="model", choices=("exp", "lin"), help="decay function (default exp)")
    _add(p, "--delta", key="delta", type=float, help="precision, 0 < delta < 0.1 (default 0.05)")


def _window_flags(p):
    _add(p, "--L", key="L", type=float, help="override the window lower end L")
    _add(p, "--U", key="U", type=float, help="override the window upper end U")
    _add(p, "--tau-same", key="tau_same", type=float,
         help=f"same-endpoint threshold for the linear estimator (default {TAU_SAME})")


def make_parser():
    parser = argparse.ArgumentParser(prog="latentline", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of key=value lines; explicit flags win")
    _add(common, "--seed", key="seed", type=int, help="64-bit seed (default 0)")
    _add(common, "--threads", key="threads", type=int, help="cap on worker threads")
    common.add_argument("-q", "--quiet", action="store_true", help="only print results")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("generate", parents=[common], help="sample positions and a graph")
    _model_flags(p)
    _add(p, "--cutoff", key="cutoff", action="store_const", const=True,
         help="skip exponential pairs with probability < 1e-15 (approximation)")
    _add(p, "--positions", key="positions", help="positions output file")
    _add(p, "--graph", key="graph", help="graph output file")

    p = sub.add_parser("recover", parents=[common], help="recover order and positions from a graph")
    _model_flags(p, with_m=False)
    _window_flags(p)
    _add(p, "--graph", key="graph", help="graph input file")
    _add(p, "--truth", key="truth", help="true positions file; enables the evaluation report")
    _add(p, "--order", key="order", help="order output file")
    _add(p, "--positions", key="recovered", help="recovered positions output file")
    _add(p, "--scores", key="scores", help="optional vertex,R CSV")
    _add(p, "--report", key="report", help="optional report CSV (needs --truth)")

    p = sub.add_parser("estimate", parents=[common], help="dump estimated distances as CSV")
    _model_flags(p, with_m=False)
    _window_flags(p)
    _add(p, "--graph", key="graph", help="graph input file")
    _add(p, "--out", key="out", help="CSV output (default estimates.csv)")
    _add(p, "--finite-only", key="finite_only", action="store_const", const=True,
         help="omit pairs reported as far (d_hat = n)")

    p = sub.add_parser("reproduce-figure", parents=[common],
                       help="inversion and position-error percentiles over an m grid")
    _model_flags(p, with_m=False)
    _window_flags(p)
    _add(p, "--graphs", key="graphs", type=int, help="graphs per grid point (default 30)")
    _add(p, "--m-grid", key="m_grid", type=_int_list,
         help="comma-separated m values (default 10000,12500,15000,17500,20000)")
    _add(p, "--cutoff", key="cutoff", action="store_const", const=True,
         help="use the probability cutoff when sampling")
    _add(p, "--strict", key="strict", action="store_const", const=True,
         help="abort on the first EmptyAnchorSet instead of counting it as failed")
    _add(p, "--out", key="out", help="CSV output (default figure.csv)")
    _add(p, "--per-graph", key="per_graph", help="optional CSV with one row per graph")

    p = sub.add_parser("distinguish", parents=[common],
                       help="likelihood-ratio distinguishing trials over an m grid")
    _add(p, "--n", key="n", type=float, help="segment length (default 25)")
    _add(p, "--delta", key="delta", type=float,
         help=f"shift of the scaled hypothesis (default {DISTINGUISH_DELTA})")
    _add(p, "--trials", key="trials", type=int, help="trials per grid point (default 100)")
    _add(p, "--m-grid", key="m_grid", type=_int_list,
         help="comma-separated m values (default 250,500,1000,2000)")
    _add(p, "--fixed-x", key="fixed_x", action="store_const", const=True,
         help="reuse one X for every trial")
    _add(p, "--trials-out", key="trials_out", help="per-trial CSV (default trials.csv)")
    _add(p, "--summary-out", key="summary_out", help="summary CSV (default summary.csv)")

    sub.add_parser("selftest", parents=[common], help="run the built-in property checks")
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        explicit = {k for k, v in vars(args).items() if k in _TYPES and v is not None}
        if args.config:
            explicit |= set(read_config_file(args.config))
        args._explicit = explicit
        cfg = build_config(args)
        _set_threads(cfg)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyAnchorSet as exc:
        print(f"recovery failed: {exc}", file=sys.stderr)
        return EXIT_ALGO
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
