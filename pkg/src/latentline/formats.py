"""Text file formats for positions, graphs, orders and CSV reports.

Every writer can embed the effective run configuration as ``# key=value``
comment lines placed after the fixed header; every reader skips them.
"""
from __future__ import annotations

import csv
import math
import warnings

import numpy as np

from .errors import FormatError
from .model_core import Decay, ModelParams, PositionVector, RandomGraph

POSITIONS_MAGIC = "latent-line-positions v1"
GRAPH_MAGIC = "latent-line-graph v1"
ORDER_MAGIC = "latent-line-order v1"

_CHUNK = 1 << 20


def _comment_lines(config):
    if not config:
        return ""
    return "".join(f"# {k}={v}\n" for k, v in config.items())


def format_real(x):
    """Shortest text that reads back to the same double."""
    return repr(float(x))


def _split_header(text, magic, path):
    lines = text.split("\n")
    if not lines or lines[0].strip() != magic:
        raise FormatError(f"{path}: expected first line {magic!r}")
    return lines


def _header_fields(lines, keys, path):
    # consume key=value header lines (and comments) in order; returns fields
    # and the index of the first body line
    fields = {}
    comments = {}
    pos = 1
    want = list(keys)
    while pos < len(lines):
        line = lines[pos].strip()
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            comments[k.strip()] = v.strip()
        elif want and "=" in line:
            k, _, v = line.partition("=")
            if k.strip() != want[0]:
                raise FormatError(f"{path}: expected header field {want[0]!r}, found {k.strip()!r}")
            fields[want.pop(0)] = v.strip()
        else:
            break
        pos += 1
    if want:
        raise FormatError(f"{path}: missing header field {want[0]!r}")
    return fields, comments, pos


def _parse_number(value, kind, name, path):
    try:
        out = kind(value)
    except ValueError:
        raise FormatError(f"{path}: bad value for {name}: {value!r}") from None
    if kind is float and not math.isfinite(out):
        raise FormatError(f"{path}: {name} must be finite")
    return out


def _body_numbers(lines, start, dtype, path):
    body = "\n".join(ln for ln in lines[start:] if ln.strip() and not ln.lstrip().startswith("#"))
    if not body:
        return np.empty(0, dtype=dtype)
    if dtype is np.float64:
        try:
            return np.array(body.split(), dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    with warnings.catch_warnings():
        # numpy only warns when it stops at an unparsable token
        warnings.simplefilter("error", DeprecationWarning)
        try:
            out = np.fromstring(body, dtype=dtype, sep=" ")
        except (DeprecationWarning, ValueError):
            raise FormatError(f"{path}: non-integer token in body") from None
    if out.size != len(body.split()):
        raise FormatError(f"{path}: non-integer token in body")
    return out


# --- positions --------------------------------------------------------------

def write_positions(path, X, config=None):
    with open(path, "w") as f:
        f.write(f"{POSITIONS_MAGIC}\nn={format_real(X.n)}\nm={X.m}\n")
        f.write(_comment_lines(config))
        x = X.positions
        for s in range(0, x.shape[0], _CHUNK):
            f.write("".join(f"{v!r}\n" for v in x[s:s + _CHUNK].tolist()))


def read_positions(path):
    with open(path) as f:
        lines = _split_header(f.read(), POSITIONS_MAGIC, path)
    fields, _, start = _header_fields(lines, ("n", "m"), path)
    n = _parse_number(fields["n"], float, "n", path)
    m = _parse_number(fields["m"], int, "m", path)
    x = _body_numbers(lines, start, np.float64, path)
    if x.shape[0] != m:
        raise FormatError(f"{path}: header says m={m} but {x.shape[0]} positions follow")
    try:
        return PositionVector(n, x)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# --- graphs -----------------------------------------------------------------

class GraphHeader:
    __slots__ = ("n", "m", "model", "c", "seed", "config")

    def __init__(self, n, m, model, c, seed, config=None):
        self.n = n
        self.m = m
        self.model = Decay.parse(model)
        self.c = c
        self.seed = seed
        self.config = dict(config or {})


def write_graph(path, G, header, config=None):
    edges = G.edges()
    with open(path, "w") as f:
        f.write(f"{GRAPH_MAGIC}\nn={format_real(header.n)}\nm={G.m}\n"
                f"model={header.model.value}\nc={format_real(header.c)}\nseed={header.seed}\n")
        f.write(_comment_lines(config))
        for s in range(0, edges.shape[0], _CHUNK):
            chunk = edges[s:s + _CHUNK]
            f.write(("%d %d\n" * chunk.shape[0]) % tuple(chunk.ravel().tolist()))


def read_graph(path):
    """Returns (RandomGraph, GraphHeader)."""
    with open(path) as f:
        lines = _split_header(f.read(), GRAPH_MAGIC, path)
    fields, comments, start = _header_fields(lines, ("n", "m", "model", "c", "seed"), path)
    m = _parse_number(fields["m"], int, "m", path)
    try:
        header = GraphHeader(_parse_number(fields["n"], float, "n", path), m, fields["model"],
                             _parse_number(fields["c"], float, "c", path),
                             _parse_number(fields["seed"], int, "seed", path), comments)
        ModelParams(header.n, header.c, header.model)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    flat = _body_numbers(lines, start, np.int64, path)
    if flat.size % 2:
        raise FormatError(f"{path}: odd number of edge endpoints")
    edges = flat.reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= m):
        raise FormatError(f"{path}: edge endpoint outside [0, {m})")
    if np.any(edges[:, 0] >= edges[:, 1]):
        raise FormatError(f"{path}: every edge line must have i < j")
    keys = edges[:, 0] * max(m, 1) + edges[:, 1]
    if np.any(np.diff(keys) <= 0):
        raise FormatError(f"{path}: edges must be unique and lexicographically sorted")
    return RandomGraph.from_edges(m, edges), header


# --- orders -----------------------------------------------------------------

def write_order(path, order, config=None):
    with open(path, "w") as f:
        f.write(f"{ORDER_MAGIC}\n")
        f.write(_comment_lines(config))
        f.write("".join(f"{v}\n" for v in np.asarray(order).tolist()))


def read_order(path):
    with open(path) as f:
        lines = _split_header(f.read(), ORDER_MAGIC, path)
    order = _body_numbers(lines, 1, np.int64, path)
    if not np.array_equal(np.sort(order), np.arange(order.shape[0])):
        raise FormatError(f"{path}: not a permutation of 0..{order.shape[0] - 1}")
    return order


# --- CSV --------------------------------------------------------------------

def write_csv(path, header, rows, config=None):
    with open(path, "w", newline="") as f:
        f.write(_comment_lines(config))
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_real(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path):
    """Rows of a CSV written by ``write_csv`` as dicts (comment lines skipped)."""
    with open(path, newline="") as f:
        return list(csv.DictReader(ln for ln in f if not ln.startswith("#")))


def write_scores(path, scores, config=None):
    write_csv(path, ("vertex", "R"), enumerate(np.asarray(scores).tolist()), config)
