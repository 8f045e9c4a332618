"""Matrix/graph ingestion, normalization, fixtures and trace persistence.

Files use 1-based indices for Matrix Market and 0-based indices for edge
lists; everything in memory is 0-based. Readers reject malformed input
instead of repairing it.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .core import SparseMatrix
from .solvers import ConvergenceTrace, TraceRecord

__all__ = [
    "ParseError",
    "EdgeList",
    "Normalization",
    "read_matrix_market",
    "write_matrix_market",
    "read_edge_list",
    "write_edge_list",
    "matrix_to_edge_list",
    "to_matrix",
    "write_trace_csv",
    "read_trace_csv",
    "write_vector",
    "read_vector",
    "make_fixture",
    "FIXTURES",
]

MM_HEADER = "%%MatrixMarket matrix coordinate real general"
TRACE_HEADER = ",".join(TraceRecord._fields)


_NODES_RE = re.compile(r"^\s*#\s*nodes:\s*(\d+)\s*$")


class ParseError(ValueError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        where = f"{path}:{lineno}" if lineno else str(path)
        super().__init__(f"{where}: {message}")


def _fmt(x):
    return format(float(x), ".17g")


# -- edge lists ----------------------------------------------------------------------


@dataclass
class EdgeList:
    """Directed weighted graph; edge ``src -> dst`` carries ``weight > 0``."""

    n: int
    edges: list = field(default_factory=list)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be nonnegative")
        clean = []
        for k, edge in enumerate(self.edges):
            src, dst, *rest = edge
            weight = float(rest[0]) if rest else 1.0
            if not (0 <= src < self.n and 0 <= dst < self.n):
                raise ValueError(f"edge {k} ({src} -> {dst}) out of range for n={self.n}")
            if not weight > 0 or not np.isfinite(weight):
                raise ValueError(f"edge {k} ({src} -> {dst}) has non-positive weight {weight}")
            clean.append((int(src), int(dst), weight))
        self.edges = clean


def read_edge_list(path, n=None):
    """Parse ``src dst [weight]`` lines (0-based, ``#`` comments).

    The node count is ``n`` if given, else a ``# nodes: N`` line if present,
    else one more than the largest index.
    """
    edges = []
    declared = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            directive = _NODES_RE.match(line)
            if directive:
                declared = int(directive.group(1))
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, f"expected 'src dst [weight]', got {line.strip()!r}")
            try:
                src, dst = int(parts[0]), int(parts[1])
                weight = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise ParseError(path, lineno, f"cannot parse {line.strip()!r}") from None
            if src < 0 or dst < 0:
                raise ParseError(path, lineno, "node indices must be nonnegative")
            if not weight > 0 or not np.isfinite(weight):
                raise ParseError(path, lineno, f"weight must be positive, got {parts[2]}")
            edges.append((src, dst, weight))
    top = max((max(s, d) for s, d, _ in edges), default=-1) + 1
    if n is None:
        n = declared if declared is not None else top
    if top > n:
        raise ParseError(path, 0, f"node index {top - 1} out of range for n={n}")
    return EdgeList(n, edges)


def write_edge_list(el, path):
    with open(path, "w") as fh:
        fh.write(f"# nodes: {el.n}\n")
        for src, dst, w in el.edges:
            fh.write(f"{src} {dst} {_fmt(w)}\n")


def matrix_to_edge_list(m):
    """Edges ``src -> dst`` for every stored ``p[dst, src]``."""
    edges = []
    for src in range(m.n):
        rows, vals = m.column(src)
        edges.extend((src, int(dst), float(w)) for dst, w in zip(rows, vals))
    return EdgeList(m.n, edges)


@dataclass(frozen=True)
class Normalization:
    """How to turn edge weights into a matrix.

    ``kind`` is ``"none"`` (weights as-is), ``"stochastic"`` (divide each
    nonzero column by its sum) or ``"damped"`` (stochastic, then scaled by
    ``damping``). Zero columns stay zero and are reported as dangling unless
    ``patch_dangling == "uniform"`` replaces them by ``1/n`` columns first.
    """

    kind: str = "none"
    damping: float | None = None
    patch_dangling: str | None = None

    def __post_init__(self):
        if self.kind not in ("none", "stochastic", "damped"):
            raise ValueError(f"unknown normalization {self.kind!r}")
        if self.kind == "damped" and not (self.damping is not None and 0 < self.damping < 1):
            raise ValueError("damped normalization needs 0 < d < 1")
        if self.patch_dangling not in (None, "uniform"):
            raise ValueError("patch_dangling must be None or 'uniform'")

    @classmethod
    def damped(cls, d, patch_dangling=None):
        return cls("damped", d, patch_dangling)


def to_matrix(el, mode=Normalization()):
    """Build ``P`` with ``P[dst, src] = weight`` and apply the normalization.

    Returns ``(matrix, dangling)`` where ``dangling`` lists the zero columns
    (nodes without out-edges) before any patching.
    """
    n = el.n
    if el.edges:
        src, dst, w = (np.array(c) for c in zip(*el.edges))
    else:
        src = dst = np.zeros(0, dtype=np.int64)
        w = np.zeros(0)
    m = SparseMatrix.from_triplets(n, dst, src, w)
    dangling = [int(i) for i in np.flatnonzero(m.col_sums == 0)]
    if mode.kind == "none":
        return m, dangling
    indptr, indices, data = m.indptr, m.indices, m.data / np.repeat(
        np.where(m.col_sums > 0, m.col_sums, 1.0), np.diff(m.indptr))
    if mode.patch_dangling == "uniform" and dangling:
        rows, cols, vals = [], [], []
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            if i in dangling:
                rows.extend(range(n))
                cols.extend([i] * n)
                vals.extend([1.0 / n] * n)
            else:
                rows.extend(indices[lo:hi].tolist())
                cols.extend([i] * (hi - lo))
                vals.extend(data[lo:hi].tolist())
        m = SparseMatrix.from_triplets(n, rows, cols, vals)
    else:
        m = SparseMatrix(n, indptr, indices, data)
    if mode.kind == "damped":
        m = m.scaled(mode.damping)
    return m, dangling


# -- Matrix Market -------------------------------------------------------------------------


def read_matrix_market(path):
    """Read a ``coordinate real general`` Matrix Market file (square, 1-based)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip().lower().split() != MM_HEADER.lower().split():
        raise ParseError(path, 1, f"expected header {MM_HEADER!r}")
    k = 1
    while k < len(lines) and (not lines[k].strip() or lines[k].lstrip().startswith("%")):
        k += 1
    if k == len(lines):
        raise ParseError(path, k, "missing size line")
    try:
        nrows, ncols, nnz = (int(t) for t in lines[k].split())
    except ValueError:
        raise ParseError(path, k + 1, f"bad size line {lines[k]!r}") from None
    if nrows != ncols:
        raise ParseError(path, k + 1, f"matrix must be square, got {nrows}x{ncols}")
    rows, cols, vals = [], [], []
    for lineno in range(k + 2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ParseError(path, lineno, f"expected 'row col value', got {text!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(path, lineno, f"cannot parse {text!r}") from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(path, lineno, f"index ({i}, {j}) out of range for {nrows}x{ncols}")
        if not v > 0 or not np.isfinite(v):
            raise ParseError(path, lineno, f"value must be positive, got {parts[2]}")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(vals) != nnz:
        raise ParseError(path, len(lines), f"size line announces {nnz} entries, found {len(vals)}")
    return SparseMatrix.from_triplets(nrows, rows, cols, vals)


def write_matrix_market(m, path):
    with open(path, "w") as fh:
        fh.write(MM_HEADER + "\n")
        fh.write(f"{m.n} {m.n} {m.nnz}\n")
        for j in range(m.n):
            rows, vals = m.column(j)
            for i, v in zip(rows.tolist(), vals.tolist()):
                fh.write(f"{i + 1} {j + 1} {_fmt(v)}\n")


# -- traces and vectors -------------------------------------------------------------------------


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TraceRecord._fields)
        for r in trace:
            writer.writerow([r.step, r.node, _fmt(r.alpha), _fmt(r.diffused_amount), _fmt(r.fluid_l1),
                             _fmt(r.fluid_sigma_v), _fmt(r.invariant_residual)])
        fh.flush()


def read_trace_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(TraceRecord._fields):
            raise ParseError(path, 1, f"expected header {TRACE_HEADER!r}")
        trace = ConvergenceTrace()
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(TraceRecord._fields):
                raise ParseError(path, lineno, f"expected {len(TraceRecord._fields)} fields")
            try:
                trace.append(TraceRecord(int(row[0]), int(row[1]), *map(float, row[2:])))
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return trace


def write_vector(x, path):
    with open(path, "w") as fh:
        for val in np.asarray(x, dtype=np.float64).tolist():
            fh.write(_fmt(val) + "\n")


def read_vector(path, n=None):
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                vals.append(float(text))
            except ValueError:
                raise ParseError(path, lineno, f"not a number: {text!r}") from None
    if n is not None and len(vals) != n:
        raise ParseError(path, 0, f"vector has {len(vals)} entries, expected {n}")
    return np.array(vals)


# -- fixtures ----------------------------------------------------------------------------------


def _snake():
    path = resources.files("diffuse").joinpath("data/snake.edges")
    with resources.as_file(path) as p:
        el = read_edge_list(p)
    return to_matrix(el)[0], None


def _twonode():
    m = SparseMatrix.from_dense([[0.0, 0.5], [0.5, 0.0]])
    return m, np.array([1.0, 0.0])


def _rank1():
    return SparseMatrix.from_dense([[0.5, 0.5], [0.5, 0.5]]), None


def _random_substochastic(n, seed):
    """Sparse columns (1 to 8 entries) with column sums drawn from [0.5, 0.95]; B = e."""
    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    for j in range(n):
        k = int(rng.integers(1, min(n, 8) + 1))
        r = np.sort(rng.choice(n, size=k, replace=False))
        w = rng.uniform(0.1, 1.0, size=k)
        w *= rng.uniform(0.5, 0.95) / w.sum()
        rows.extend(r.tolist())
        cols.extend([j] * k)
        vals.extend(w.tolist())
    return SparseMatrix.from_triplets(n, rows, cols, vals), np.full(n, 1.0 / n)


def _random_ergodic(n, seed):
    """Dense, strictly positive, column-stochastic."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.1, 1.0, size=(n, n))
    a /= a.sum(axis=0)
    return SparseMatrix.from_dense(a), None


FIXTURES = {
    "snake": _snake,
    "twonode": _twonode,
    "rank1": _rank1,
    "random_substochastic": _random_substochastic,
    "random_ergodic": _random_ergodic,
}
_PARAMETRIC = {"random_substochastic", "random_ergodic"}
_NAME_RE = re.compile(r"^\s*(\w+)\s*(?:\(\s*(\d+)\s*,\s*(-?\d+)\s*\))?\s*$")


def make_fixture(name, n=None, seed=None):
    """Build a named fixture; returns ``(matrix, b or None)``.

    Parametric fixtures accept ``"random_ergodic(50, 7)"`` or explicit
    ``n``/``seed`` arguments.
    """
    match = _NAME_RE.match(name)
    if not match or match.group(1) not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r} (choose from {sorted(FIXTURES)})")
    base = match.group(1)
    if match.group(2) is not None:
        n, seed = int(match.group(2)), int(match.group(3))
    if base in _PARAMETRIC:
        if n is None or seed is None:
            raise ValueError(f"fixture {base!r} needs n and seed, e.g. {base}(50, 7)")
        if n < 1:
            raise ValueError("fixture size must be positive")
        return FIXTURES[base](n, seed)
    if match.group(2) is not None:
        raise ValueError(f"fixture {base!r} takes no parameters")
    return FIXTURES[base]()
