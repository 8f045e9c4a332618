"""Numeric building blocks: column-compressed matrix, monitor functional, diffusion state."""

from __future__ import annotations

import numpy as np

__all__ = [
    "DimensionError",
    "SparseMatrix",
    "MonitorVector",
    "DiffusionState",
    "matvec",
    "sigma_v",
    "is_sigma_decreasing",
    "residual_linf",
]


class DimensionError(ValueError):
    """Raised when vector and matrix sizes disagree."""


def _as_vector(x, n=None, name="x"):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


class SparseMatrix:
    """Square nonnegative matrix stored by columns.

    Only strictly positive entries are stored; within a column the row
    indices are strictly increasing. The arrays are made read-only so a
    matrix can be shared between solver runs.

    Parameters
    ----------
    n : int
        Dimension.
    indptr, indices, data : array_like
        Standard CSC layout: column ``i`` owns ``indices[indptr[i]:indptr[i+1]]``.
    """

    __slots__ = ("n", "indptr", "indices", "data", "col_sums")

    def __init__(self, n, indptr, indices, data):
        n = int(n)
        if n < 0:
            raise ValueError("dimension must be nonnegative")
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        data = np.ascontiguousarray(data, dtype=np.float64)
        if indptr.shape != (n + 1,) or indptr[0] != 0:
            raise ValueError("indptr must have length n + 1 and start at 0")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("indptr must be nondecreasing")
        nnz = int(indptr[-1])
        if indices.shape != (nnz,) or data.shape != (nnz,):
            raise ValueError("indices/data length must equal indptr[-1]")
        if nnz:
            if indices.min() < 0 or indices.max() >= n:
                raise ValueError("row index out of range")
            if not np.all(np.isfinite(data)) or np.any(data <= 0.0):
                raise ValueError("stored values must be finite and strictly positive")
        col_sums = np.zeros(n)
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            if hi - lo > 1 and np.any(np.diff(indices[lo:hi]) <= 0):
                raise ValueError(f"row indices must be strictly increasing in column {i}")
            s = 0.0
            for val in data[lo:hi]:
                s += val
            col_sums[i] = s
        for arr in (indptr, indices, data, col_sums):
            arr.setflags(write=False)
        self.n = n
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self.col_sums = col_sums

    # -- constructors -------------------------------------------------

    @classmethod
    def from_triplets(cls, n, rows, cols, vals):
        """Build from (row, col, value) triplets, summing duplicates."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise ValueError("triplet index out of range")
        if np.any(vals <= 0.0):
            raise ValueError("triplet values must be strictly positive")
        order = np.lexsort((rows, cols))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            key = cols * n + rows
            first = np.concatenate(([True], key[1:] != key[:-1]))
            groups = np.cumsum(first) - 1
            summed = np.zeros(int(first.sum()))
            for g, val in zip(groups, vals):
                summed[g] += val
            rows, cols, vals = rows[first], cols[first], summed
        counts = np.bincount(cols, minlength=n) if cols.size else np.zeros(n, dtype=np.int64)
        indptr = np.concatenate(([0], np.cumsum(counts)))
        return cls(n, indptr, rows, vals)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("dense matrix must be square")
        if np.any(a < 0.0):
            raise ValueError("matrix entries must be nonnegative")
        rows, cols = np.nonzero(a.T)  # column-major order
        return cls.from_triplets(a.shape[0], cols, rows, a.T[rows, cols])

    @classmethod
    def zeros(cls, n):
        return cls(n, np.zeros(n + 1, dtype=np.int64), [], [])

    # -- accessors ----------------------------------------------------

    @property
    def nnz(self):
        return int(self.indptr[-1])

    def column(self, i):
        """Return ``(rows, values)`` of column ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def column_nnz(self, i):
        return int(self.indptr[i + 1] - self.indptr[i])

    def to_dense(self):
        a = np.zeros((self.n, self.n))
        cols = np.repeat(np.arange(self.n), np.diff(self.indptr))
        a[self.indices, cols] = self.data
        return a

    def scaled(self, factor):
        """Return ``factor * self`` (factor > 0)."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return SparseMatrix(self.n, self.indptr, self.indices, self.data * factor)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, nnz={self.nnz})"


class MonitorVector:
    """Strictly positive weight vector ``v`` defining ``sigma_v(x) = <v|x>``."""

    __slots__ = ("v",)

    def __init__(self, v):
        v = _as_vector(v, name="v").copy()
        if not np.all(np.isfinite(v)) or np.any(v <= 0.0):
            raise ValueError("monitor weights must be finite and strictly positive")
        v.setflags(write=False)
        self.v = v

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n))

    @property
    def n(self):
        return self.v.shape[0]

    def __repr__(self):
        return f"MonitorVector(n={self.n})"


class DiffusionState:
    """Residual fluid ``F`` and history ``H`` of a diffusion run.

    The state also caches ``sum |F_i|``, ``sigma_v(F)`` and ``sum v_i |F_i|``.
    Kernels update the caches incrementally and recompute them from scratch
    every ``n`` steps. ``fluid_sigma_v`` is ``None`` when no monitor is
    attached (the internal weights are then all ones).
    """

    def __init__(self, fluid, history=None, monitor=None):
        fluid = _as_vector(fluid, name="fluid").copy()
        n = fluid.shape[0]
        if history is None:
            history = np.zeros(n)
        else:
            history = _as_vector(history, n, name="history").copy()
        if monitor is not None and monitor.n != n:
            raise DimensionError(f"monitor has length {monitor.n}, expected {n}")
        self.fluid = fluid
        self.history = history
        self.monitor = monitor
        self.weights = monitor.v if monitor is not None else np.ones(n)
        self.step = 0
        self.entries_touched = 0
        # [sum |F|, sigma_v(F), sum v|F|], layout shared with the kernels
        self.acc = np.zeros(3)
        self.refresh()

    @classmethod
    def initial(cls, b, monitor=None):
        """``F_0 = B``, ``H_0 = 0``."""
        return cls(b, None, monitor)

    @property
    def n(self):
        return self.fluid.shape[0]

    @property
    def fluid_l1(self):
        return float(self.acc[0])

    @property
    def fluid_sigma_v(self):
        return float(self.acc[1]) if self.monitor is not None else None

    @property
    def fluid_weighted_l1(self):
        return float(self.acc[2])

    def refresh(self):
        """Recompute cached aggregates from scratch (sequential summation)."""
        l1 = sig = wl1 = 0.0
        for f, w in zip(self.fluid.tolist(), self.weights.tolist()):
            l1 += abs(f)
            sig += w * f
            wl1 += w * abs(f)
        self.acc[:] = (l1, sig, wl1)

    def copy(self):
        other = DiffusionState.__new__(DiffusionState)
        other.fluid = self.fluid.copy()
        other.history = self.history.copy()
        other.monitor = self.monitor
        other.weights = self.weights
        other.step = self.step
        other.entries_touched = self.entries_touched
        other.acc = self.acc.copy()
        return other

    def __repr__(self):
        return f"DiffusionState(n={self.n}, step={self.step}, fluid_l1={self.fluid_l1:.3e})"


def matvec(m, x):
    """Return ``P @ x`` accumulated column by column."""
    x = _as_vector(x, m.n)
    out = np.zeros(m.n)
    scale = np.repeat(x, np.diff(m.indptr))
    np.add.at(out, m.indices, m.data * scale)
    return out


def sigma_v(mon, x):
    x = _as_vector(x, mon.n)
    return float(np.dot(mon.v, x))


def is_sigma_decreasing(m, mon, slack=1e-12):
    """True iff ``sum_j v_j p_ji <= v_i`` for every column ``i`` (up to ``slack``).

    For nonnegative ``x`` this is equivalent to ``sigma_v(P x) <= sigma_v(x)``.
    """
    if mon.n != m.n:
        raise DimensionError(f"monitor has length {mon.n}, matrix is {m.n}x{m.n}")
    weighted = np.zeros(m.n)
    cols = np.repeat(np.arange(m.n), np.diff(m.indptr))
    np.add.at(weighted, cols, mon.v[m.indices] * m.data)
    return bool(np.all(weighted <= mon.v + slack))


def residual_linf(m, state, b):
    """``max_i |(H + F - P H - B)_i|``: violation of the conservation identity."""
    b = _as_vector(b, m.n, name="b")
    if state.n != m.n:
        raise DimensionError(f"state has length {state.n}, matrix is {m.n}x{m.n}")
    r = state.history + state.fluid - matvec(m, state.history) - b
    return float(np.max(np.abs(r))) if m.n else 0.0
