"""Single diffusion steps and the conservation check ``H + F = P H + B``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError, _as_vector, matvec, residual_linf

__all__ = ["ScheduleStep", "diffuse_step", "touched_by", "check_invariant", "apply_alpha_blend"]


@dataclass(frozen=True)
class ScheduleStep:
    """One scheduling decision: diffuse ``alpha`` of node ``node``'s fluid."""

    node: int
    alpha: float = 1.0

    def __post_init__(self):
        if isinstance(self.node, bool) or int(self.node) != self.node or self.node < 0:
            raise ValueError(f"node must be a nonnegative integer, got {self.node!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        object.__setattr__(self, "node", int(self.node))
        object.__setattr__(self, "alpha", float(self.alpha))


def diffuse_step(m, state, step):
    """Apply ``P_i^alpha = I + alpha (P - I) J_i`` to the state in place.

    With ``t = alpha * F[i]``: ``F[i] -= t``, ``F[j] += p_ji * t`` for each
    stored entry of column ``i``, ``H[i] += t``. Returns ``t``.
    """
    n = m.n
    if state.n != n:
        raise DimensionError(f"state has length {state.n}, matrix is {n}x{n}")
    i = step.node
    if i >= n:
        raise IndexError(f"node {i} out of range for n={n}")
    F, w, acc = state.fluid, state.weights, state.acc
    l1, sig, wl1 = acc.tolist()

    old = float(F[i])
    t = step.alpha * old
    new = old - t
    F[i] = new
    l1 += abs(new) - abs(old)
    sig += float(w[i]) * (new - old)
    wl1 += float(w[i]) * (abs(new) - abs(old))
    state.history[i] += t

    lo, hi = int(m.indptr[i]), int(m.indptr[i + 1])
    for j, p in zip(m.indices[lo:hi].tolist(), m.data[lo:hi].tolist()):
        old = float(F[j])
        new = old + p * t
        F[j] = new
        l1 += abs(new) - abs(old)
        sig += float(w[j]) * (new - old)
        wl1 += float(w[j]) * (abs(new) - abs(old))

    acc[:] = (l1, sig, wl1)
    state.step += 1
    state.entries_touched += 1 + hi - lo
    if state.step % n == 0:
        state.refresh()
    return t


def touched_by(m, node):
    """Indices written by a diffusion of ``node``: the node, then its column rows."""
    rows, _ = m.column(node)
    return np.concatenate(([node], rows)).astype(np.int64)


def check_invariant(m, state, b, tol):
    """True iff ``|H + F - P H - B|_inf <= tol * (1 + max(|B|_inf, |H|_inf))``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    b = _as_vector(b, m.n, name="b")
    scale = 1.0 + max(
        float(np.max(np.abs(b))) if b.size else 0.0,
        float(np.max(np.abs(state.history))) if state.n else 0.0,
    )
    return residual_linf(m, state, b) <= tol * scale


def apply_alpha_blend(m, x, alpha):
    """``(1 - alpha) x + alpha P x``."""
    if not alpha >= 0:
        raise ValueError("alpha must be nonnegative")
    x = _as_vector(x, m.n)
    return (1.0 - alpha) * x + alpha * matvec(m, x)
