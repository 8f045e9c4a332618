"""End-to-end solvers built on diffusion steps, plus baselines and dense oracles.

``solve_linear`` computes the fixed point of ``X = P X + B`` (D-iteration),
``solve_eigen_diplus`` the dominant eigenvector of a column-stochastic
matrix by diffusing the signed fluid ``P e - e`` (DI+).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .core import DiffusionState, DimensionError, MonitorVector, _as_vector, is_sigma_decreasing, matvec, residual_linf
from .operators import ScheduleStep, check_invariant, diffuse_step
from .scheduling import EXHAUSTED, Scheduler, SchedulerKind

log = logging.getLogger(__name__)

__all__ = [
    "InvariantViolation",
    "ColumnSumError",
    "NotConvergedError",
    "SolveConfig",
    "TraceRecord",
    "ConvergenceTrace",
    "SolveReport",
    "solve_linear",
    "solve_eigen_diplus",
    "emulate_power_iteration",
    "compare_alpha_runs",
    "power_iteration_baseline",
    "power_iteration_linear",
    "jacobi_baseline",
    "dense_oracle_solve",
    "dense_oracle_eigen",
    "snake_oscillation_demo",
    "left_monitor",
    "DENSE_CAP",
]

DENSE_CAP = 512
_CHUNK = 4096
_NORMS = {"l1": 0, "linf": 1, "sigma_v": 2}


class InvariantViolation(AssertionError):
    """A property guaranteed by construction failed during a run."""


class ColumnSumError(ValueError):
    def __init__(self, bad_columns, col_sums):
        self.bad_columns = list(bad_columns)
        self.col_sums = col_sums
        shown = ", ".join(f"{i}: {col_sums[i]:.17g}" for i in self.bad_columns[:10])
        more = "" if len(self.bad_columns) <= 10 else f" (+{len(self.bad_columns) - 10} more)"
        super().__init__(f"columns must sum to 1 within 1e-9; offending columns {shown}{more}")


class NotConvergedError(RuntimeError):
    pass


@dataclass
class SolveConfig:
    """Stopping rule, scheduler choice and instrumentation of a diffusion run.

    ``norm`` picks the fluid norm compared against ``epsilon``: ``l1``
    (``sum |F_i|``), ``linf`` or ``sigma_v`` (``sum v_i |F_i|``, which equals
    ``sigma_v(F)`` for nonnegative fluid). ``theta`` defaults to
    ``epsilon / (10 n)``.
    """

    epsilon: float = 1e-9
    norm: str = "l1"
    max_steps: int = 10_000_000
    scheduler: SchedulerKind | str = SchedulerKind.GREEDY_ABS
    theta: float | None = None
    invariant_check_every: int = 0
    invariant_tol: float = 1e-10
    trace_every: int = 100
    seed: int | None = None
    script: list | None = None
    order: list | None = None
    experimental: bool = False
    detect_oscillation: bool = True
    backend: str | None = None

    def __post_init__(self):
        self.scheduler = SchedulerKind.parse(self.scheduler)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.norm not in _NORMS:
            raise ValueError(f"norm must be one of {sorted(_NORMS)}")
        if self.theta is not None and self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if self.invariant_check_every < 0 or self.trace_every < 0:
            raise ValueError("check/trace intervals must be nonnegative")
        if self.scheduler is SchedulerKind.POSITIVE_ONLY and not self.experimental:
            raise ValueError("the positive-only scheduler is experimental; set experimental=True")


class TraceRecord(NamedTuple):
    step: int
    node: int
    alpha: float
    diffused_amount: float
    fluid_l1: float
    fluid_sigma_v: float
    invariant_residual: float


class ConvergenceTrace:
    """Sampled monitor values of a run, strictly increasing in ``step``."""

    FIELDS = TraceRecord._fields

    def __init__(self, records=()):
        self.records = []
        for r in records:
            self.append(r)

    def append(self, record):
        record = TraceRecord(*record)
        if self.records and record.step <= self.records[-1].step:
            raise ValueError("trace steps must be strictly increasing")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, k):
        return self.records[k]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def __eq__(self, other):
        if not isinstance(other, ConvergenceTrace):
            return NotImplemented
        return self.records == other.records


@dataclass
class SolveReport:
    solution: np.ndarray
    steps_used: int
    final_fluid_norm: float
    converged: bool
    oscillation_detected: bool
    trace: ConvergenceTrace
    status: str = ""
    column_touches: int = 0
    entries_touched: int = 0
    backward_residual: float = float("nan")
    state: DiffusionState | None = field(default=None, repr=False)


def left_monitor(m):
    """Monitor weights ``v`` with ``v^T P <= v^T``.

    Ones for (sub-)stochastic columns; otherwise the dominant left
    eigenvector from dense power iteration on ``P^T`` (``n <= 512``).
    """
    if np.all(m.col_sums <= 1.0 + 1e-12):
        return MonitorVector.ones(m.n)
    if m.n > DENSE_CAP:
        raise ValueError(f"left eigenvector needs n <= {DENSE_CAP}, got {m.n}")
    v = dense_oracle_eigen_transpose(m)
    if np.any(v <= 0):
        raise ValueError("dominant left eigenvector is not strictly positive")
    return MonitorVector(v)


# -- the run driver -------------------------------------------------------------


class _Records:
    def __init__(self, size):
        self.node = np.zeros(size, dtype=np.int64)
        self.alpha = np.ones(size)
        self.amount = np.zeros(size)
        self.l1 = np.zeros(size)
        self.sigma = np.zeros(size)
        self.wl1 = np.zeros(size)


class _OscillationDetector:
    """Flags a run whose running-minimum norm stalls for ``window`` steps."""

    def __init__(self, window, start_value, start_step):
        self.window = window
        self.best = start_value
        self.best_step = start_step
        self.flagged_at = None

    def feed(self, steps, values):
        best, best_step, window = self.best, self.best_step, self.window
        for s, val in zip(steps.tolist(), values.tolist()):
            if val < best * (1.0 - 1e-6):
                best, best_step = val, s
            elif s - best_step >= window:
                self.flagged_at = s
                break
        self.best, self.best_step = best, best_step
        return self.flagged_at is not None


def _current_norm(state, norm):
    if norm == "l1":
        return state.fluid_l1
    if norm == "sigma_v":
        return state.fluid_weighted_l1
    return float(np.max(np.abs(state.fluid))) if state.n else 0.0


def _drive(m, state, b, cfg, check=None):
    """Run the configured scheduler on ``state`` until a stop condition.

    ``check(rec, count, state)`` is called after every chunk of steps with
    the per-step records; it raises :class:`InvariantViolation` on failure.
    """
    n = m.n
    kern = kernels.get_backend(cfg.backend)
    theta = cfg.theta if cfg.theta is not None else cfg.epsilon / (10 * max(n, 1))
    kind = cfg.scheduler
    norm_kind = _NORMS[cfg.norm]
    sched = Scheduler(kind, n, theta, seed=cfg.seed, script=cfg.script, order=cfg.order,
                      experimental=cfg.experimental)
    trace = ConvergenceTrace()
    rec = _Records(_CHUNK)
    start = state.step
    steps = 0
    status = "budget"
    osc = None
    if cfg.detect_oscillation and n:
        osc = _OscillationDetector(20 * n, _current_norm(state, cfg.norm), state.step)
    per_step = rec.wl1 if cfg.norm == "sigma_v" else rec.l1
    last = None

    if kind is SchedulerKind.SCRIPTED:
        script_nodes = np.array([s.node for s in sched.script], dtype=np.int64)
        script_alphas = np.array([s.alpha for s in sched.script], dtype=np.float64)
    if kind is SchedulerKind.RANDOM:
        sched.start(state)

    if _current_norm(state, cfg.norm) <= cfg.epsilon:
        status = "converged"

    while status == "budget" and steps < cfg.max_steps:
        limit = min(cfg.max_steps - steps, _CHUNK)
        if osc is not None:
            limit = min(limit, osc.window)
        for every in (cfg.trace_every, cfg.invariant_check_every):
            if every:
                limit = min(limit, every - (state.step - start) % every)

        pre_touched = state.entries_touched
        F, H, w, acc = state.fluid, state.history, state.weights, state.acc
        if kind in (SchedulerKind.GREEDY_ABS, SchedulerKind.NEGATIVE_ONLY, SchedulerKind.POSITIVE_ONLY):
            mode = {"abs": 0, "neg": 1, "pos": 2}[sched.mode]
            code, count, state.step, touched = kern.run_priority(
                m.indptr, m.indices, m.data, F, H, w, acc, state.step, mode, theta,
                limit, cfg.epsilon, norm_kind, rec.node, rec.amount, rec.l1, rec.sigma, rec.wl1)
        elif kind in (SchedulerKind.CYCLIC, SchedulerKind.THRESHOLD):
            code, count, state.step, sched.pos, touched = kern.run_sweep(
                m.indptr, m.indices, m.data, F, H, w, acc, state.step, sched.order, sched.pos, theta,
                kind is SchedulerKind.THRESHOLD, limit, cfg.epsilon, norm_kind,
                rec.node, rec.amount, rec.l1, rec.sigma, rec.wl1)
        elif kind is SchedulerKind.SCRIPTED:
            lo = sched.pos
            hi = min(lo + limit, len(sched.script))
            count = hi - lo
            rec.node[:count] = script_nodes[lo:hi]
            rec.alpha[:count] = script_alphas[lo:hi]
            state.step, touched = kern.run_schedule(
                m.indptr, m.indices, m.data, F, H, w, acc, state.step, script_nodes[lo:hi],
                script_alphas[lo:hi], rec.amount, rec.l1, rec.sigma, rec.wl1)
            sched.pos = hi
            code = kern.EXHAUSTED if hi == len(sched.script) else kern.RUNNING
        else:
            code, count, touched = _random_chunk(m, state, sched, limit, cfg, rec)
        state.entries_touched = pre_touched + touched
        steps += count

        if count:
            last = count - 1
            if check is not None:
                check(rec, count, state)
            if osc is not None:
                step_ids = np.arange(state.step - count + 1, state.step + 1)
                if osc.feed(step_ids, per_step[:count]):
                    log.info("oscillation detected at step %d", osc.flagged_at)
        if cfg.invariant_check_every and (state.step - start) % cfg.invariant_check_every == 0 and count:
            if not check_invariant(m, state, b, cfg.invariant_tol):
                raise InvariantViolation(
                    f"H + F = P H + B violated at step {state.step}: residual {residual_linf(m, state, b):.3e}")
        on_trace = cfg.trace_every and (state.step - start) % cfg.trace_every == 0
        if count and on_trace:
            _trace_append(trace, m, state, b, rec, last)

        if code == kern.CONVERGED:
            status = "converged"
        elif code == kern.EXHAUSTED:
            status = "exhausted"
        elif osc is not None and osc.flagged_at is not None:
            status = "oscillation"
        if count == 0 and code == kern.RUNNING:
            break

    if last is not None and (not trace.records or trace.records[-1].step < state.step):
        _trace_append(trace, m, state, b, rec, last)

    state.refresh()
    final = _current_norm(state, cfg.norm)
    converged = final <= cfg.epsilon
    if status == "exhausted" and not converged:
        log.info("no eligible node left with fluid norm %.3e > eps", final)
    return {
        "steps": steps,
        "status": "converged" if converged else status,
        "final_norm": final,
        "converged": converged,
        "oscillation": osc is not None and osc.flagged_at is not None,
        "trace": trace,
        "theta": theta,
    }


def _trace_append(trace, m, state, b, rec, k):
    trace.append(TraceRecord(
        state.step, int(rec.node[k]), float(rec.alpha[k]), float(rec.amount[k]),
        state.fluid_l1, float(state.acc[1]), residual_linf(m, state, b)))


def _random_chunk(m, state, sched, limit, cfg, rec):
    kern = kernels.get_backend(cfg.backend)
    touched0 = state.entries_touched
    eps = cfg.epsilon
    for count in range(limit + 1):
        val = _current_norm(state, cfg.norm)
        if val <= eps:
            state.refresh()
            if _current_norm(state, cfg.norm) <= eps:
                return kern.CONVERGED, count, state.entries_touched - touched0
        if count == limit:
            break
        step = sched.next_step(state)
        if step is EXHAUSTED:
            return kern.EXHAUSTED, count, state.entries_touched - touched0
        t = diffuse_step(m, state, step)
        rec.node[count] = step.node
        rec.amount[count] = t
        rec.l1[count], rec.sigma[count], rec.wl1[count] = state.acc
    return kern.RUNNING, limit, state.entries_touched - touched0


def _report(m, state, b, out, solution):
    backward = float(np.max(np.abs(solution - matvec(m, solution) - b))) if m.n else 0.0
    return SolveReport(
        solution=solution,
        steps_used=out["steps"],
        final_fluid_norm=out["final_norm"],
        converged=out["converged"],
        oscillation_detected=out["oscillation"],
        trace=out["trace"],
        status=out["status"],
        column_touches=out["steps"],
        entries_touched=state.entries_touched,
        backward_residual=backward,
        state=state,
    )


# -- linear solver --------------------------------------------------------------


def solve_linear(m, b, cfg=None, monitor=None):
    """Solve ``X = P X + B`` for nonnegative ``B`` by diffusion.

    Starts from ``F = B``, ``H = 0`` and diffuses until the configured fluid
    norm drops to ``cfg.epsilon``; the solution is the history ``H``. The
    achieved backward residual ``|X - P X - B|_inf`` equals ``|F|_inf`` up to
    rounding and is reported alongside.
    """
    b = _as_vector(b, m.n, name="b")
    if np.any(b < 0):
        raise ValueError("b must be nonnegative; signed right-hand sides need a scripted or greedy run")
    return _solve_signed(m, b, cfg, monitor)


def _solve_signed(m, b, cfg=None, monitor=None):
    cfg = cfg or SolveConfig()
    b = _as_vector(b, m.n, name="b")
    monitor = monitor or left_monitor(m)
    state = DiffusionState.initial(b, monitor)
    out = _drive(m, state, b, cfg)
    return _report(m, state, b, out, state.history.copy())


# -- DI+ eigensolver --------------------------------------------------------------


def _check_stochastic(m, tol=1e-9):
    bad = np.flatnonzero(np.abs(m.col_sums - 1.0) > tol)
    if bad.size:
        raise ColumnSumError(bad.tolist(), m.col_sums)


class _DiplusChecks:
    """Per-chunk assertions for negative-only DI+ runs (1e-12 slack)."""

    def __init__(self, state, e):
        self.e = e
        self.prev_wl1 = state.fluid_weighted_l1

    def __call__(self, rec, count, state):
        amount = rec.amount[:count]
        if np.any(amount > 0.0):
            raise InvariantViolation("negative-only DI+ diffused nonnegative fluid (H must not increase)")
        sig = rec.sigma[:count]
        if np.any(np.abs(sig) > 1e-9):
            raise InvariantViolation(f"sigma_v(F) drifted to {np.max(np.abs(sig)):.3e}")
        wl1 = np.concatenate(([self.prev_wl1], rec.wl1[:count]))
        if np.any(np.diff(wl1) > 1e-12):
            raise InvariantViolation("|F|_v increased during negative-only DI+")
        self.prev_wl1 = float(wl1[-1])
        H = state.history
        if np.any(H + self.e < -1e-12) or np.any(H > 1e-12):
            raise InvariantViolation("H + e left the box [0, e]")
        if abs(float(np.sum(state.fluid))) > 1e-9:
            raise InvariantViolation("total signed fluid drifted from zero")


def solve_eigen_diplus(m, cfg=None):
    """Dominant eigenvector of a column-stochastic matrix by DI+.

    Diffuses ``F_0 = P e - e`` from ``H_0 = 0`` where ``e = (1/n, ..., 1/n)``;
    ``H + e`` converges to the eigenvector, returned rescaled to unit L1 sum.
    Under the negative-only scheduler the run asserts, chunk by chunk, that
    ``H`` never increases, ``0 <= H + e <= e``, ``sum F = 0`` and that
    ``sum |F_i|`` never increases.
    """
    if cfg is None:
        cfg = SolveConfig(scheduler=SchedulerKind.NEGATIVE_ONLY)
    _check_stochastic(m)
    n = m.n
    e = np.full(n, 1.0 / n)
    f0 = matvec(m, e) - e
    state = DiffusionState(f0, None, MonitorVector.ones(n))
    check = _DiplusChecks(state, e) if cfg.scheduler is SchedulerKind.NEGATIVE_ONLY else None
    if check is not None:
        check(_Records(0), 0, state)
    out = _drive(m, state, f0, cfg, check)
    x = state.history + e
    total = float(np.sum(x))
    solution = x / total if total > 0 else x
    report = _report(m, state, np.zeros(n), out, solution)
    report.backward_residual = float(np.max(np.abs(matvec(m, solution) - solution))) if n else 0.0
    return report


# -- power-iteration emulation ------------------------------------------------------


@dataclass
class EmulationResult:
    vectors: list
    alphas: list


def emulate_power_iteration(m, x0, cycles):
    """Reproduce ``x0, P x0, ..., P^k x0`` with cyclic partial diffusions.

    In cycle ``k + 1`` node ``i`` diffuses exactly the fluid it held when
    the cycle began, which is ``(P^k x0)_i``; so ``alpha = (P^k x0)_i / F_i``
    never exceeds one, since the fluid on node ``i`` can only have grown
    during the cycle. Taking the target from the fluid itself rather than
    from a separately computed ``P^k x0`` keeps rounding errors from piling
    up in the fluid when ``P^k x0`` decays.
    """
    x0 = _as_vector(x0, m.n, name="x0")
    if np.any(x0 < 0):
        raise ValueError("x0 must be nonnegative")
    if cycles < 0:
        raise ValueError("cycles must be nonnegative")
    state = DiffusionState(x0)
    vectors = [x0.copy()]
    alphas = []
    for _ in range(cycles):
        target = state.fluid.copy()
        cycle_alphas = np.zeros(m.n)
        for i in range(m.n):
            fi = float(state.fluid[i])
            t = float(target[i])
            if fi <= 0.0:
                if t > 0.0:
                    raise RuntimeError(f"node {i} must diffuse {t!r} but holds no fluid")
                a = 0.0
            else:
                a = t / fi
            if a > 1.0 + 1e-12:
                raise RuntimeError(f"emulation needs alpha={a!r} > 1 at node {i}")
            a = min(a, 1.0)
            cycle_alphas[i] = a
            diffuse_step(m, state, ScheduleStep(i, a))
        alphas.append(cycle_alphas)
        vectors.append(state.fluid.copy())
    return EmulationResult(vectors, alphas)


# -- alpha comparison ------------------------------------------------------------------


@dataclass
class ComparisonReport:
    sigma_ok: np.ndarray
    history_ok: np.ndarray
    total_ok: np.ndarray

    @property
    def all_hold(self):
        return bool(self.sigma_ok.all() and self.history_ok.all() and self.total_ok.all())


def compare_alpha_runs(m, f0, schedule, alphas_low, alphas_high, mon, slack=1e-12):
    """Run two alpha sequences on one node schedule and check the dominance claims.

    For ``0 <= alpha_k <= alpha'_k <= 1`` the run with the larger fractions
    must satisfy, at every step: ``sigma_v(F') <= sigma_v(F)``, ``H' >= H``
    and ``H' + F' >= H + F`` (entrywise, up to ``slack``).
    """
    f0 = _as_vector(f0, m.n, name="f0")
    schedule = [int(i) for i in schedule]
    lo = np.asarray(alphas_low, dtype=np.float64)
    hi = np.asarray(alphas_high, dtype=np.float64)
    if np.any(f0 < 0):
        raise ValueError("f0 must be nonnegative")
    if not (len(schedule) == lo.size == hi.size):
        raise ValueError("schedule and alpha sequences must have equal length")
    if np.any(lo < 0) or np.any(lo > hi) or np.any(hi > 1):
        raise ValueError("need 0 <= alphas_low <= alphas_high <= 1")
    if mon.n != m.n:
        raise DimensionError("monitor size does not match the matrix")
    if not is_sigma_decreasing(m, mon):
        raise ValueError("matrix is not sigma_v-decreasing for this monitor")
    low = DiffusionState(f0, None, mon)
    high = DiffusionState(f0, None, mon)
    k = len(schedule)
    sigma_ok = np.zeros(k, dtype=bool)
    history_ok = np.zeros(k, dtype=bool)
    total_ok = np.zeros(k, dtype=bool)
    v = mon.v
    for s, (i, a, a2) in enumerate(zip(schedule, lo.tolist(), hi.tolist())):
        diffuse_step(m, low, ScheduleStep(i, a))
        diffuse_step(m, high, ScheduleStep(i, a2))
        sigma_ok[s] = np.dot(v, high.fluid) <= np.dot(v, low.fluid) + slack
        history_ok[s] = np.all(high.history >= low.history - slack)
        total_ok[s] = np.all(high.history + high.fluid >= low.history + low.fluid - slack)
    return ComparisonReport(sigma_ok, history_ok, total_ok)


# -- baselines ----------------------------------------------------------------------------


class BaselineResult(NamedTuple):
    solution: np.ndarray
    iterations: int
    converged: bool
    column_touches: int


def _iterate(m, x, update, tol, max_iters):
    # ``iterations`` counts updates that moved the iterate by more than tol;
    # the confirming sweep is still paid for in column_touches
    for k in range(1, max_iters + 1):
        y = update(x)
        if np.sum(np.abs(y - x)) <= tol:
            return BaselineResult(y, k - 1, True, m.n * k)
        x = y
    log.info("baseline did not converge in %d iterations", max_iters)
    return BaselineResult(x, max_iters, False, m.n * max_iters)


def power_iteration_baseline(m, x0, tol=1e-9, max_iters=100_000):
    """Eigen mode: ``X <- P X / |P X|_1`` until successive iterates agree to ``tol`` (L1)."""
    x0 = _as_vector(x0, m.n, name="x0")
    if np.any(x0 < 0) or not np.any(x0 > 0):
        raise ValueError("x0 must be nonnegative and nonzero")

    def update(x):
        y = matvec(m, x)
        s = np.sum(y)
        if s <= 0:
            raise ValueError("iterate vanished; P x0 = 0")
        return y / s

    return _iterate(m, x0 / np.sum(x0), update, tol, max_iters)


def power_iteration_linear(m, b, tol=1e-9, max_iters=100_000, x0=None):
    """Linear mode: ``X <- P X + B`` from ``X = 0``."""
    b = _as_vector(b, m.n, name="b")
    x = np.zeros(m.n) if x0 is None else _as_vector(x0, m.n, name="x0")
    return _iterate(m, x, lambda x: matvec(m, x) + b, tol, max_iters)


def jacobi_baseline(m, b, tol=1e-9, max_iters=100_000):
    """Jacobi sweeps for ``(I - P) X = B``.

    ``X_i <- (B_i + sum_{j != i} p_ij X_j) / (1 - p_ii)``; without self-loops
    this is exactly ``X <- P X + B``.
    """
    b = _as_vector(b, m.n, name="b")
    diag = np.zeros(m.n)
    cols = np.repeat(np.arange(m.n), np.diff(m.indptr))
    on_diag = m.indices == cols
    diag[cols[on_diag]] = m.data[on_diag]
    if np.any(diag >= 1.0):
        raise ValueError("Jacobi needs p_ii < 1 on every diagonal entry")
    scale = 1.0 / (1.0 - diag)
    return _iterate(m, np.zeros(m.n), lambda x: (matvec(m, x) - diag * x + b) * scale, tol, max_iters)


# -- dense oracles -----------------------------------------------------------------------------


def _dense_guard(m):
    if m.n > DENSE_CAP:
        raise ValueError(f"dense oracle limited to n <= {DENSE_CAP}, got n = {m.n}")


def dense_oracle_solve(m, b):
    """Solve ``(I - P) X = B`` densely (LU with partial pivoting)."""
    _dense_guard(m)
    b = _as_vector(b, m.n, name="b")
    a = np.eye(m.n) - m.to_dense()
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"I - P is singular: {exc}") from None
    if not np.all(np.isfinite(x)) or np.linalg.cond(a) > 1e14:
        raise ValueError("I - P is numerically singular")
    return x


def _dense_power(a, tol, max_iters):
    n = a.shape[0]
    x = np.arange(1, n + 1, dtype=np.float64)
    x /= x.sum()
    for _ in range(max_iters):
        y = a @ x
        y /= y.sum()
        if np.sum(np.abs(y - x)) <= tol:
            return y
        x = y
    raise NotConvergedError(
        f"dense power iteration did not converge in {max_iters} iterations (periodic or reducible input?)")


def dense_oracle_eigen(m, tol=1e-12, max_iters=1_000_000):
    """Dominant right eigenvector of a column-stochastic matrix, unit L1 sum.

    The start vector is proportional to ``(1, 2, ..., n)`` so that periodic
    matrices, for which the uniform vector is already stationary, still fail
    to converge and raise :class:`NotConvergedError`.
    """
    _dense_guard(m)
    _check_stochastic(m)
    return _dense_power(m.to_dense(), tol, max_iters)


def dense_oracle_eigen_transpose(m, tol=1e-12, max_iters=1_000_000):
    _dense_guard(m)
    v = _dense_power(m.to_dense().T, tol, max_iters)
    return v / np.max(v)


# -- snake configuration ---------------------------------------------------------------------------


@dataclass
class OscillationReport:
    mixed: SolveReport
    negative: SolveReport
    mixed_initial_norm: float
    negative_history_monotone: bool

    @property
    def oscillation_detected(self):
        return self.mixed.oscillation_detected

    @property
    def negative_converged(self):
        return self.negative.converged

    @property
    def succeeded(self):
        return self.oscillation_detected and self.negative_converged and self.negative_history_monotone


SNAKE_MIXED_ORDER = (4, 3, 2, 1, 0)


def snake_oscillation_demo(max_steps=10_000, epsilon=1e-12, backend=None):
    """DI+ on the five-node snake graph with a mixed-sign and a negative-only schedule.

    The mixed run sweeps the nodes cyclically in the order 4, 3, 2, 1, 0,
    diffusing positive and negative fluid alike. Fluid of opposite signs
    then chases itself around the two three-cycles of the graph and never
    meets, so ``|F|`` stays on its initial plateau until the oscillation
    detector fires. The negative-only run converges in four steps.
    """
    from .io import make_fixture

    m, _ = make_fixture("snake")
    mixed_cfg = SolveConfig(epsilon=epsilon, max_steps=max_steps, scheduler=SchedulerKind.CYCLIC,
                            order=list(SNAKE_MIXED_ORDER), trace_every=1, backend=backend)
    neg_cfg = SolveConfig(epsilon=epsilon, max_steps=max_steps, scheduler=SchedulerKind.NEGATIVE_ONLY,
                          trace_every=1, backend=backend)
    e = np.full(m.n, 1.0 / m.n)
    initial = float(np.sum(np.abs(matvec(m, e) - e)))
    mixed = solve_eigen_diplus(m, mixed_cfg)
    negative = solve_eigen_diplus(m, neg_cfg)
    amounts = negative.trace.column("diffused_amount")
    monotone = bool(np.all(amounts <= 0.0)) and bool(np.all(negative.state.history + e >= -1e-12))
    return OscillationReport(mixed, negative, initial, monotone)
