import numpy as np
import pytest

from conftest import random_stochastic, random_substochastic
from diffuse import kernels
from diffuse.core import DiffusionState, MonitorVector
from diffuse.operators import ScheduleStep, diffuse_step, touched_by
from diffuse.scheduling import EXHAUSTED, Scheduler
from diffuse.solvers import SolveConfig, solve_eigen_diplus, solve_linear

needs_compiled = pytest.mark.skipif("compiled" not in kernels.available(), reason="extension not built")


def recs(size):
    return np.zeros(size, dtype=np.int64), np.zeros(size), np.zeros(size), np.zeros(size), np.zeros(size)


def test_backend_selection():
    assert "python" in kernels.available()
    assert kernels.get_backend("python").BACKEND == "python"
    assert kernels.get_backend() is kernels.backend
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("seed", range(5))
def test_run_schedule_matches_diffuse_step(seed, backend):
    rng = np.random.default_rng(seed)
    n = 30
    m = random_substochastic(rng, n)
    mon = MonitorVector(rng.uniform(1.0, 2.0, size=n))
    b = rng.uniform(size=n)
    nodes = rng.integers(n, size=400)
    alphas = rng.uniform(size=400)

    ref = DiffusionState.initial(b, mon)
    amounts = [diffuse_step(m, ref, ScheduleStep(i, a)) for i, a in zip(nodes.tolist(), alphas.tolist())]

    st = DiffusionState.initial(b, mon)
    kern = kernels.get_backend(backend)
    _, amount, l1, sig, wl1 = recs(400)
    step, touched = kern.run_schedule(m.indptr, m.indices, m.data, st.fluid, st.history, st.weights, st.acc,
                                      0, nodes, alphas, amount, l1, sig, wl1)
    assert step == ref.step == 400
    assert touched == ref.entries_touched
    np.testing.assert_array_equal(st.fluid, ref.fluid)
    np.testing.assert_array_equal(st.history, ref.history)
    np.testing.assert_array_equal(st.acc, ref.acc)
    np.testing.assert_array_equal(amount, amounts)


@pytest.mark.parametrize("kind, mode", [("greedy", 0), ("negative", 1)])
def test_run_priority_matches_scheduler(kind, mode, backend):
    rng = np.random.default_rng(7)
    n = 40
    m = random_stochastic(rng, n) if kind == "negative" else random_substochastic(rng, n)
    f0 = m.to_dense() @ np.full(n, 1.0 / n) - 1.0 / n if kind == "negative" else rng.uniform(size=n)

    ref = DiffusionState(f0)
    sched = Scheduler(kind, n).start(ref)
    picked = []
    for _ in range(2000):
        step = sched.next_step(ref)
        if step is EXHAUSTED:
            break
        diffuse_step(m, ref, step)
        sched.notify_update(touched_by(m, step.node), ref)
        picked.append(step.node)

    st = DiffusionState(f0)
    kern = kernels.get_backend(backend)
    node, amount, l1, sig, wl1 = recs(2000)
    status, count, step, _ = kern.run_priority(m.indptr, m.indices, m.data, st.fluid, st.history, st.weights,
                                               st.acc, 0, mode, 0.0, 2000, 0.0, 0, node, amount, l1, sig, wl1)
    assert count == len(picked)
    assert node[:count].tolist() == picked
    np.testing.assert_array_equal(st.fluid, ref.fluid)
    np.testing.assert_array_equal(st.history, ref.history)


def test_run_sweep_cyclic_matches_scheduler(backend):
    rng = np.random.default_rng(3)
    n = 12
    m = random_substochastic(rng, n)
    b = rng.uniform(size=n)
    order = rng.permutation(n)
    ref = DiffusionState(b)
    sched = Scheduler("cyclic", n, order=order).start(ref)
    for _ in range(100):
        diffuse_step(m, ref, sched.next_step(ref))
    st = DiffusionState(b)
    kern = kernels.get_backend(backend)
    node, amount, l1, sig, wl1 = recs(100)
    status, count, step, pos, _ = kern.run_sweep(m.indptr, m.indices, m.data, st.fluid, st.history, st.weights,
                                                 st.acc, 0, order.astype(np.int64), 0, 0.0, False, 100, 0.0, 0,
                                                 node, amount, l1, sig, wl1)
    assert (status, count, step, pos) == (kernels.get_backend(backend).RUNNING, 100, 100, sched.pos)
    assert node.tolist() == [int(order[k % n]) for k in range(100)]
    np.testing.assert_array_equal(st.fluid, ref.fluid)


def test_budget_stop_keeps_heap_entry(backend):
    # stopping on the budget and resuming must give the same run as one call
    rng = np.random.default_rng(5)
    m = random_substochastic(rng, 20)
    b = rng.uniform(size=20)
    kern = kernels.get_backend(backend)
    one = DiffusionState(b)
    node1, *r1 = recs(300)
    kern.run_priority(m.indptr, m.indices, m.data, one.fluid, one.history, one.weights, one.acc, 0, 0, 0.0,
                      300, 0.0, 0, node1, *r1)
    two = DiffusionState(b)
    node2, *r2 = recs(300)
    step = 0
    got = []
    for _ in range(3):
        _, count, step, _ = kern.run_priority(m.indptr, m.indices, m.data, two.fluid, two.history, two.weights,
                                              two.acc, step, 0, 0.0, 100, 0.0, 0, node2, *r2)
        got.extend(node2[:count].tolist())
    assert got == node1.tolist()
    np.testing.assert_array_equal(one.fluid, two.fluid)


@needs_compiled
@pytest.mark.parametrize("scheduler", ["greedy", "cyclic", "threshold", "random"])
def test_backends_bit_identical_linear(scheduler):
    rng = np.random.default_rng(11)
    m = random_substochastic(rng, 60)
    b = rng.uniform(size=60)
    out = {}
    for name in ("python", "compiled"):
        cfg = SolveConfig(epsilon=1e-10, scheduler=scheduler, seed=4, trace_every=50, backend=name)
        out[name] = solve_linear(m, b, cfg)
    py, c = out["python"], out["compiled"]
    assert py.steps_used == c.steps_used
    np.testing.assert_array_equal(py.solution, c.solution)
    assert py.trace == c.trace


@needs_compiled
def test_backends_bit_identical_eigen():
    m = random_stochastic(np.random.default_rng(8), 25)
    py = solve_eigen_diplus(m, SolveConfig(scheduler="negative", backend="python", trace_every=10))
    c = solve_eigen_diplus(m, SolveConfig(scheduler="negative", backend="compiled", trace_every=10))
    np.testing.assert_array_equal(py.solution, c.solution)
    assert py.trace == c.trace
