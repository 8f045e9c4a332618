import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import random_substochastic
from diffuse.core import (
    DiffusionState,
    DimensionError,
    MonitorVector,
    SparseMatrix,
    is_sigma_decreasing,
    matvec,
    residual_linf,
    sigma_v,
)
from diffuse.io import make_fixture


# -- SparseMatrix ---------------------------------------------------------------


def test_from_triplets_sums_duplicates_and_sorts_rows():
    m = SparseMatrix.from_triplets(3, [2, 0, 2], [1, 1, 1], [0.25, 0.5, 0.25])
    rows, vals = m.column(1)
    assert rows.tolist() == [0, 2]
    assert vals.tolist() == [0.5, 0.5]
    assert m.nnz == 2
    assert m.col_sums.tolist() == [0.0, 1.0, 0.0]


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf])
def test_rejects_nonpositive_or_nonfinite_values(bad):
    with pytest.raises(ValueError):
        SparseMatrix.from_triplets(2, [0], [1], [bad])


def test_rejects_unsorted_rows_and_out_of_range():
    with pytest.raises(ValueError):
        SparseMatrix(2, [0, 2, 2], [1, 0], [0.5, 0.5])
    with pytest.raises(ValueError):
        SparseMatrix(2, [0, 1, 1], [2], [0.5])
    with pytest.raises(ValueError):
        SparseMatrix(2, [0, 1], [0], [0.5])


def test_arrays_are_read_only():
    m = SparseMatrix.from_dense([[0.0, 0.5], [0.5, 0.0]])
    with pytest.raises(ValueError):
        m.data[0] = 2.0


def test_col_sums_match_stored_values(rng):
    m = random_substochastic(rng, 30)
    for i in range(m.n):
        _, vals = m.column(i)
        assert m.col_sums[i] == pytest.approx(vals.sum(), rel=1e-12, abs=0)


def test_dense_round_trip(rng):
    m = random_substochastic(rng, 12)
    assert SparseMatrix.from_dense(m.to_dense()) == m


def test_monitor_must_be_strictly_positive():
    with pytest.raises(ValueError):
        MonitorVector([1.0, 0.0])
    assert MonitorVector.ones(3).v.tolist() == [1.0, 1.0, 1.0]


# -- matvec -----------------------------------------------------------------------


def test_matvec_zero_matrix():
    assert matvec(SparseMatrix.zeros(2), [1.0, 1.0]).tolist() == [0.0, 0.0]


def test_matvec_single_entry():
    m = SparseMatrix.from_triplets(2, [1], [0], [0.5])
    assert matvec(m, [1.0, 0.0]).tolist() == [0.0, 0.5]


def test_matvec_snake_uniform():
    m, _ = make_fixture("snake")
    # rows: 0 <- 3,4 ; 1 <- 0 (0.5) ; 2 <- 0 (0.5) ; 3 <- 1 ; 4 <- 2
    e = np.full(5, 0.2)
    np.testing.assert_allclose(matvec(m, e), [0.4, 0.1, 0.1, 0.2, 0.2], rtol=0, atol=1e-16)
    np.testing.assert_allclose(matvec(m, e), m.to_dense() @ e, rtol=1e-15)


def test_matvec_dimension_mismatch():
    with pytest.raises(DimensionError):
        matvec(SparseMatrix.zeros(2), [1.0, 2.0, 3.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 15), st.integers(0, 2**32 - 1))
def test_matvec_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    m = random_substochastic(rng, n)
    x = rng.normal(size=n)
    np.testing.assert_allclose(matvec(m, x), m.to_dense() @ x, rtol=1e-13, atol=1e-15)


# -- sigma_v --------------------------------------------------------------------------


@pytest.mark.parametrize("v, x, expected", [
    ((1, 1, 1), (0, 0, 0), 0.0),
    ((1, 1), (0.25, 0.75), 1.0),
    ((2, 3), (1, -1), -1.0),
])
def test_sigma_v_examples(v, x, expected):
    assert sigma_v(MonitorVector(v), x) == expected


def test_sigma_v_dimension_mismatch():
    with pytest.raises(DimensionError):
        sigma_v(MonitorVector.ones(2), [1.0])


# -- is_sigma_decreasing ------------------------------------------------------------------


def test_zero_matrix_is_sigma_decreasing():
    assert is_sigma_decreasing(SparseMatrix.zeros(4), MonitorVector([1.0, 2.0, 3.0, 4.0]))


def test_stochastic_matrix_with_unit_weights():
    m, _ = make_fixture("snake")
    assert is_sigma_decreasing(m, MonitorVector.ones(5))


def test_column_summing_above_one_is_rejected():
    m = SparseMatrix.from_dense([[0.5, 1.0], [0.5, 0.5]])
    assert not is_sigma_decreasing(m, MonitorVector.ones(2))


def test_non_uniform_monitor_changes_verdict():
    # column 0 sends 1.0 to node 1; fine iff v_1 <= v_0
    m = SparseMatrix.from_triplets(2, [1], [0], [1.0])
    assert is_sigma_decreasing(m, MonitorVector([2.0, 1.0]))
    assert not is_sigma_decreasing(m, MonitorVector([1.0, 2.0]))


@pytest.mark.parametrize("seed", range(20))
def test_sigma_decreasing_agrees_with_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 21))
    a = rng.uniform(size=(n, n)) * (rng.uniform(size=(n, n)) < 0.4)
    # some matrices are pushed above the threshold on a random column
    a *= rng.uniform(0.3, 1.4) / max(a.sum(axis=0).max(), 1e-12)
    m = SparseMatrix.from_dense(a)
    mon = MonitorVector(rng.uniform(0.5, 2.0, size=n))
    columnwise = bool(np.all(mon.v @ a <= mon.v + 1e-12))
    assert is_sigma_decreasing(m, mon) == columnwise
    xs = rng.uniform(size=(100, n))
    # unit vectors make the brute force exact for violating columns
    xs = np.vstack([xs, np.eye(n)])
    brute = all(sigma_v(mon, matvec(m, x)) <= sigma_v(mon, x) + 1e-12 for x in xs)
    assert brute == columnwise


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_sigma_v_never_increases_under_repeated_products(n, seed, k):
    rng = np.random.default_rng(seed)
    m = random_substochastic(rng, n, max_sum=1.0)
    mon = MonitorVector.ones(n)
    x = rng.uniform(size=n)
    prev = sigma_v(mon, x)
    for _ in range(k):
        x = matvec(m, x)
        cur = sigma_v(mon, x)
        assert cur <= prev + 1e-12
        prev = cur


# -- DiffusionState and residual ------------------------------------------------------------


def test_fresh_state_has_zero_residual(rng):
    m = random_substochastic(rng, 10)
    b = rng.uniform(size=10)
    state = DiffusionState.initial(b)
    assert residual_linf(m, state, b) == 0.0
    assert state.fluid_l1 == pytest.approx(b.sum(), rel=1e-15)
    assert state.fluid_sigma_v is None


def test_corrupted_history_is_detected():
    m = SparseMatrix.from_dense([[0.0, 0.5], [0.5, 0.0]])
    b = np.array([1.0, 0.0])
    state = DiffusionState.initial(b)
    state.history[0] += 1.0
    # residual = |H - P H| = (1, 0.5)
    assert residual_linf(m, state, b) == 1.0


@given(hnp.arrays(np.float64, st.integers(0, 20), elements=st.floats(-1e3, 1e3)))
def test_state_caches_match_recomputation(x):
    mon = MonitorVector(np.linspace(1.0, 2.0, x.size)) if x.size else None
    state = DiffusionState(x, None, mon)
    assert state.fluid_l1 == pytest.approx(np.abs(x).sum(), rel=1e-12, abs=1e-12)
    assert state.fluid_weighted_l1 == pytest.approx(np.dot(state.weights, np.abs(x)), rel=1e-12, abs=1e-12)


def test_state_copy_is_independent():
    state = DiffusionState([1.0, 2.0])
    other = state.copy()
    other.fluid[0] = 5.0
    other.acc[0] = 0.0
    assert state.fluid[0] == 1.0
    assert state.fluid_l1 == 3.0


def test_state_dimension_checks():
    with pytest.raises(DimensionError):
        DiffusionState([1.0, 2.0], [0.0])
    with pytest.raises(DimensionError):
        DiffusionState([1.0, 2.0], None, MonitorVector.ones(3))
