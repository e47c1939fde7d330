import numpy as np
import pytest

from schatten.core import (
    MatrixStream,
    schatten_norm_exact,
    stream_from_dense,
    trace_power,
)
from schatten.errors import (
    IndexOutOfRangeError,
    InvalidParameterError,
    RequiresPSDError,
)
from schatten.fixtures import random_psd
from schatten.onepass import (
    BilinearSketchState,
    estimate_general,
    median_of_means,
    new_onepass,
    repetitions_for,
    sketch_rows_for,
)


# -- sizing ----------------------------------------------------------------

def test_sketch_rows_follow_contract():
    assert sketch_rows_for(1024, 4) == 64          # 2 * 1024^(1/2)
    assert sketch_rows_for(17, 2) == 2             # exponent 0: constant in n
    assert sketch_rows_for(999_999, 2) == 2
    assert new_onepass(64, 4, 0.15).t == 16


def test_repetitions_follow_contract():
    assert repetitions_for(0.15) == 267            # ceil(6 / 0.0225)
    assert new_onepass(8, 2, 0.3, r=5).r == 5


def test_new_onepass_validation():
    with pytest.raises(InvalidParameterError):
        new_onepass(8, 1, 0.2)
    with pytest.raises(InvalidParameterError):
        new_onepass(8, 2.5, 0.2)
    with pytest.raises(InvalidParameterError):
        new_onepass(8, 4, 0.6)
    with pytest.raises(InvalidParameterError):
        new_onepass(0, 4, 0.2)


# -- debug exactness ----------------------------------------------------------

def test_debug_identity_is_exact_trace_power():
    A = np.diag([1.0, 2.0, 3.0])
    for p, expected in ((2, 14.0), (4, 98.0)):
        st = new_onepass(3, p, 0.3, kind="debug_identity", t=3, r=2, seed=0,
                         assume_psd=True)
        st.ingest_dense(A)
        assert st.estimate().value == expected
        for rho in range(st.r):
            assert st.estimator_value(rho) == expected


def test_debug_identity_single_update_lands_on_cell():
    st = new_onepass(4, 3, 0.3, kind="debug_identity", t=4, r=2, seed=1,
                     assume_psd=True)
    st.apply_update(1, 2, 2.5)
    assert np.all(st.sketches[:, :, 1, 2] == 2.5)
    assert st.cells_touched == st.r * st.p


# -- update mechanics ------------------------------------------------------------

def test_zd_update_touches_exactly_r_times_p_cells():
    for n in (64, 256, 1024):
        st = new_onepass(n, 4, 0.45, kind="zd_sparse", r=24, seed=3)
        before = st.cells_touched
        st.apply_update(n // 2, n // 3, 1.0)
        assert st.cells_touched - before == st.r * st.p


def test_equal_and_opposite_updates_cancel_bitwise():
    st = new_onepass(16, 4, 0.4, kind="zd_sparse", t=6, r=4, seed=9,
                     assume_psd=True)
    st.apply_update(3, 5, 2.0)
    st.apply_update(3, 5, -2.0)
    assert np.all(st.sketches == 0.0)


@pytest.mark.parametrize("kind", ["gaussian", "zd_sparse"])
def test_batch_matches_per_update_ingest(kind):
    rng = np.random.default_rng(0)
    rows = rng.integers(0, 12, 30)
    cols = rng.integers(0, 12, 30)
    vals = rng.normal(size=30)
    one = new_onepass(12, 3, 0.4, kind=kind, t=5, r=3, seed=7, assume_psd=True)
    two = new_onepass(12, 3, 0.4, kind=kind, t=5, r=3, seed=7, assume_psd=True)
    for i, j, v in zip(rows, cols, vals):
        one.apply_update(int(i), int(j), float(v))
    two.ingest(rows, cols, vals)
    assert np.abs(one.sketches - two.sketches).max() < 1e-12
    assert one.cells_touched == two.cells_touched
    assert one.updates_applied == two.updates_applied == 30


@pytest.mark.parametrize("kind", ["gaussian", "zd_sparse"])
def test_linearity_update_order_and_merging(kind):
    # A permuted, split-up update sequence must land on the same sketch as
    # the entry-summed equivalent.
    rng = np.random.default_rng(5)
    rows = rng.integers(0, 10, 40)
    cols = rng.integers(0, 10, 40)
    vals = rng.normal(size=40)
    summed = np.zeros((10, 10))
    np.add.at(summed, (rows, cols), vals)
    nz = np.nonzero(summed)

    shuffled = new_onepass(10, 4, 0.4, kind=kind, t=4, r=2, seed=3)
    order = rng.permutation(40)
    shuffled.ingest(rows[order], cols[order], vals[order])
    merged = new_onepass(10, 4, 0.4, kind=kind, t=4, r=2, seed=3)
    merged.ingest(nz[0], nz[1], summed[nz])
    scale = np.abs(merged.sketches).max()
    assert np.abs(shuffled.sketches - merged.sketches).max() <= 1e-12 * max(scale, 1.0)


def test_dense_ingest_matches_update_list():
    rng = np.random.default_rng(8)
    A = rng.normal(size=(9, 9))
    for kind in ("gaussian", "zd_sparse", "debug_identity"):
        t = 9 if kind == "debug_identity" else 4
        a = new_onepass(9, 3, 0.4, kind=kind, t=t, r=2, seed=11, assume_psd=True)
        b = new_onepass(9, 3, 0.4, kind=kind, t=t, r=2, seed=11, assume_psd=True)
        a.ingest_dense(A)
        nz = np.nonzero(A)
        b.ingest(nz[0], nz[1], A[nz])
        assert np.allclose(a.sketches, b.sketches, atol=1e-10)
        assert a.cells_touched == b.cells_touched


def test_update_bounds_checked():
    st = new_onepass(8, 2, 0.3, seed=0)
    with pytest.raises(IndexOutOfRangeError):
        st.apply_update(8, 0, 1.0)
    with pytest.raises(IndexOutOfRangeError):
        st.ingest([0], [9], [1.0])


# -- estimates -------------------------------------------------------------------

def test_zero_matrix_estimates_zero():
    st = new_onepass(6, 4, 0.3, kind="gaussian", seed=2)
    assert st.estimate().value == 0.0


def test_odd_p_requires_psd_assertion():
    st = new_onepass(6, 3, 0.3, kind="gaussian", seed=2)
    with pytest.raises(RequiresPSDError):
        st.estimate()
    with pytest.raises(InvalidParameterError):
        new_onepass(6, 4, 0.3, seed=0, assume_psd=True).estimate("median")


def test_estimate_reports_metadata():
    st = new_onepass(16, 4, 0.3, kind="zd_sparse", seed=5)
    st.apply_update(0, 1, 1.0)
    est = st.estimate()
    assert est.sketch_cells == st.r * st.p * st.t * st.t
    assert est.updates == 1
    assert est.extra["cells_touched"] == st.r * st.p
    assert est.extra["estimated_bits"] == 64 * est.sketch_cells
    assert set(est.aggregates) == {"mean", "median_of_means"}


def test_median_of_means_grouping():
    values = np.array([1.0, 1.0, 1.0, 100.0])
    assert median_of_means(values, 1) == 1.0
    assert median_of_means(values, 4) == np.mean(values)
    with pytest.raises(InvalidParameterError):
        median_of_means(values, 0)


def test_single_repetition_unbiased_for_trace_power():
    # Sample mean over seeds within 4 standard errors of Tr(A^p).
    n, p, t = 16, 3, 4
    A = random_psd(n, "uniform", seed=21)
    target = trace_power(A, p)
    draws = np.empty(4000)
    for seed in range(draws.size):
        st = BilinearSketchState(n, p, t, 1, "gaussian", seed, assume_psd=True)
        st.ingest_dense(A)
        draws[seed] = st.estimator_value(0)
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - target) <= 4 * se


def test_zd_variance_dominated_by_gaussian_on_nonnegative_input():
    # Sparse sign sketches cannot beat Gaussians in variance on entrywise
    # non-negative symmetric inputs (1.2 slack absorbs Monte-Carlo noise).
    rng = np.random.default_rng(42)
    n, t, p = 16, 4, 3
    M = np.abs(rng.normal(size=(n, n)))
    A = (M + M.T) / 2.0
    nz = np.nonzero(A)
    vals = A[nz]

    def draws(kind):
        out = np.empty(10_000)
        for seed in range(out.size):
            st = BilinearSketchState(n, p, t, 1, kind, seed, assume_psd=True)
            if kind == "gaussian":
                st.ingest_dense(A)
            else:
                st.ingest(nz[0], nz[1], vals)
            out[seed] = st.estimator_value(0)
        return out

    var_gauss = draws("gaussian").var()
    var_zd = draws("zd_sparse").var()
    assert var_zd <= 1.2 * var_gauss


# -- general (non-PSD) path --------------------------------------------------------

def test_estimate_general_debug_identity_exact():
    A = np.diag([2.0, 3.0])
    stream = stream_from_dense(A, mode="turnstile")
    est = estimate_general(stream, 4, 0.3, kind="debug_identity", t=4, r=2,
                           seed=0)
    assert est.value == pytest.approx(97.0, rel=1e-12)


def test_estimate_general_zero_matrix():
    stream = MatrixStream.from_updates(3, 2, "turnstile", [])
    est = estimate_general(stream, 4, 0.3, kind="gaussian", seed=1)
    assert est.value == 0.0


def test_estimate_general_rejects_odd_p():
    stream = MatrixStream.from_updates(2, 2, "turnstile", [(0, 0, 1.0)])
    with pytest.raises(RequiresPSDError):
        estimate_general(stream, 3, 0.3)


def test_estimate_general_rectangular_accuracy():
    # 100 seeds on a random 48 x 32 matrix at eps = 0.2: at least 85 inside
    # the band around the oracle value.
    rng = np.random.default_rng(17)
    A = rng.normal(size=(48, 32))
    stream = stream_from_dense(A, mode="turnstile")
    target = schatten_norm_exact(A, 4)
    hits = 0
    for seed in range(100):
        est = estimate_general(stream, 4, 0.2, kind="zd_sparse", seed=seed)
        hits += abs(est.value - target) <= 0.2 * target
    assert hits >= 85
