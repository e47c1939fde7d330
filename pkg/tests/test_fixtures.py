import numpy as np
import pytest

from schatten.core import gram_stream, materialize, schatten_norm_exact, singular_values
from schatten.errors import InvalidParameterError
from schatten.fixtures import (
    cycle_laplacian,
    cycle_union_incidence,
    indicator_rows,
    random_psd,
    random_sparse,
    schatten_gap,
)


# -- cycle Laplacians ----------------------------------------------------------

def test_cycle_laplacian_known_spectra():
    _, spec4 = cycle_laplacian(4, 1)
    assert np.allclose(np.sort(spec4), [0.0, 2.0, 2.0, 4.0], atol=1e-12)
    _, spec32 = cycle_laplacian(3, 2)
    assert np.allclose(np.sort(spec32), [0, 0, 3, 3, 3, 3], atol=1e-12)


def test_cycle_laplacian_oracle_cross_check():
    for m in (3, 7, 12):
        A, spectrum = cycle_laplacian(m, 1)
        got = singular_values(A).singular_values
        assert np.abs(got - spectrum).max() < 1e-9


def test_cycle_laplacian_validation():
    with pytest.raises(InvalidParameterError):
        cycle_laplacian(2, 1)
    with pytest.raises(InvalidParameterError):
        cycle_laplacian(3, 0)


# -- incidence streams -----------------------------------------------------------

def test_incidence_rows_are_two_sparse_and_sorted():
    s = cycle_union_incidence(5, 2)
    assert s.mode == "roworder"
    counts = np.bincount(s.rows, minlength=s.n)
    assert np.all(counts == 2)
    assert np.all(np.abs(s.vals) == 1.0)


def test_incidence_gram_is_the_cycle_laplacian():
    for m, c in ((3, 1), (4, 1), (6, 2)):
        s = cycle_union_incidence(m, c)
        L, _ = cycle_laplacian(m, c)
        assert np.array_equal(materialize(gram_stream(s)), L)


def test_incidence_norm_matches_laplacian_half_power():
    s = cycle_union_incidence(3, 1)
    M = materialize(s)
    L, _ = cycle_laplacian(3, 1)
    lhs = schatten_norm_exact(M, 3)
    rhs = schatten_norm_exact(L, 1.5)
    assert lhs == pytest.approx(rhs, rel=1e-9)


# -- spectral gap between cycle types ------------------------------------------------

# Exact ratios (2 copies of the 5-cycle vs one 10-cycle), frozen from the
# closed-form spectrum 4 sin^2(j pi / m); the oracle must reproduce them.
GAP_RATIOS = {
    0.5: 0.974914369,
    1.5: 1.002024433,
    2.5: 0.999333318,
    3.5: 1.000639920,
}


@pytest.mark.parametrize("p,expected", sorted(GAP_RATIOS.items()))
def test_schatten_gap_matches_closed_form(p, expected):
    _, _, ratio = schatten_gap(2, p)
    assert ratio == pytest.approx(expected, abs=1e-7)


def test_schatten_gap_rejects_integer_p():
    with pytest.raises(InvalidParameterError):
        schatten_gap(2, 2.0)
    with pytest.raises(InvalidParameterError):
        schatten_gap(2, 3)


def test_schatten_gap_ratio_independent_of_n():
    _, _, r1 = schatten_gap(2, 1.5, n=10)
    _, _, r2 = schatten_gap(2, 1.5, n=20)
    assert r1 == pytest.approx(r2, abs=1e-9)


def test_schatten_gap_requires_divisible_n():
    with pytest.raises(InvalidParameterError):
        schatten_gap(2, 1.5, n=12)


# -- indicator rows ---------------------------------------------------------------

def test_indicator_disjoint_sets_give_unit_singular_values():
    n = 8
    s = indicator_rows([{0, 1, 2}, {3, 4}, {5, 6, 7}], n)
    A = materialize(s)
    assert schatten_norm_exact(A, 3.0) == pytest.approx(n, abs=1e-9)


def test_indicator_shared_element_gives_sqrt_k():
    k, n = 4, 10
    s = indicator_rows([{2} for _ in range(k)], n)
    sigma = singular_values(materialize(s)).singular_values
    assert sigma[0] == pytest.approx(np.sqrt(k), abs=1e-9)
    assert schatten_norm_exact(materialize(s), 6) == pytest.approx(k ** 3, rel=1e-9)


def test_indicator_empty_sets_and_overflow():
    s = indicator_rows([], 4)
    assert schatten_norm_exact(materialize(s), 2) == 0.0
    with pytest.raises(InvalidParameterError):
        indicator_rows([{0, 1}, {0, 1}, {0}], 4)
    with pytest.raises(InvalidParameterError):
        indicator_rows([{5}], 4)


# -- random fixtures -----------------------------------------------------------------

def test_random_psd_is_symmetric_and_psd():
    A = random_psd(12, "uniform", seed=9)
    assert np.array_equal(A, A.T)
    assert np.linalg.eigvalsh(A).min() >= -1e-9


def test_random_psd_prescribed_spectrum():
    A = random_psd(3, "prescribed", seed=1, eigenvalues=[1.0, 2.0, 3.0])
    assert schatten_norm_exact(A, 4) == pytest.approx(98.0, rel=1e-9)
    got = singular_values(A).singular_values
    assert np.allclose(got, [3.0, 2.0, 1.0], atol=1e-9)


def test_random_psd_powerlaw_profile():
    A = random_psd(6, "powerlaw", seed=2, alpha=1.0)
    got = singular_values(A).singular_values
    want = (np.arange(6) + 1.0) ** -1.0
    assert np.allclose(got, want, atol=1e-9)


def test_random_psd_validation():
    with pytest.raises(InvalidParameterError):
        random_psd(3, "prescribed", eigenvalues=[1.0])
    with pytest.raises(InvalidParameterError):
        random_psd(3, "nope")


def test_random_sparse_exact_degree_counts():
    for s_a in (1, 2, 3):
        stream = random_sparse(40, s_a, seed=s_a)
        A = materialize(stream)
        assert np.all((A != 0).sum(axis=0) == s_a)
        assert np.all((A != 0).sum(axis=1) == s_a)
        mags = np.abs(A[A != 0])
        assert mags.min() >= 0.5 and mags.max() <= 1.5


def test_random_sparse_deterministic():
    a = materialize(random_sparse(25, 2, seed=4))
    b = materialize(random_sparse(25, 2, seed=4))
    assert np.array_equal(a, b)
    with pytest.raises(InvalidParameterError):
        random_sparse(3, 4)
