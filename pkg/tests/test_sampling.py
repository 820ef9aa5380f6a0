import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from falkon.diagnostics import effective_dimension
from falkon.kernels import KernelSpec, kernel_square
from falkon.sampling import (
    CenterSelection,
    LeverageScores,
    exact_leverage_scores,
    load_scores_file,
    multinomial_counts,
    sample_leverage,
    sample_uniform,
)


def test_uniform_full_subset_is_permutation():
    sel = sample_uniform(10, 10, seed=1)
    np.testing.assert_array_equal(np.sort(sel.source_indices), np.arange(10))
    np.testing.assert_array_equal(sel.counts, 1)
    np.testing.assert_array_equal(sel.d_diag, 1.0)
    assert sel.is_uniform


def test_uniform_single_and_deterministic():
    sel = sample_uniform(7, 1, seed=4)
    assert sel.M == 1 and 0 <= sel.source_indices[0] < 7
    np.testing.assert_array_equal(sample_uniform(100, 20, 9).source_indices, sample_uniform(100, 20, 9).source_indices)


def test_uniform_rejects_M_above_n():
    with pytest.raises(ValueError):
        sample_uniform(5, 6)


@given(st.integers(1, 300), st.data())
def test_uniform_without_replacement(n, data):
    M = data.draw(st.integers(1, n))
    sel = sample_uniform(n, M, seed=data.draw(st.integers(0, 2**32 - 1)))
    assert np.unique(sel.source_indices).size == M
    assert sel.source_indices.min() >= 0 and sel.source_indices.max() < n


def test_exact_scores_identity_and_limit():
    n, lam = 8, 0.25
    np.testing.assert_allclose(exact_leverage_scores(np.eye(n), lam).scores, 1.0 / (1.0 + lam * n), rtol=1e-14)
    assert np.all(exact_leverage_scores(np.eye(n), 1e8 / n).scores < 1e-6)


def test_exact_scores_sum_matches_trace(rng):
    X = rng.standard_normal((80, 3))
    K = kernel_square(KernelSpec.gaussian(1.0), X)
    lam = 1e-3
    oracle = np.trace(K @ np.linalg.inv(K + lam * 80 * np.eye(80)))
    s = exact_leverage_scores(K, lam)
    assert abs(s.scores.sum() - oracle) <= 1e-8
    assert abs(s.scores.sum() - effective_dimension(K, lam)) <= 1e-8
    assert np.all((s.scores > 0) & (s.scores <= 1))


def test_exact_scores_argument_errors():
    with pytest.raises(ValueError):
        exact_leverage_scores(np.eye(3), 0.0)
    with pytest.raises(ValueError, match="cap"):
        exact_leverage_scores(np.eye(3), 1.0, cap=2)


def test_multinomial_point_mass_and_single_draw():
    ind, counts = multinomial_counts(25, [1.0, 0.0, 0.0], seed=0)
    np.testing.assert_array_equal(ind, [0])
    np.testing.assert_array_equal(counts, [25])
    ind, counts = multinomial_counts(1, np.full(4, 0.25), seed=2)
    assert ind.size == 1 and counts[0] == 1


def test_multinomial_uniform_statistics():
    M, n = 100_000, 10
    ind, counts = multinomial_counts(M, np.full(n, 1.0 / n), seed=11)
    np.testing.assert_array_equal(ind, np.arange(n))
    sd = np.sqrt(M * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(counts - M / n) <= 5 * sd)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(1, 500), st.integers(0, 2**32 - 1))
def test_multinomial_properties(weights, M, seed):
    w = np.array(weights)
    if w.sum() == 0:
        w[0] = 1.0
    p = w / w.sum()
    ind, counts = multinomial_counts(M, p, seed)
    assert counts.sum() == M
    assert np.all(p[ind] > 0)
    assert np.all(np.diff(ind) > 0)


def test_multinomial_errors():
    with pytest.raises(ValueError, match="zero"):
        multinomial_counts(3, [0.0, 0.0])
    with pytest.raises(ValueError, match="sum"):
        multinomial_counts(3, [0.5, 0.6])
    with pytest.raises(ValueError):
        multinomial_counts(3, [-0.5, 1.5])


def test_leverage_equal_scores():
    n = 50
    sel = sample_leverage(np.full(n, 0.3), 40, n=n, seed=5)
    np.testing.assert_allclose(sel.probs, 1.0 / n, rtol=1e-15)
    np.testing.assert_allclose(sel.d_diag, 1.0 / np.sqrt(sel.counts), rtol=1e-14)
    assert sel.n_draws == 40 and sel.scheme == "leverage"


def test_leverage_dominant_score():
    n, M = 20, 30
    s = np.full(n, 1e-15)
    s[3] = 1.0
    sel = sample_leverage(LeverageScores(s, lam=0.1), M, n=n, seed=0, q_factor=2.0)
    np.testing.assert_array_equal(sel.source_indices, [3])
    np.testing.assert_array_equal(sel.counts, [M])
    p = 1.0 / (1.0 + (n - 1) * 1e-15)
    assert sel.d_diag[0] == pytest.approx(np.sqrt(1.0 / (n * p * M)), rel=1e-14)
    assert (sel.lam, sel.q_factor) == (0.1, 2.0)


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 4.0))
def test_leverage_weights_and_perturbation(seed, q):
    rng = np.random.default_rng(seed)
    n = 60
    s = rng.uniform(0.01, 1.0, n)
    # any scores within a factor q of the exact ones still give a valid selection
    s = s * np.exp(rng.uniform(-np.log(q), np.log(q), n))
    sel = sample_leverage(s, 45, n=n, seed=seed)
    p = s / s.sum()
    assert sel.counts.sum() == 45
    assert np.all(np.abs(sel.d_diag ** 2 * n * p[sel.source_indices] * sel.counts - 1) < 1e-12)
    assert np.all(sel.d_diag > 0)


def test_selection_validation():
    with pytest.raises(ValueError):
        CenterSelection(np.array([0, 1]), np.array([1, 0]), np.ones(2))
    with pytest.raises(ValueError):
        CenterSelection(np.array([0, 1]), np.array([1, 1]), np.array([1.0, 0.0]))


def test_centers_of_sparse(rng):
    import scipy.sparse as sp

    X = rng.standard_normal((6, 3))
    sel = CenterSelection.from_indices([4, 1])
    np.testing.assert_array_equal(sel.centers_of(sp.csr_matrix(X)), X[[4, 1]])


def test_scores_file(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("0.5\n\n0.25\n0.125\n")
    np.testing.assert_array_equal(load_scores_file(p, 3).scores, [0.5, 0.25, 0.125])
    with pytest.raises(ValueError, match="expected 4"):
        load_scores_file(p, 4)
    p.write_text("0.5\nabc\n")
    with pytest.raises(ValueError, match=":2"):
        load_scores_file(p)
