import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordinalviews.core_model import (
    ModelConfig,
    ReturnsPanel,
    TotalOrder,
    estimate_covariance,
    pick_matrix_from_order,
    read_panel_csv,
    reverse_optimize_prior,
    write_panel_csv,
)
from ordinalviews.errors import DimensionError
from ordinalviews.harness import generate_synthetic_panel


def _panel(returns):
    returns = np.asarray(returns, dtype=float)
    T, n = returns.shape
    return ReturnsPanel(tuple(str(i) for i in range(T)), returns, tuple(f"a{i}" for i in range(n)))


# --- TotalOrder ---------------------------------------------------------------


def test_total_order_round_trips():
    o = TotalOrder.from_ranking([2, 0, 1])
    assert o.ranks.tolist() == [2, 3, 1]
    assert o.ranking.tolist() == [2, 0, 1]
    assert o.reversed().ranking.tolist() == [1, 0, 2]
    assert TotalOrder([2, 3, 1]) == o and hash(TotalOrder([2, 3, 1])) == hash(o)


def test_total_order_rejects_non_permutations():
    with pytest.raises(ValueError):
        TotalOrder([1, 1, 2])
    with pytest.raises(ValueError):
        TotalOrder.from_ranking([0, 0, 1])


def test_from_scores_breaks_ties_towards_lower_index():
    o = TotalOrder.from_scores([0.1, 0.3, 0.3, -1.0])
    assert o.ranking.tolist() == [1, 2, 0, 3]


# --- ReturnsPanel -------------------------------------------------------------


def test_panel_validation():
    with pytest.raises(DimensionError):
        _panel([[0.01, 0.02]])
    with pytest.raises(ValueError):
        _panel([[0.01, np.nan], [0.0, 0.0]])
    with pytest.raises(ValueError):
        _panel([[0.01, -1.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        ReturnsPanel(("a", "b"), np.zeros((2, 2)), ("x", "x"))


def test_levels_convert_to_holding_period_returns():
    p = ReturnsPanel.from_levels(["d0", "d1", "d2"], [[100.0, 50.0], [110.0, 50.0], [99.0, 55.0]], ["a", "b"])
    np.testing.assert_allclose(p.returns, [[0.1, 0.0], [-0.1, 0.1]])
    assert p.dates == ("d1", "d2")


def test_minimal_panel_csv_round_trip_is_bit_exact(tmp_path):
    p = generate_synthetic_panel(5, 2, seed=11)
    path = tmp_path / "p.csv"
    write_panel_csv(p, path)
    q = read_panel_csv(path)
    assert q.dates == p.dates and q.asset_ids == p.asset_ids
    assert np.array_equal(q.returns, p.returns)


def test_read_panel_excludes_columns(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("date,a,rf,b\n2000-01,0.01,0.001,0.02\n2000-02,0.03,0.001,0.00\n")
    p = read_panel_csv(path, exclude=["rf"])
    assert p.asset_ids == ("a", "b")
    np.testing.assert_array_equal(p.returns, [[0.01, 0.02], [0.03, 0.0]])


# --- covariance ---------------------------------------------------------------


def test_covariance_hand_computed():
    sigma = estimate_covariance(_panel([[0.01, 0.02], [0.03, 0.02]]), repair=False)
    np.testing.assert_allclose(sigma, [[2e-4, 0.0], [0.0, 0.0]], atol=1e-18)


def test_covariance_repair_of_identical_columns():
    col = np.array([0.01, -0.02, 0.03, 0.0])
    raw = estimate_covariance(_panel(np.c_[col, col]), repair=False)
    assert raw[0, 1] == pytest.approx(raw[0, 0])
    fixed = estimate_covariance(_panel(np.c_[col, col]))
    assert np.linalg.eigvalsh(fixed)[0] > 0
    np.linalg.cholesky(fixed)


def test_covariance_needs_two_rows():
    with pytest.raises(DimensionError):
        estimate_covariance(np.zeros((1, 3)))


def test_covariance_monte_carlo_consistency():
    rng = np.random.default_rng(5)
    sd = np.array([0.02, 0.05, 0.1])
    T = 10_000
    sigma = estimate_covariance(rng.standard_normal((T, 3)) * sd)
    true = np.diag(sd**2)
    # standard error of a sample (co)variance of normals: sqrt((s_ii s_jj + s_ij^2) / (T - 1))
    se = np.sqrt((np.outer(sd**2, sd**2) + true**2) / (T - 1))
    assert np.all(np.abs(sigma - true) < 5 * se)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(2, 8), st.integers(0, 2**31 - 1))
def test_covariance_is_always_spd_after_repair(n, T, seed):
    rng = np.random.default_rng(seed)
    r = rng.normal(0, 0.05, (T, n))
    if n > 1:
        r[:, -1] = r[:, 0]  # force rank deficiency
    sigma = estimate_covariance(r)
    np.testing.assert_allclose(sigma, sigma.T, rtol=1e-12, atol=0)
    np.linalg.cholesky(sigma)


# --- prior --------------------------------------------------------------------


def test_prior_examples():
    np.testing.assert_allclose(reverse_optimize_prior(np.eye(4), delta=3.0), [0.75] * 4)
    np.testing.assert_allclose(reverse_optimize_prior(np.diag([1.0, 2.0]), [0.5, 0.5], delta=2.0), [1.0, 2.0])
    np.testing.assert_array_equal(reverse_optimize_prior(np.diag([1.0, 2.0]), [0.3, 0.7], delta=0.0), [0.0, 0.0])


def test_prior_rejects_off_simplex_reference():
    with pytest.raises(ValueError):
        reverse_optimize_prior(np.eye(2), [0.7, 0.7])
    with pytest.raises(DimensionError):
        reverse_optimize_prior(np.eye(2), [1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.floats(0.1, 10), st.floats(0.1, 10), st.integers(0, 2**31 - 1))
def test_prior_is_linear_in_delta_and_reference(n, d1, d2, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    sigma = a @ a.T + n * np.eye(n)
    w1 = rng.dirichlet(np.ones(n))
    w2 = rng.dirichlet(np.ones(n))
    np.testing.assert_allclose(
        reverse_optimize_prior(sigma, w1, d1 + d2),
        reverse_optimize_prior(sigma, w1, d1) + reverse_optimize_prior(sigma, w1, d2),
    )
    mix = 0.3 * w1 + 0.7 * w2
    np.testing.assert_allclose(
        reverse_optimize_prior(sigma, mix, d1),
        0.3 * reverse_optimize_prior(sigma, w1, d1) + 0.7 * reverse_optimize_prior(sigma, w2, d1),
    )


# --- pick matrix --------------------------------------------------------------


def test_pick_matrix_adjacent_chain():
    p = pick_matrix_from_order(TotalOrder.from_ranking([0, 1, 2]))
    np.testing.assert_array_equal(p, [[1, -1, 0], [0, 1, -1]])


def test_pick_matrix_of_reversal():
    # ranking c, b, a
    p = pick_matrix_from_order(TotalOrder.from_ranking([2, 1, 0]))
    np.testing.assert_array_equal(p, [[0, -1, 1], [-1, 1, 0]])


def test_pick_matrix_needs_two_assets():
    with pytest.raises(DimensionError):
        pick_matrix_from_order(TotalOrder([1]))


@settings(max_examples=100, deadline=None)
@given(st.permutations(list(range(7))), st.lists(st.floats(0.01, 5), min_size=7, max_size=7))
def test_pick_matrix_accepts_consistent_vectors(ranking, gaps):
    o = TotalOrder.from_ranking(ranking)
    v = np.empty(7)
    # strictly decreasing along the ranking
    v[o.ranking] = -np.cumsum(gaps)
    p = pick_matrix_from_order(o)
    assert np.all(p @ v > 0)
    assert np.all((p == 1).sum(axis=1) == 1) and np.all((p == -1).sum(axis=1) == 1)


# --- config -------------------------------------------------------------------


def test_model_config_defaults_and_validation():
    cfg = ModelConfig(c=0.25)
    assert cfg.tau == pytest.approx(0.75)
    assert cfg.shrink == pytest.approx(0.75)
    assert ModelConfig(c=10.0, tau=0.5).shrink == pytest.approx(0.5 / 10.5)
    for bad in (dict(delta=0.0), dict(c=0.0), dict(c=1.5), dict(c=0.5, tau=-1.0)):
        with pytest.raises(ValueError):
            ModelConfig(**bad)
