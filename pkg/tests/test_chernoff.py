import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphfold.chernoff import (SPARSE, LimitLaw, all_subsets, chernoff_divergence,
                                chernoff_gaussians, chernoff_gmsbm, limiting_covariance_left,
                                limiting_covariance_right, sigma_y, subset_comparison)
from graphfold.errors import DimensionError, ParameterError, SingularityError
from graphfold.experiments import chernoff_example, identical_layers_check, monotone_subset_metric

FIG1_B = np.array([[0.42, 0.42], [0.42, 0.5]])
FIG1_PI = np.array([0.6, 0.4])
EX_B1 = np.array([[0.67, 0.46], [0.46, 0.36]])
EX_B2 = np.array([[0.98, 0.49], [0.49, 0.10]])

# frozen from tests/oracles/sigma_y_mc.py (10^6 categorical draws)
SIGMA_Y_MC = np.array([0.14599703160000005, 0.09760296840000003])
SIGMA_Y_SE = 0.000119372

# frozen from tests/oracles/chernoff_grid.py: (case, log term, value)
GRID_ORACLE = [
    (0, True, 0.4422573605649665), (0, False, 0.13082747359805807),
    (1, True, 0.32783276237330017), (1, False, 0.04345207463892393),
    (2, True, 0.8030058058871102), (2, False, 0.06160125773617022),
]

seeds = st.integers(0, 2**31)


def random_law(rng, d, mean=None):
    a = rng.standard_normal((d, d))
    mu = rng.standard_normal(d) if mean is None else mean
    return LimitLaw(mu, a @ a.T + 0.5 * np.eye(d))


# --------------------------------------------------------- limit laws

@pytest.mark.parametrize("p", [0.1, 0.42, 0.9])
def test_scalar_case(p):
    left = limiting_covariance_left([[[p]]], [[1.0]])
    right = limiting_covariance_right([[p]], [1.0])
    assert left.covariance[0, 0] == pytest.approx((1 - p) / p, rel=1e-12)
    assert right.covariance[0, 0] == pytest.approx((1 - p) / p, rel=1e-12)


def test_sigma_y_against_monte_carlo():
    diag = np.diag(sigma_y([FIG1_B], [FIG1_PI], x=0))
    np.testing.assert_allclose(diag, [0.6 * 0.42 * 0.58, 0.4 * 0.42 * 0.58], rtol=1e-12)
    assert np.all(np.abs(diag - SIGMA_Y_MC) < 3 * SIGMA_Y_SE)


def test_sparse_regime_entries_larger():
    dense = np.diag(sigma_y([FIG1_B, EX_B2], [FIG1_PI, FIG1_PI], x=1))
    sparse = np.diag(sigma_y([FIG1_B, EX_B2], [FIG1_PI, FIG1_PI], x=1, regime=SPARSE))
    assert np.all(sparse > dense)
    with pytest.raises(ParameterError):
        sigma_y([FIG1_B], [FIG1_PI], regime="medium")


def test_right_equals_left_for_symmetric_tied():
    for y in range(2):
        left = limiting_covariance_left([EX_B1], [FIG1_PI], x=y)
        right = limiting_covariance_right(EX_B1, FIG1_PI, y=y)
        np.testing.assert_allclose(left.covariance, right.covariance, rtol=1e-10)


def test_singular_inputs_raise():
    sing = np.array([[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(SingularityError):
        limiting_covariance_right(sing, [0.5, 0.5])
    with pytest.raises(SingularityError):
        limiting_covariance_left([sing], [[0.5, 0.5]])
    with pytest.raises(DimensionError):
        limiting_covariance_left([FIG1_B], [[1.0]])


def test_left_covariance_is_psd_and_symmetric():
    law = limiting_covariance_left([EX_B1, EX_B2], [FIG1_PI, FIG1_PI], c_r=[1.0, 0.5], x=1)
    np.testing.assert_allclose(law.covariance, law.covariance.T)
    assert np.linalg.eigvalsh(law.covariance).min() > 0
    np.testing.assert_array_equal(law.mean, [0, 1])


# ----------------------------------------------------- Gaussian Chernoff

def test_identical_laws_give_zero():
    law = random_law(np.random.default_rng(0), 3)
    assert abs(chernoff_gaussians(law, law)[0]) < 1e-14


def test_identity_covariance_closed_form():
    mu1, mu2 = np.array([1.0, 2.0]), np.array([-0.5, 0.0])
    value, t = chernoff_gaussians(LimitLaw(mu1, np.eye(2)), LimitLaw(mu2, np.eye(2)))
    assert value == pytest.approx(np.sum((mu1 - mu2) ** 2) / 8, rel=1e-12)
    assert t == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("case,log_term,expected", GRID_ORACLE)
def test_against_dense_grid_oracle(case, log_term, expected):
    rng = np.random.default_rng(99)
    laws = None
    for c in range(case + 1):
        d = 2 + c
        a1, a2 = rng.standard_normal((d, d)), rng.standard_normal((d, d))
        s1, s2 = a1 @ a1.T + 0.5 * np.eye(d), a2 @ a2.T + 0.5 * np.eye(d)
        mu = rng.standard_normal(d)
        laws = LimitLaw(mu, s1), LimitLaw(np.zeros(d), s2)
    value, _ = chernoff_gaussians(*laws, include_log_term=log_term)
    # the grid can only underestimate the supremum
    assert value >= expected - 1e-12
    assert value - expected < 1e-6


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 4), st.booleans())
def test_linear_map_invariance(seed, d, log_term):
    rng = np.random.default_rng(seed)
    f1, f2 = random_law(rng, d), random_law(rng, d)
    m = rng.standard_normal((d, d)) + 3 * np.eye(d)
    g1 = LimitLaw(m @ f1.mean, m @ f1.covariance @ m.T)
    g2 = LimitLaw(m @ f2.mean, m @ f2.covariance @ m.T)
    a = chernoff_gaussians(f1, f2, log_term)[0]
    b = chernoff_gaussians(g1, g2, log_term)[0]
    assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.01, 0.99), st.booleans())
def test_divergence_swap_symmetry(seed, t, log_term):
    rng = np.random.default_rng(seed)
    f1, f2 = random_law(rng, 3), random_law(rng, 3)
    a = chernoff_divergence(f1, f2, t, log_term)
    b = chernoff_divergence(f2, f1, 1 - t, log_term)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-14)
    assert chernoff_gaussians(f1, f2, log_term)[0] >= a - 1e-12


# ----------------------------------------------------------- block models

def test_two_layer_example_ratios():
    r1, r2 = chernoff_example()
    assert abs(r1 / 11.98 - 1) <= 0.02
    assert abs(r2 / 0.96 - 1) <= 0.02


def test_identical_rows_give_zero():
    b = np.array([[0.3, 0.3, 0.6], [0.3, 0.3, 0.6], [0.6, 0.6, 0.2]])
    b2 = np.array([[0.5, 0.5, 0.1], [0.5, 0.5, 0.1], [0.2, 0.2, 0.7]])
    rep = chernoff_gmsbm([b, b2], [[1 / 3] * 3] * 2)
    assert rep.value == 0.0 and rep.critical_pair == (0, 1)
    assert rep.pairwise[0, 2] > 0


def test_report_invariants():
    rep = chernoff_gmsbm([EX_B1, EX_B2], FIG1_PI)
    assert rep.value == rep.pairwise[rep.critical_pair]
    assert np.all(rep.pairwise >= 0)
    assert 0 < rep.t_star[0, 1] < 1
    assert rep.t_star[0, 1] + rep.t_star[1, 0] == pytest.approx(1)
    with pytest.raises(ParameterError):
        chernoff_gmsbm([EX_B1], FIG1_PI, truncated=False)
    full = chernoff_gmsbm([EX_B1], FIG1_PI, truncated=False, n=1000)
    assert full.value > 0


@pytest.mark.parametrize("k", [2, 3, 5])
def test_identical_layers_scale_linearly(k):
    one = chernoff_gmsbm([EX_B1], FIG1_PI).value
    many = chernoff_gmsbm([EX_B1] * k, FIG1_PI).value
    assert many == pytest.approx(k * one, rel=1e-8)
    for res in subset_comparison([EX_B1] * k, FIG1_PI, subsets=all_subsets(k)):
        assert res.ratio == pytest.approx(k / len(res.subset), rel=1e-8)


def test_rank_deficient_subset_flagged():
    rank_one = np.outer([0.4, 0.6], [0.5, 0.7])
    res = subset_comparison([rank_one, EX_B1], FIG1_PI, subsets=[(0,), (1,), (0, 1)])
    assert res[0].ratio is None and res[0].rank == 1
    assert res[1].ratio is not None
    assert res[2].ratio == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        subset_comparison([EX_B1], FIG1_PI, subsets=[(3,)])


def test_identical_layers_never_worse():
    for rec in identical_layers_check(seed=1, trials=20):
        assert rec["min_ratio"] >= 1 - 1e-9


def test_monotone_subset_metric_tracked():
    metric = monotone_subset_metric(seed=0, trials=20)
    print(f"monotone subset structure held in {metric['fraction']:.0%} of trials")
    assert 0 <= metric["fraction"] <= 1
    assert len(metric["trials"]) == 20
