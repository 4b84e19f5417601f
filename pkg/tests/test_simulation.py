from itertools import combinations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from greedyshift import (
    ScenarioConfig,
    WeightVector,
    build_path,
    build_weights,
    draw_dataset,
    make_population,
    raw_importance,
    regression_function,
    true_importance_model,
)


def cfg(**kw):
    base = dict(n=50, p=8, xi=1.0, shift_mean=0.3, shift_cov=0.2, seed=0)
    base.update(kw)
    return ScenarioConfig(**base)


# ---------------------------------------------------------------------------
# population construction
# ---------------------------------------------------------------------------


def test_no_shift_gives_unit_importance_and_oga_reduction():
    pop = make_population(cfg(shift_mean=0.0, shift_cov=0.0))
    data, x_te = draw_dataset(pop, 50, seed=3)
    model = true_importance_model(pop)
    assert np.all(raw_importance(model, data.x) == 1.0)
    w = build_weights(model, data.x, b_n=2.0)
    assert np.all(w.w == 1.0)
    weighted = build_path(data, w, 5)
    plain = build_path(data, WeightVector.unit(50), 5)
    assert weighted.models == plain.models
    assert_allclose(weighted.sigma2_trace, plain.sigma2_trace, rtol=0)


def test_xi_zero_coefficients_decay_like_one_over_j():
    pop = make_population(cfg(xi=0.0, p=12))
    ratios = pop.beta * np.arange(1, 13)
    assert_allclose(ratios, ratios[0], rtol=1e-12)
    assert np.linalg.norm(pop.beta) == pytest.approx(2.0)


def c6_ratio(beta, subset, xi):
    bj = beta[list(subset)]
    l2 = np.linalg.norm(bj)
    if l2 == 0:
        return 0.0
    return np.abs(bj).sum() / l2 ** (2 * xi / (2 * xi + 1))


@pytest.mark.parametrize("xi,cap", [(0.0, 6.0), (0.5, 3.0), (1.0, 2.0)])
def test_sparsity_condition_holds_with_prefix_witnessed_constant(xi, cap):
    pop = make_population(cfg(xi=xi, p=20))
    prefixes = [tuple(range(k + 1)) for k in range(20)]
    c_prefix = max(c6_ratio(pop.beta, j, xi) for j in prefixes)
    rng = np.random.default_rng(1)
    for _ in range(200):
        subset = rng.choice(20, size=rng.integers(1, 21), replace=False)
        assert c6_ratio(pop.beta, subset, xi) <= c_prefix + 1e-12
    assert c_prefix <= cap
    # exhaustively confirm the prefix witness on a small instance
    small = make_population(cfg(xi=xi, p=8))
    c_all = max(
        c6_ratio(small.beta, j, xi)
        for k in range(1, 9)
        for j in combinations(range(8), k)
    )
    c_pre_small = max(c6_ratio(small.beta, tuple(range(k + 1)), xi) for k in range(8))
    assert c_all == pytest.approx(c_pre_small, rel=1e-12)


def test_shift_patterns_and_spd_floor():
    first = make_population(cfg(shift_mean=0.4, p=10))
    assert_allclose(first.mu_te, [0.4] + [0.0] * 9)
    allc = make_population(cfg(shift_mean=0.4, p=10, shift_pattern="all"))
    assert_allclose(allc.mu_te, np.full(10, 0.4))

    pop = make_population(cfg(p=15, shift_cov=0.2))
    eig_min = np.linalg.eigvalsh(pop.cov_te).min()
    assert pop.cov_te_min_eig is not None
    assert eig_min >= pop.cov_te_min_eig - 1e-9

    with pytest.raises(ValueError, match="SPD"):
        make_population(cfg(shift_cov=-0.8))


def test_scenario_validation():
    with pytest.raises(ValueError):
        cfg(n=5)
    with pytest.raises(ValueError):
        cfg(xi=-0.5)
    with pytest.raises(ValueError):
        cfg(noise_sd=0.0)
    with pytest.raises(ValueError):
        cfg(weight_mode="oracle")
    with pytest.raises(ValueError):
        cfg(shift_pattern="last")


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_near_noiseless_draw_is_linear():
    pop = make_population(cfg(noise_sd=1e-9, p=5, n=60))
    data, _ = draw_dataset(pop, 60, seed=11)
    design = np.column_stack([np.ones(60), data.x])
    coef, *_ = np.linalg.lstsq(design, data.y, rcond=None)
    resid = data.y - design @ coef
    assert np.abs(resid).max() < 1e-6


def test_draws_are_seed_deterministic():
    pop = make_population(cfg())
    d1, t1 = draw_dataset(pop, 40, seed=21)
    d2, t2 = draw_dataset(pop, 40, seed=21)
    assert np.array_equal(d1.x, d2.x)
    assert np.array_equal(d1.y, d2.y)
    assert np.array_equal(t1, t2)
    d3, _ = draw_dataset(pop, 40, seed=22)
    assert not np.array_equal(d1.x, d3.x)


def test_test_input_block_size():
    pop = make_population(cfg())
    _, t_default = draw_dataset(pop, 40, seed=2)
    _, t_custom = draw_dataset(pop, 40, seed=2, n_test=90)
    assert t_default.shape == (40, 8)
    assert t_custom.shape == (90, 8)


def test_sample_moments_match_population():
    pop = make_population(cfg(p=4, shift_mean=0.5, shift_cov=0.3))
    n = 100_000
    data, x_te = draw_dataset(pop, n, seed=31, n_test=n)
    for x, mu, cov in ((data.x, pop.mu_tr, pop.cov_tr), (x_te, pop.mu_te, pop.cov_te)):
        se_mean = np.sqrt(np.diag(cov) / n)
        assert np.all(np.abs(x.mean(axis=0) - mu) < 4 * se_mean)
        centered = x - x.mean(axis=0)
        sample_cov = centered.T @ centered / n
        se_cov = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / n)
        assert np.all(np.abs(sample_cov - cov) < 4 * se_cov)


def test_conditional_law_is_domain_independent():
    # the same covariate rows produce the same regression surface for any shift
    base = make_population(cfg(shift_mean=0.0, shift_cov=0.0))
    shifted = make_population(cfg(shift_mean=1.0, shift_cov=0.3))
    x = np.random.default_rng(7).standard_normal((20, 8))
    assert_allclose(regression_function(base, x), regression_function(shifted, x), rtol=0)


def test_misspec_population_carries_term():
    pop = make_population(cfg(misspec_amplitude=0.7, misspec_kind="sine"))
    assert pop.misspec is not None
    x = np.zeros((3, 8))
    x[:, 0] = [0.0, np.pi / 2, np.pi]
    lin = pop.alpha + x @ pop.beta
    assert_allclose(regression_function(pop, x) - lin, 0.7 * np.sin(x[:, 0]), atol=1e-12)
