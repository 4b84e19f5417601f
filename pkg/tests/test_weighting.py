import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.stats import multivariate_normal, norm

from greedyshift import (
    ImportanceModel,
    ScheduleConfig,
    build_weights,
    compute_bn,
    compute_cn,
    compute_dn,
    compute_kn,
    fit_gaussian_importance,
    log_importance,
    raw_importance,
)


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


def test_cn_values():
    assert_allclose(compute_cn(100, 100), math.sqrt(math.log(100) / 100), rtol=1e-15)
    assert_allclose(compute_cn(100, 100), 0.21460, atol=5e-6)
    assert_allclose(compute_cn(64, 8), math.sqrt(math.log(8) / 64), rtol=1e-15)
    assert_allclose(compute_cn(64, 8), 0.1803, atol=5e-5)


def test_cn_halves_with_quadrupled_n():
    for n, p in [(50, 20), (128, 64)]:
        assert_allclose(compute_cn(2 * n, p), compute_cn(n, p) / math.sqrt(2.0), rtol=1e-14)


def test_cn_rejects_degenerate_sizes():
    with pytest.raises(ValueError):
        compute_cn(100, 1)
    with pytest.raises(ValueError):
        compute_cn(1, 100)


def test_dn_equals_cn_above_q_one():
    cfg15 = ScheduleConfig(q=1.5)
    cfg99 = ScheduleConfig(q=99.0)
    for n, p in [(100, 100), (50, 200), (400, 40)]:
        cn = compute_cn(n, p)
        assert compute_dn(n, p, cfg15) == cn
        assert compute_dn(n, p, cfg99) == cn


def test_dn_low_q_branch_value():
    cfg = ScheduleConfig(q=1.0, eta=2.0)
    # c_n^{2q/(1+q)} (log n)^{1/eta + 1/2} = c_n * log(100)
    assert_allclose(compute_dn(100, 100, cfg), compute_cn(100, 100) * math.log(100), rtol=1e-14)
    assert_allclose(compute_dn(100, 100, cfg), 0.9883, atol=5e-4)


def test_bn_values_and_growth():
    assert_allclose(compute_bn(100, 100, ScheduleConfig(q=1.0, m_w=1.0)),
                    1.0 / compute_cn(100, 100), rtol=1e-14)
    assert_allclose(compute_bn(100, 100, ScheduleConfig(q=1.0, m_w=1.0)), 4.660, atol=5e-4)
    assert_allclose(compute_bn(100, 100, ScheduleConfig(q=2.0, m_w=1.0, m_eta=1.0)),
                    1.0 / (compute_cn(100, 100) * math.log(100)), rtol=1e-14)
    assert_allclose(compute_bn(100, 100, ScheduleConfig(q=2.0, m_w=1.0, m_eta=1.0)),
                    1.0119, atol=5e-4)
    cfg = ScheduleConfig(q=2.0, m_w=1.0, m_eta=1.0)
    values = [compute_bn(n, 100, cfg) for n in (50, 100, 200)]
    assert values[0] < values[1] < values[2]


def test_kn_value_and_clamps():
    assert compute_kn(100, 100, ScheduleConfig(q=2.0, m_k=1.0), "iwoga") == 4
    assert compute_kn(10, 5, ScheduleConfig(q=2.0, m_k=100.0), "iwoga") == 5  # min(p, n-2)
    assert compute_kn(5, 50, ScheduleConfig(q=2.0, m_k=100.0), "iwoga") == 3  # n - 2
    cfg = ScheduleConfig(q=1.5)
    for n, p in [(60, 30), (200, 1000)]:
        assert compute_kn(n, p, cfg, "iwoga") == compute_kn(n, p, cfg, "oga")
    with pytest.raises(ValueError):
        compute_kn(100, 100, cfg, "other")


def test_schedule_config_validation():
    with pytest.raises(ValueError):
        ScheduleConfig(q=0.0)
    with pytest.raises(ValueError):
        ScheduleConfig(q=1.0, eta=2.5)
    with pytest.raises(ValueError):
        ScheduleConfig(q=1.0, eta=1.0, m_eta=1.2)  # below 1/eta + 1/2 = 1.5
    assert ScheduleConfig(q=1.0, eta=0.5).m_eta == pytest.approx(2.5)


# ---------------------------------------------------------------------------
# importance models
# ---------------------------------------------------------------------------


def test_identical_gaussians_give_unit_importance():
    mean = np.array([0.5, -1.0])
    cov = np.array([[1.0, 0.3], [0.3, 2.0]])
    model = ImportanceModel.gaussian(mean, cov, mean, cov)
    x = np.random.default_rng(0).standard_normal((20, 2))
    assert_allclose(raw_importance(model, x), np.ones(20), rtol=1e-14)


def test_one_dim_gaussian_shift_closed_form():
    model = ImportanceModel.gaussian(np.zeros(1), np.eye(1), np.ones(1), np.eye(1))
    # N(1,1)/N(0,1) = exp(x - 1/2)
    assert raw_importance(model, np.array([0.5])) == pytest.approx(1.0, rel=1e-12)
    for x in (-2.0, 0.0, 1.7):
        assert raw_importance(model, np.array([x])) == pytest.approx(
            math.exp(x - 0.5), rel=1e-12
        )


def test_two_dim_gaussian_matches_scipy_densities():
    rng = np.random.default_rng(33)
    a = rng.standard_normal((2, 2))
    cov_tr = a @ a.T + 0.5 * np.eye(2)
    b = rng.standard_normal((2, 2))
    cov_te = b @ b.T + 0.5 * np.eye(2)
    mean_tr = rng.standard_normal(2)
    mean_te = rng.standard_normal(2)
    model = ImportanceModel.gaussian(mean_tr, cov_tr, mean_te, cov_te)
    x = rng.standard_normal((50, 2))
    expected = multivariate_normal.pdf(x, mean_te, cov_te) / multivariate_normal.pdf(
        x, mean_tr, cov_tr
    )
    assert_allclose(raw_importance(model, x), expected, rtol=1e-10)


def test_gaussian_model_rejects_degenerate_covariance():
    with pytest.raises(ValueError):
        ImportanceModel.gaussian(np.zeros(2), np.zeros((2, 2)), np.zeros(2), np.eye(2))


def test_function_kind_support_violation():
    model = ImportanceModel.from_function(lambda x: np.where(x[:, 0] > 0, 1.0, 0.0))
    with pytest.raises(ValueError, match="support"):
        raw_importance(model, np.array([[1.0], [-1.0]]))


# ---------------------------------------------------------------------------
# fit_gaussian_importance
# ---------------------------------------------------------------------------


def test_fit_same_sample_gives_unit_weights():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((40, 3))
    model = fit_gaussian_importance(x, x)
    assert_allclose(raw_importance(model, x), np.ones(40), rtol=1e-12)
    assert_allclose(model.mean_tr, model.mean_te)
    assert_allclose(model.cov_tr, model.cov_te)


def test_fit_one_dim_log_ratio_matches_plugin_closed_form():
    rng = np.random.default_rng(6)
    x_tr = rng.standard_normal((400, 1))
    x_te = rng.standard_normal((400, 1)) + 1.0
    model = fit_gaussian_importance(x_tr, x_te)
    # oracle: evaluate both fitted normal log-densities directly
    pts = np.linspace(-2, 3, 7)[:, None]
    expected = norm.logpdf(pts[:, 0], model.mean_te[0], math.sqrt(model.cov_te[0, 0])) - \
        norm.logpdf(pts[:, 0], model.mean_tr[0], math.sqrt(model.cov_tr[0, 0]))
    assert_allclose(log_importance(model, pts), expected, rtol=1e-10)
    # slope of the fitted log ratio is close to the population value 1
    slope = (log_importance(model, np.array([[1.0]]))
             - log_importance(model, np.array([[0.0]])))[0]
    assert abs(slope - 1.0) < 0.25


def test_fit_rejects_non_finite_and_thin_samples():
    with pytest.raises(ValueError):
        fit_gaussian_importance(np.array([[np.nan], [1.0]]), np.ones((5, 1)))
    with pytest.raises(ValueError):
        fit_gaussian_importance(np.ones((3, 3)), np.ones((5, 3)))  # < p + 1 rows


def test_fit_shrinkage_keeps_high_dim_covariance_invertible():
    rng = np.random.default_rng(7)
    n = p = 30  # p >= n: the MLE covariance alone would be singular
    x_tr = rng.standard_normal((n, p))
    x_te = rng.standard_normal((n, p))
    model = fit_gaussian_importance(x_tr, x_te)
    for cov in (model.cov_tr, model.cov_te):
        eig = np.linalg.eigvalsh(cov)
        assert eig.min() > 1e-10 * eig.max()


# ---------------------------------------------------------------------------
# build_weights
# ---------------------------------------------------------------------------


def test_build_weights_trims_then_normalizes():
    model = ImportanceModel.precomputed(np.array([0.5, 3.0]))
    w = build_weights(model, np.zeros((2, 1)), b_n=2.0)
    assert_allclose(w.w, [0.4, 1.6], rtol=1e-12)


def test_build_weights_unit_raw_is_exactly_one():
    model = ImportanceModel.precomputed(np.ones(5))
    for b_n in (1.0, 2.0, 100.0):
        assert np.all(build_weights(model, np.zeros((5, 1)), b_n).w == 1.0)


def test_build_weights_matches_two_pass_oracle():
    rng = np.random.default_rng(8)
    raw = rng.gamma(1.5, 2.0, size=30) + 1e-3
    b_n = float(np.median(raw))
    model = ImportanceModel.precomputed(raw)
    w = build_weights(model, np.zeros((30, 1)), b_n)
    v = np.minimum(raw, b_n)
    assert_allclose(w.w, v / v.mean(), rtol=1e-12)


def test_build_weights_all_zero_errors():
    model = ImportanceModel.precomputed(np.zeros(4))
    with pytest.raises(ValueError, match="identically zero"):
        build_weights(model, np.zeros((4, 1)), b_n=1.0)
    with pytest.raises(ValueError):
        build_weights(model, np.zeros((4, 1)), b_n=0.0)


def test_trimming_idempotent_at_max_raw_value():
    rng = np.random.default_rng(9)
    raw = rng.uniform(0.1, 5.0, size=12)
    model = ImportanceModel.precomputed(raw)
    w = build_weights(model, np.zeros((12, 1)), b_n=float(raw.max()))
    assert_allclose(w.w, raw / raw.mean(), rtol=1e-12)


@given(scale=st.floats(min_value=1e-6, max_value=1e6))
@settings(max_examples=40, deadline=None)
def test_weights_invariant_under_raw_rescaling(scale):
    raw = np.array([0.2, 1.0, 3.7, 0.9, 2.4])
    b_n = 2.5
    base = build_weights(ImportanceModel.precomputed(raw), np.zeros((5, 1)), b_n)
    scaled = build_weights(
        ImportanceModel.precomputed(scale * raw), np.zeros((5, 1)), scale * b_n
    )
    assert_allclose(scaled.w, base.w, rtol=1e-9)


def test_weights_unchanged_when_no_trimming_active():
    raw = np.array([0.2, 1.0, 0.7])
    no_trim = build_weights(ImportanceModel.precomputed(raw), np.zeros((3, 1)), b_n=50.0)
    trimmed = build_weights(ImportanceModel.precomputed(raw), np.zeros((3, 1)), b_n=0.9)
    assert_allclose(no_trim.w, raw / raw.mean(), rtol=1e-12)
    assert not np.allclose(trimmed.w, no_trim.w)  # active trimming changes weights


@given(
    mu=st.floats(min_value=-5, max_value=5),
    sd=st.floats(min_value=0.1, max_value=10),
    z=st.floats(min_value=-10, max_value=10),
)
@settings(max_examples=60, deadline=None)
def test_gaussian_log_importance_finite_within_ten_sds(mu, sd, z):
    model = ImportanceModel.gaussian(
        np.array([0.0]), np.array([[1.0]]), np.array([mu]), np.array([[sd**2]])
    )
    x = np.array([[mu + z * sd]])
    assert np.isfinite(log_importance(model, x)).all()
