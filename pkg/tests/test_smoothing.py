"""Estimator checks against hand algebra and closed-form oracles.

The main analytic oracle: f(x) = x with a Gaussian kernel and exponential
transform (theta = sigma = 1) gives G(mu) = e^{mu + 1/2}, so the smoothed
value, gradient and second derivative all equal e^{0.8} at mu = 0.3.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promot.kernels import make_kernel
from promot.objectives import Box, Objective, ackley
from promot.smoothing import (
    GradientEstimate,
    SmoothingSpec,
    _loo_from_weights,
    _plain_from_weights,
    _shifted_weights,
    default_ridge,
    estimator_batches,
    grad_sign_changes,
    gradient_samples,
    loo_gradient,
    paired_second_moments,
    score_gradient,
    second_moment_probe,
    smoothed_grad_quadrature,
    smoothed_second_deriv_quadrature,
    smoothed_value,
    smoothed_value_quadrature,
)
from promot.transforms import make_transform

ORACLE = float(np.exp(0.8))


def _line_objective():
    return Objective("line", 1, lambda X: X[:, 0].copy(), Box.cube(-60.0, 60.0, 1))


def _line_spec(batch_size=8):
    f = _line_objective()
    spec = SmoothingSpec(make_kernel("gaussian"), make_transform("exponential"),
                         1.0, np.array([1.0]), batch_size, f.domain)
    return spec, f


# --------------------------------------------------------------------------
# spec plumbing


def test_default_ridge():
    assert default_ridge(2) == 1.0
    assert default_ridge(50) == pytest.approx(0.6147881529512643, rel=1e-15)
    with pytest.raises(ValueError):
        default_ridge(1)


def test_spec_validation():
    box = Box.cube(-1.0, 1.0, 2)
    k, t = make_kernel("gaussian"), make_transform("exponential")
    with pytest.raises(ValueError, match="theta"):
        SmoothingSpec(k, t, -1.0, np.ones(2), 4, box)
    with pytest.raises(ValueError, match="scales"):
        SmoothingSpec(k, t, 1.0, np.array([1.0, 0.0]), 4, box)
    with pytest.raises(ValueError, match="batch_size"):
        SmoothingSpec(k, t, 1.0, np.ones(2), 0, box)
    with pytest.raises(ValueError, match="dim"):
        SmoothingSpec(k, t, 1.0, np.ones(3), 4, box)
    with pytest.raises(ValueError, match="ridge"):
        SmoothingSpec(k, t, 1.0, np.ones(2), 4, box, ridge=0.0)


def test_spec_effective_ridge_and_s2():
    box = Box.cube(-1.0, 1.0, 2)
    k, t = make_kernel("gaussian"), make_transform("exponential")
    spec = SmoothingSpec(k, t, 1.0, np.array([0.5, 0.25]), 50, box)
    assert spec.effective_ridge == default_ridge(50)
    assert SmoothingSpec(k, t, 1.0, np.ones(2), 50, box, ridge=0.3).effective_ridge == 0.3
    # d * max sigma^-2 = 2 * 16
    assert spec.s2() == 32.0


def test_spec_for_objective_scalar_sigma():
    f = ackley(3)
    spec = SmoothingSpec.for_objective(make_kernel("gaussian"),
                                       make_transform("exponential"),
                                       2.0, 0.5, 10, f)
    np.testing.assert_array_equal(spec.scales, [0.5, 0.5, 0.5])
    assert spec.domain is f.domain


# --------------------------------------------------------------------------
# weight and baseline algebra


def test_shifted_weights():
    logh = np.array([[0.0, -1.0, -np.inf]])
    out = _shifted_weights(logh, np.array([0.0]))
    np.testing.assert_allclose(out, [[1.0, np.exp(-1.0), 0.0]])
    # a fully starved batch maps to zeros, not nans
    out = _shifted_weights(np.array([[-np.inf, -np.inf]]), np.array([-np.inf]))
    np.testing.assert_array_equal(out, [[0.0, 0.0]])


def test_plain_weights_hand_case():
    ht = np.array([[2.0, 4.0]])
    S = np.array([[[1.0, 0.0], [0.0, 2.0]]])
    np.testing.assert_allclose(_plain_from_weights(ht, S), [[1.0, 4.0]])


def test_loo_weights_hand_case():
    # ||S_1||^2 = 1, ||S_2||^2 = 4; U = 2 + 16, V = 5
    # b_1 = 16 / (4 + 1) = 3.2, b_2 = 2 / (1 + 1) = 1
    ht = np.array([[2.0, 4.0]])
    S = np.array([[[1.0, 0.0], [0.0, 2.0]]])
    est, b = _loo_from_weights(ht, S, 1.0)
    np.testing.assert_allclose(b, [[3.2, 1.0]], rtol=1e-15)
    np.testing.assert_allclose(est, [[-0.6, 3.0]], rtol=1e-15)


def test_loo_constant_weights_cancel():
    # equal weights make each baseline approach h, killing the estimate
    rng = np.random.default_rng(0)
    S = rng.standard_normal((1, 30, 4))
    ht = np.ones((1, 30))
    est, _ = _loo_from_weights(ht, S, 1e-12)
    assert np.linalg.norm(est) < 1e-10 * np.abs(S).max()


# --------------------------------------------------------------------------
# GradientEstimate semantics


def _diag():
    from promot.smoothing import Diagnostics

    return Diagnostics(4, 4, 1.0)


def test_gradient_estimate_units():
    g = GradientEstimate(np.array([1.0, -2.0]), np.log(3.0), _diag(), weight_mean=0.5)
    np.testing.assert_allclose(g.estimate, [3.0, -6.0], rtol=1e-14)
    np.testing.assert_allclose(g.normalized, [2.0, -4.0], rtol=1e-14)


def test_gradient_estimate_starved_normalized():
    g = GradientEstimate(np.zeros(2), 0.0, _diag(), weight_mean=0.0)
    np.testing.assert_array_equal(g.normalized, [0.0, 0.0])


def test_gradient_estimate_exact_flag():
    assert GradientEstimate(np.array([1e-3, 1.0]), 0.0, _diag()).exact
    assert not GradientEstimate(np.array([1e-3, 1.0]), 800.0, _diag()).exact
    assert not GradientEstimate(np.array([1e-3, 1.0]), -710.0, _diag()).exact
    assert GradientEstimate(np.zeros(2), 1e9, _diag()).exact


# --------------------------------------------------------------------------
# single-batch estimators


def test_score_gradient_shape_and_determinism():
    spec, f = _line_spec()
    a = score_gradient(spec, f, np.array([0.3]), np.random.default_rng(7))
    b = score_gradient(spec, f, np.array([0.3]), np.random.default_rng(7))
    np.testing.assert_array_equal(a.direction, b.direction)
    assert a.scale_log == b.scale_log
    assert a.direction.shape == (1,)
    assert not a.diagnostics.starved


def test_loo_gradient_needs_two_draws():
    spec, f = _line_spec(batch_size=1)
    with pytest.raises(ValueError, match="B >= 2"):
        loo_gradient(spec, f, np.array([0.0]), np.random.default_rng(0))


def test_estimators_starve_outside_box():
    f = Objective("far", 1, lambda X: X[:, 0].copy(), Box.cube(100.0, 101.0, 1))
    spec = SmoothingSpec(make_kernel("gaussian"), make_transform("exponential"),
                         1.0, np.array([1.0]), 16, f.domain)
    g = score_gradient(spec, f, np.array([0.0]), np.random.default_rng(1))
    assert g.diagnostics.starved
    np.testing.assert_array_equal(g.direction, [0.0])
    np.testing.assert_array_equal(g.normalized, [0.0])
    assert g.diagnostics.n_in_domain == 0


def test_mu_shape_validated():
    spec, f = _line_spec()
    with pytest.raises(ValueError, match="mu"):
        score_gradient(spec, f, np.zeros(2), np.random.default_rng(0))


def test_gradient_samples_consistency():
    spec, f = _line_spec(batch_size=32)
    mu = np.array([0.3])
    s = gradient_samples(spec, f, mu, np.random.default_rng(21))
    finite = np.isfinite(s.log_h)
    np.testing.assert_allclose(s.h[finite], np.exp(s.log_h[finite]), rtol=1e-14)
    assert np.all(s.h[~finite] == 0.0)
    np.testing.assert_array_equal(s.in_domain, f.domain.contains(s.x))
    z = (s.x - mu) / spec.scales
    np.testing.assert_allclose(s.score, -spec.kernel.score(z) / spec.scales,
                               rtol=1e-13)


# --------------------------------------------------------------------------
# Monte Carlo unbiasedness against the e^{0.8} oracle


def test_plain_estimator_unbiased():
    spec, f = _line_spec()
    est = estimator_batches(spec, f, np.array([0.3]), 20000,
                            np.random.default_rng(11))
    v = est.vectors["plain"][:, 0] * np.exp(est.scale_log)
    se = v.std() / np.sqrt(v.size)
    assert abs(v.mean() - ORACLE) < 4.0 * se


def test_loo_estimator_unbiased():
    spec, f = _line_spec()
    est = estimator_batches(spec, f, np.array([0.3]), 20000,
                            np.random.default_rng(11))
    v = est.vectors["loo"][:, 0] * np.exp(est.scale_log)
    se = v.std() / np.sqrt(v.size)
    assert abs(v.mean() - ORACLE) < 4.0 * se


def test_smoothed_value_estimate():
    spec, f = _line_spec()
    v = smoothed_value(spec, f, np.array([0.3]), 40000, np.random.default_rng(3))
    assert abs(v.value - ORACLE) < 4.0 * v.stderr
    assert v.log_value == pytest.approx(np.log(v.value), rel=1e-12)
    assert v.n == v.n_in_domain == 40000
    with pytest.raises(ValueError):
        smoothed_value(spec, f, np.array([0.3]), 0, np.random.default_rng(0))


# --------------------------------------------------------------------------
# multi-batch probes


def test_estimator_batches_guards():
    spec, f = _line_spec(batch_size=1)
    with pytest.raises(ValueError, match="B >= 2"):
        estimator_batches(spec, f, np.array([0.0]), 10, np.random.default_rng(0))
    big, f2 = _line_spec(batch_size=100)
    big = SmoothingSpec(big.kernel, big.transform, 1.0, np.ones(1000), 100,
                        Box.cube(-60.0, 60.0, 1000))
    with pytest.raises(ValueError, match="too large"):
        estimator_batches(big, f2, np.zeros(1000), 10**5, np.random.default_rng(0))


def test_estimator_batches_all_starved():
    f = Objective("far", 1, lambda X: X[:, 0].copy(), Box.cube(100.0, 101.0, 1))
    spec = SmoothingSpec(make_kernel("gaussian"), make_transform("exponential"),
                         1.0, np.array([1.0]), 8, f.domain)
    with pytest.raises(ValueError, match="starved"):
        estimator_batches(spec, f, np.array([0.0]), 20, np.random.default_rng(0))


def test_paired_reduction_on_ackley():
    f = ackley(10)
    spec = SmoothingSpec.for_objective(
        make_kernel("logistic"),
        make_transform("power_exp_hybrid", c=600.0, beta=10.0),
        1.0, 0.5, 50, f)
    pc = paired_second_moments(spec, f, np.full(10, 3.0), 2000,
                               np.random.default_rng(5))
    assert pc.z_score < -10.0
    assert pc.reduction_confirmed()
    assert pc.loo_mean_scaled < pc.plain_mean_scaled
    assert pc.mean_diff_scaled == pytest.approx(
        pc.loo_mean_scaled - pc.plain_mean_scaled, rel=1e-12)


def test_second_moment_probe_bound():
    f = ackley(3)
    spec = SmoothingSpec.for_objective(make_kernel("gaussian"),
                                       make_transform("exponential"),
                                       1.0, 0.5, 10, f)
    # f <= 0 so g = e^{theta f} <= 1 and g* = 1 is the exact supremum
    pr = second_moment_probe(spec, f, np.zeros(3), 2000, "plain",
                             np.random.default_rng(9), g_star=1.0)
    assert pr.bound_ratio is not None
    assert pr.bound_ratio <= 1.0 + 3.0 * pr.rel_se
    assert 0.0 < pr.r2_hat <= 1.0
    assert pr.n_starved == 0


def test_second_moment_probe_validation():
    spec, f = _line_spec()
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="100 batches"):
        second_moment_probe(spec, f, np.array([0.0]), 10, "plain", rng)
    with pytest.raises(ValueError, match="estimator"):
        second_moment_probe(spec, f, np.array([0.0]), 200, "median", rng)
    pr = second_moment_probe(spec, f, np.array([0.0]), 200, "plain", rng)
    assert pr.bound_ratio is None


# --------------------------------------------------------------------------
# quadrature oracles


def test_quadrature_trio_matches_closed_form():
    # G(mu) = e^{mu + 1/2}: value, gradient and curvature coincide
    spec, f = _line_spec()
    assert smoothed_value_quadrature(spec, f, 0.3) == pytest.approx(ORACLE, rel=1e-12)
    assert smoothed_grad_quadrature(spec, f, 0.3) == pytest.approx(ORACLE, rel=1e-12)
    assert smoothed_second_deriv_quadrature(spec, f, 0.3) == pytest.approx(
        ORACLE, rel=1e-12)


def test_quadrature_log_shift():
    spec, f = _line_spec()
    assert smoothed_value_quadrature(spec, f, 0.3, log_shift=0.8) == pytest.approx(
        1.0, rel=1e-12)


def test_quadrature_rejects_multidim():
    f = ackley(2)
    spec = SmoothingSpec.for_objective(make_kernel("gaussian"),
                                       make_transform("exponential"),
                                       1.0, 0.5, 4, f)
    with pytest.raises(ValueError, match="1-D"):
        smoothed_value_quadrature(spec, f, 0.0)


def test_grad_sign_changes_single_maximum():
    # a smoothed concave bowl keeps exactly one stationary point at 0
    f = Objective("bowl", 1, lambda X: -(X[:, 0] ** 2), Box.cube(-50.0, 50.0, 1))
    spec = SmoothingSpec(make_kernel("gaussian"), make_transform("exponential"),
                         0.2, np.array([1.0]), 4, f.domain)
    zeros = grad_sign_changes(spec, f, 4.0)
    assert zeros.shape == (1,)
    assert abs(zeros[0]) < 1e-6


# --------------------------------------------------------------------------
# properties


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_max_shifted_weight_is_one(seed):
    spec, f = _line_spec()
    g = score_gradient(spec, f, np.array([0.3]), np.random.default_rng(seed))
    s = gradient_samples(spec, f, np.array([0.3]), np.random.default_rng(seed))
    assert np.max(s.log_h) == pytest.approx(g.scale_log, abs=0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=-3.0, max_value=3.0))
def test_loo_matches_plain_direction_scale(mu0):
    # both estimators share draws and the common shift, so their scale agrees
    spec, f = _line_spec(batch_size=16)
    est = estimator_batches(spec, f, np.array([mu0]), 50,
                            np.random.default_rng(123))
    assert est.vectors["plain"].shape == est.vectors["loo"].shape == (50, 1)
    assert est.n_starved == 0
