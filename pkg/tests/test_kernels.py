"""Kernel family checks: normalization, symmetry, analytic constants,
derivative identities, sampling, and the shifted product construction.

The Fisher-information and curvature reference values are frozen from a
30-digit quadrature of the standardized densities (independent of the
package's own integrators); tolerances reflect double-precision closed
forms on one side and 1e-9 quadrature on the other.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from promot.kernels import (
    GaussianKernel,
    GeneralizedGaussianKernel,
    HyperbolicSecantKernel,
    LogisticKernel,
    ShiftedProductKernel,
    StudentTKernel,
    compute_constants,
    make_kernel,
    shipped_kernels,
)

# (fisher info, curvature) per shipped kernel, 17 significant digits
FROZEN = {
    "gaussian": (1.0, 0.9678828980765734),
    "logistic": (1.0 / 3.0, 0.38490017945975051),
    "student_t(nu=1)": (0.5, 0.82699334313268807),
    "student_t(nu=3)": (2.0 / 3.0, 0.87871918940392229),
    "student_t(nu=10)": (11.0 / 13.0, 0.92892136409755456),
    "hypsec": (np.pi**2 / 8.0, np.pi / 2.0),
    "gen_gaussian(beta=4)": (4.0558694404037084, 3.3600364554844405),
}


def all_kernels():
    ks = shipped_kernels()
    assert len(ks) == 7
    return ks


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_fisher_info_frozen(kernel):
    ref_i, _ = FROZEN[kernel.label()]
    assert kernel.fisher_info == pytest.approx(ref_i, rel=1e-10)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_curvature_frozen(kernel):
    _, ref_k = FROZEN[kernel.label()]
    assert kernel.curvature == pytest.approx(ref_k, rel=1e-9)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_compute_constants_agrees_with_closed_forms(kernel):
    fisher, curv = compute_constants(kernel, tol=1e-9)
    assert fisher == pytest.approx(kernel.fisher_info, abs=1e-8)
    assert curv == pytest.approx(kernel.curvature, abs=1e-8)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_density_normalized(kernel):
    # split at 0 so the adaptive rule sees the peak
    left, _ = integrate.quad(lambda z: float(kernel.density(z)), -np.inf, 0.0)
    right, _ = integrate.quad(lambda z: float(kernel.density(z)), 0.0, np.inf)
    assert left + right == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_density_even_score_odd(kernel):
    z = np.linspace(0.01, 8.0, 200)
    np.testing.assert_allclose(kernel.density(-z), kernel.density(z), rtol=1e-12)
    np.testing.assert_allclose(kernel.score(-z), -kernel.score(z), rtol=1e-12)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_score_is_log_density_derivative(kernel):
    z = np.linspace(0.2, 4.0, 40)
    h = 1e-6
    fd = (kernel.log_density(z + h) - kernel.log_density(z - h)) / (2 * h)
    np.testing.assert_allclose(kernel.score(z), fd, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_d2_density_matches_finite_difference(kernel):
    # stay away from 0 where gen_gaussian's p'' has a |z|^(beta-2) kink term
    z = np.linspace(0.3, 3.5, 30)
    h = 1e-4
    fd = (kernel.density(z + h) - 2 * kernel.density(z) + kernel.density(z - h)) / h**2
    np.testing.assert_allclose(kernel.d2_density(z), fd, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_cdf_midpoint_monotone_and_consistent(kernel):
    assert kernel.cdf(0.0) == pytest.approx(0.5, abs=1e-12)
    # strictly increasing where double precision can resolve the tails
    # (gen_gaussian's exp(-z^4) tail saturates the cdf beyond |z| ~ 2.2)
    z = np.linspace(-2.0, 2.0, 81)
    c = kernel.cdf(z)
    assert np.all(np.diff(c) > 0)
    wide = kernel.cdf(np.linspace(-40, 40, 81))
    assert np.all(np.diff(wide) >= 0)
    assert np.all((wide >= 0) & (wide <= 1))
    for zi in (-1.7, 0.4, 2.3):
        mass, _ = integrate.quad(lambda t: float(kernel.density(t)), -np.inf, zi)
        assert kernel.cdf(zi) == pytest.approx(mass, abs=1e-8)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_tail_mass(kernel):
    for r in (0.5, 2.0, 5.0):
        assert kernel.tail_mass(r) == pytest.approx(2 * (1 - kernel.cdf(r)), rel=1e-12)
    assert kernel.tail_mass(0.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_unimodal(kernel):
    z = np.linspace(0.0, 10.0, 501)
    p = kernel.density(z)
    assert np.all(np.diff(p) <= 1e-15)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_inflection_is_sign_change_of_d2(kernel):
    z0 = kernel.inflection
    assert z0 > 0
    assert abs(kernel.d2_density(z0)) < 1e-10
    assert kernel.d2_density(0.6 * z0) < 0  # concave inside
    assert kernel.d2_density(1.4 * z0) > 0  # convex outside


def test_inflection_closed_forms():
    assert GaussianKernel().inflection == pytest.approx(1.0, abs=1e-15)
    assert StudentTKernel(3.0).inflection == pytest.approx(np.sqrt(0.6), rel=1e-12)
    assert GeneralizedGaussianKernel(4.0).inflection == pytest.approx(
        0.9306048591020996, rel=1e-12)


@pytest.mark.parametrize("kernel", all_kernels(), ids=lambda k: k.label())
def test_sampling_matches_cdf(kernel):
    rng = np.random.default_rng(1234)
    draws = kernel.sample(rng, 4000)
    assert draws.shape == (4000,)
    stat = stats.kstest(draws, lambda z: kernel.cdf(z))
    assert stat.pvalue > 1e-3, f"{kernel.label()}: KS p={stat.pvalue:.2e}"


def test_factory():
    assert isinstance(make_kernel("gaussian"), GaussianKernel)
    assert isinstance(make_kernel("logistic"), LogisticKernel)
    assert isinstance(make_kernel("hypsec"), HyperbolicSecantKernel)
    k = make_kernel("student_t", nu=3.0)
    assert isinstance(k, StudentTKernel) and k.nu == 3.0
    k = make_kernel("gen_gaussian", beta=4.0)
    assert isinstance(k, GeneralizedGaussianKernel) and k.beta == 4.0
    with pytest.raises(ValueError, match="unknown kernel"):
        make_kernel("epanechnikov")


def test_constructor_validation():
    with pytest.raises(ValueError):
        StudentTKernel(0.0)
    with pytest.raises(ValueError):
        StudentTKernel(float("nan"))
    with pytest.raises(ValueError):
        GeneralizedGaussianKernel(-1.0)
    # Fisher information diverges for very heavy generalized-gaussian tails
    with pytest.raises(ValueError):
        _ = GeneralizedGaussianKernel(0.4).fisher_info


def test_labels():
    assert GaussianKernel().label() == "gaussian"
    assert StudentTKernel(1.0).label() == "student_t(nu=1)"
    assert GeneralizedGaussianKernel(4.0).label() == "gen_gaussian(beta=4)"


@settings(max_examples=60, deadline=None)
@given(z=st.floats(min_value=-30.0, max_value=30.0, allow_nan=False))
def test_density_is_exp_log_density(z):
    for kernel in all_kernels():
        assert kernel.density(z) == pytest.approx(
            np.exp(kernel.log_density(z)), rel=1e-12, abs=1e-300)


def test_shifted_product_log_density_and_score():
    base = GaussianKernel()
    mu = np.array([1.0, -1.0])
    scales = np.array([2.0, 0.5])
    pk = ShiftedProductKernel(base, mu, scales)
    assert pk.dim == 2

    x = np.array([0.3, -0.2])
    z = (x - mu) / scales
    expected = float(np.sum(base.log_density(z)) - np.sum(np.log(scales)))
    assert pk.log_density(x) == pytest.approx(expected, rel=1e-12)

    # score is the mu-gradient of log density
    h = 1e-6
    for i in range(2):
        lo, hi = mu.copy(), mu.copy()
        lo[i] -= h
        hi[i] += h
        fd = (ShiftedProductKernel(base, hi, scales).log_density(x)
              - ShiftedProductKernel(base, lo, scales).log_density(x)) / (2 * h)
        assert pk.score(x)[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_shifted_product_sampling():
    pk = ShiftedProductKernel(GaussianKernel(), [2.0, -3.0], [0.5, 1.5])
    rng = np.random.default_rng(7)
    draws = pk.sample(rng, 20000)
    assert draws.shape == (20000, 2)
    np.testing.assert_allclose(draws.mean(axis=0), [2.0, -3.0], atol=0.05)
    np.testing.assert_allclose(draws.std(axis=0), [0.5, 1.5], atol=0.05)
    with pytest.raises(ValueError):
        pk.sample(rng, 0)


def test_shifted_product_validation():
    with pytest.raises(ValueError):
        ShiftedProductKernel(GaussianKernel(), [0.0, 0.0], [1.0])
    with pytest.raises(ValueError):
        ShiftedProductKernel(GaussianKernel(), [0.0], [-1.0])
