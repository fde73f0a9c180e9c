"""Transform family checks: frozen evaluations, domain handling, the
overflow guard, and ratio-monotonicity probes.

Frozen values are closed forms evaluated by hand (e.g. e^6 for the
exponential family at theta=2, y=3); the ratio probe assertions exercise
both the pass path and the not-claimed path for the families whose
guarantee needs positive arguments.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promot.transforms import (
    OVERFLOW_GUARD,
    AmplificationOverflowError,
    ExponentialTransform,
    FracExponentialTransform,
    PowerExpHybridTransform,
    PowerTransform,
    SigmoidPowerTransform,
    SinhShiftTransform,
    SoftplusTransform,
    TransformDomainError,
    make_transform,
    ratio_monotonicity_check,
    shipped_transforms,
)


def test_seven_families_shipped():
    fams = sorted(t.family for t in shipped_transforms())
    assert fams == [
        "exponential", "frac_exponential", "power", "power_exp_hybrid",
        "sigmoid_power", "sinh_shift", "softplus",
    ]


# --------------------------------------------------------------------------
# frozen evaluations


def test_exponential_frozen():
    t = ExponentialTransform()
    assert t.log_eval(2.0, 3.0) == 6.0
    assert t.eval(2.0, 3.0) == pytest.approx(403.4287934927351, rel=1e-14)
    np.testing.assert_allclose(t.log_eval(0.5, np.array([-2.0, 0.0, 4.0])),
                               [-1.0, 0.0, 2.0], rtol=1e-15)


def test_power_frozen():
    t = PowerTransform(c=0.0)
    assert t.eval(3.0, 2.0) == pytest.approx(8.0, rel=1e-13)
    assert t.log_eval(3.0, 2.0) == pytest.approx(3.0 * math.log(2.0), rel=1e-15)
    shifted = PowerTransform(c=1.0)
    assert shifted.eval(2.0, 0.0) == pytest.approx(1.0, rel=1e-15)


def test_frac_exponential_frozen():
    t = FracExponentialTransform(alpha=0.5)
    assert t.log_eval(2.0, 4.0) == pytest.approx(4.0, rel=1e-15)
    # negative values clamp to zero exponent, so g = 1 exactly
    assert t.log_eval(2.0, -7.0) == 0.0
    assert t.eval(2.0, -7.0) == 1.0


def test_power_exp_hybrid_frozen():
    t = PowerExpHybridTransform(c=600.0, beta=10.0)
    assert t.log_eval(5.0, 0.0) == pytest.approx(63.96929655216147, rel=1e-14)
    # beta=0 degenerates to the exponential family
    flat = PowerExpHybridTransform(c=1.0, beta=0.0)
    assert flat.log_eval(3.0, 2.0) == pytest.approx(6.0, rel=1e-15)


def test_softplus_frozen():
    t = SoftplusTransform()
    assert t.eval(1.0, 0.0) == pytest.approx(math.log(2.0), rel=1e-15)
    assert t.log_eval(1.0, 0.0) == pytest.approx(-0.36651292058166435, rel=1e-14)
    # deep-negative branch: log softplus(t) -> t without underflow
    assert t.log_eval(1.0, -50.0) == -50.0
    assert t.log_eval(2.0, -400.0) == -800.0
    # linear growth, so huge arguments evaluate without overflow
    assert t.eval(10.0, 200.0) == pytest.approx(2000.0, rel=1e-15)


def test_sinh_shift_frozen():
    t = SinhShiftTransform(c=1.0)
    assert t.log_eval(2.0, 0.0) == pytest.approx(1.2883673726141682, rel=1e-14)
    # exactly zero (log -inf) at the floor
    assert t.log_eval(2.0, -1.0) == -np.inf


def test_sigmoid_power_frozen():
    t = SigmoidPowerTransform(alpha=1.0)
    assert t.eval(2.0, 0.0) == pytest.approx(0.25, rel=1e-15)
    assert t.log_eval(3.0, 0.0) == pytest.approx(-3.0 * math.log(2.0), rel=1e-15)


def test_scalar_in_scalar_out():
    for t in shipped_transforms():
        v = t.log_eval(1.5, 2.0)
        assert isinstance(v, float)
        arr = t.log_eval(1.5, np.array([2.0, 3.0]))
        assert arr.shape == (2,)


# --------------------------------------------------------------------------
# domains and guards


def test_power_domain():
    t = PowerTransform(c=0.0)
    with pytest.raises(TransformDomainError):
        t.log_eval(2.0, 0.0)  # boundary is excluded
    with pytest.raises(TransformDomainError):
        t.log_eval(2.0, np.array([1.0, -0.5]))
    mask = PowerTransform(c=1.0).support_mask(np.array([-2.0, -1.0, -0.5, 3.0]))
    np.testing.assert_array_equal(mask, [False, False, True, True])


def test_hybrid_domain():
    t = PowerExpHybridTransform(c=2.0, beta=1.0)
    with pytest.raises(TransformDomainError):
        t.log_eval(1.0, -2.0)
    assert t.support_mask(-1.9) and not t.support_mask(-2.0)


def test_sinh_shift_domain():
    t = SinhShiftTransform(c=1.0)
    with pytest.raises(TransformDomainError):
        t.log_eval(1.0, -1.0001)
    # the floor itself is inside the domain (g = 0 there)
    assert t.support_mask(np.array([-1.0]))[0]


def test_unbounded_families_accept_everything():
    y = np.array([-1e6, -3.0, 0.0, 5.0, 1e6])
    for t in (ExponentialTransform(), SoftplusTransform(),
              SigmoidPowerTransform(alpha=2.0), FracExponentialTransform(alpha=0.7)):
        t.domain_check(y)
        assert np.all(t.support_mask(y))


def test_theta_validation():
    t = ExponentialTransform()
    for bad in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            t.log_eval(bad, 1.0)
    with pytest.raises(ValueError):
        ExponentialTransform(theta=-2.0)


def test_constructor_validation():
    with pytest.raises(ValueError):
        FracExponentialTransform(alpha=0.0)
    with pytest.raises(ValueError):
        PowerExpHybridTransform(c=-1.0, beta=2.0)
    with pytest.raises(ValueError):
        PowerExpHybridTransform(c=1.0, beta=-2.0)
    with pytest.raises(ValueError):
        SigmoidPowerTransform(alpha=-1.0)
    with pytest.raises(ValueError):
        PowerTransform(c=float("inf"))


def test_overflow_guard():
    t = ExponentialTransform()
    # log_eval is unbounded; linear eval refuses past the double-range guard
    assert t.log_eval(800.0, 1.0) == 800.0
    with pytest.raises(AmplificationOverflowError):
        t.eval(800.0, 1.0)
    with pytest.raises(AmplificationOverflowError):
        t.eval(800.0, -1.0)  # underflow is refused symmetrically
    assert t.eval(OVERFLOW_GUARD - 1.0, 1.0) > 0


def test_factory():
    t = make_transform("power_exp_hybrid", c=600.0, beta=10.0)
    assert isinstance(t, PowerExpHybridTransform)
    assert t.params == {"c": 600.0, "beta": 10.0}
    with pytest.raises(ValueError, match="unknown transform"):
        make_transform("log_barrier")


def test_labels():
    assert ExponentialTransform().label() == "exponential"
    assert PowerExpHybridTransform(c=600.0, beta=10.0).label() == "power_exp_hybrid(c=600, beta=10)"
    assert SigmoidPowerTransform(alpha=0.5).label() == "sigmoid_power(alpha=0.5)"


# --------------------------------------------------------------------------
# ratio monotonicity


THETA_GRID = np.linspace(0.2, 6.0, 25)


@pytest.mark.parametrize("t", shipped_transforms(), ids=lambda t: t.family)
def test_ratio_monotone_on_positive_pair(t):
    rep = ratio_monotonicity_check(t, 2.0, 0.5, THETA_GRID)
    assert rep.status == "pass"
    assert rep.passed
    assert rep.min_margin >= -1e-12


def test_ratio_not_claimed_for_nonpositive_pairs():
    for t in (SoftplusTransform(), SigmoidPowerTransform(alpha=1.0)):
        rep = ratio_monotonicity_check(t, 1.0, -1.0, THETA_GRID)
        assert rep.status == "not_claimed"
        assert rep.passed  # not-claimed pairs never count as failures


def test_ratio_preconditions():
    t = ExponentialTransform()
    with pytest.raises(ValueError):
        ratio_monotonicity_check(t, 1.0, 2.0, THETA_GRID)  # a <= b
    with pytest.raises(ValueError):
        ratio_monotonicity_check(t, 2.0, 1.0, np.array([3.0, 1.0]))  # not increasing
    with pytest.raises(ValueError):
        ratio_monotonicity_check(t, 2.0, 1.0, np.array([1.0]))  # too short


def test_ratio_undefined_at_sinh_floor():
    t = SinhShiftTransform(c=1.0)
    with pytest.raises(TransformDomainError):
        ratio_monotonicity_check(t, 0.0, -1.0, THETA_GRID)  # g(theta, b) = 0


def test_ratio_amplified_regime_uses_log_scale():
    # a ratio too large for double precision still checks cleanly
    rep = ratio_monotonicity_check(ExponentialTransform(), 500.0, -500.0,
                                   np.linspace(1.0, 4.0, 9))
    assert rep.status == "pass"


@settings(max_examples=80, deadline=None)
@given(
    a=st.floats(min_value=0.01, max_value=50.0),
    gap=st.floats(min_value=1e-3, max_value=20.0),
    theta_lo=st.floats(min_value=0.05, max_value=3.0),
)
def test_ratio_monotone_property_positive_pairs(a, gap, theta_lo):
    grid = np.linspace(theta_lo, theta_lo + 5.0, 12)
    for t in shipped_transforms():
        rep = ratio_monotonicity_check(t, a + gap, a, grid)
        assert rep.passed, f"{t.family} failed at a={a + gap}, b={a}"


@settings(max_examples=100, deadline=None)
@given(
    theta=st.floats(min_value=0.1, max_value=20.0),
    y=st.floats(min_value=-30.0, max_value=30.0),
)
def test_sigmoid_power_bounded(theta, y):
    g = math.exp(SigmoidPowerTransform(alpha=1.0).log_eval(theta, y))
    assert 0.0 < g <= 1.0


@settings(max_examples=100, deadline=None)
@given(
    theta=st.floats(min_value=0.1, max_value=10.0),
    y=st.floats(min_value=-60.0, max_value=60.0),
    dy=st.floats(min_value=1e-6, max_value=10.0),
)
def test_log_eval_nondecreasing_in_y(theta, y, dy):
    # monotone amplification: g(theta, y + dy) >= g(theta, y)
    for t in (ExponentialTransform(), SoftplusTransform(),
              SigmoidPowerTransform(alpha=1.0), FracExponentialTransform(alpha=0.5)):
        assert t.log_eval(theta, y + dy) >= t.log_eval(theta, y) - 1e-12
