"""Ratio-monotone transforms g(theta, y).

A transform maps raw objective values y through a nonnegative, nondecreasing
function whose contrast is controlled by the amplification parameter theta.
The property that makes smoothing concentrate mass near the maximizer is
ratio-monotonicity: for fixed a > b in the valid domain, theta ->
g(theta, a) / g(theta, b) is nondecreasing.

Seven families are shipped:

    power(c)               (y + c)^theta            on y > -c
    exponential            e^{theta y}
    frac_exponential(a)    e^{theta * max(y,0)^a}
    power_exp_hybrid(c,b)  (y + c)^b e^{theta y}    on y > -c
    softplus               log(1 + e^{theta y})
    sinh_shift(c)          sinh(theta (y + c))      on y >= -c (clamped at 0)
    sigmoid_power(a)       sigmoid(a y)^theta       bounded in (0, 1]

softplus and sigmoid_power carry the ratio-monotonicity guarantee only for
a > b > 0; outside that domain the check reports "not claimed" rather than
pass/fail.

``log_eval`` is the numerically safe entry point: it never forms e^{theta y}
and is what the estimators consume.  ``eval`` returns linear-scale values and
refuses exponent arguments that would overflow or underflow double precision
(|exponent| > 700) instead of silently saturating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# e^{+-700} is within double range (~1e304); beyond that eval refuses.
OVERFLOW_GUARD = 700.0


class TransformDomainError(ValueError):
    """Objective value outside the transform family's valid domain."""


class AmplificationOverflowError(OverflowError):
    """Exponent argument too large in magnitude for linear-scale evaluation."""


def _check_theta(theta):
    theta = float(theta)
    if not (np.isfinite(theta) and theta > 0):
        raise ValueError(f"theta must be a positive real, got {theta}")
    return theta


def _softplus(t):
    # log(1 + e^t) without overflow
    return np.logaddexp(0.0, t)


def _guard(exponent, theta, y, family):
    bad = np.abs(exponent) > OVERFLOW_GUARD
    if np.any(bad):
        idx = np.argmax(np.atleast_1d(bad))
        yv = np.atleast_1d(np.asarray(y, dtype=float)).ravel()[idx]
        raise AmplificationOverflowError(
            f"{family}: exponent magnitude exceeds {OVERFLOW_GUARD:g} at "
            f"theta={theta:g}, y={yv:g}; use log_eval for this regime"
        )


class Transform:
    """Base class; subclasses implement log_eval and declare their domain."""

    family = "base"
    # ratio-monotonicity is only claimed for a > b > 0 in some families
    ratio_requires_positive = False

    def __init__(self, theta: float | None = None):
        self.theta = None if theta is None else _check_theta(theta)

    @property
    def params(self) -> dict:
        return {}

    def domain_check(self, y):
        """Raise TransformDomainError if any y is outside the family domain."""

    def support_mask(self, y):
        """Boolean mask of y values where g is defined and positive.

        Families with a finite offset floor vanish continuously as y
        approaches it from above, so callers may extend g by zero below the
        floor instead of erroring; this mask tells them where.  log_eval
        itself stays strict (see domain_check).
        """
        return np.ones(np.shape(y), dtype=bool)

    def log_eval(self, theta, y):
        raise NotImplementedError

    def eval(self, theta, y):
        """Linear-scale g(theta, y); refuses overflow-prone exponents."""
        logv = self.log_eval(theta, y)
        _guard(logv, float(theta), y, self.family)
        out = np.exp(logv)
        return float(out) if np.ndim(y) == 0 else out

    def label(self) -> str:
        if not self.params:
            return self.family
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family}({inner})"

    def __repr__(self):
        return f"<Transform {self.label()}>"


class PowerTransform(Transform):
    """g = (y + c)^theta on y > -c."""

    family = "power"

    def __init__(self, c: float = 0.0, theta=None):
        super().__init__(theta)
        if not np.isfinite(c):
            raise ValueError(f"power offset c must be finite, got {c}")
        self.c = float(c)

    @property
    def params(self):
        return {"c": self.c}

    def domain_check(self, y):
        if np.any(np.asarray(y, dtype=float) <= -self.c):
            raise TransformDomainError(
                f"power(c={self.c:g}) requires y > {-self.c:g}"
            )

    def support_mask(self, y):
        return np.asarray(y, dtype=float) > -self.c

    def log_eval(self, theta, y):
        theta = _check_theta(theta)
        self.domain_check(y)
        out = theta * np.log(np.asarray(y, dtype=float) + self.c)
        return float(out) if np.ndim(y) == 0 else out


class ExponentialTransform(Transform):
    """g = e^{theta y}."""

    family = "exponential"

    def log_eval(self, theta, y):
        theta = _check_theta(theta)
        out = theta * np.asarray(y, dtype=float)
        return float(out) if np.ndim(y) == 0 else out


class FracExponentialTransform(Transform):
    """g = e^{theta * max(y, 0)^alpha} with alpha > 0."""

    family = "frac_exponential"

    def __init__(self, alpha: float, theta=None):
        super().__init__(theta)
        if not (np.isfinite(alpha) and alpha > 0):
            raise ValueError(f"frac_exponential requires alpha > 0, got {alpha}")
        self.alpha = float(alpha)

    @property
    def params(self):
        return {"alpha": self.alpha}

    def log_eval(self, theta, y):
        theta = _check_theta(theta)
        yp = np.maximum(np.asarray(y, dtype=float), 0.0)
        out = theta * yp**self.alpha
        return float(out) if np.ndim(y) == 0 else out


class PowerExpHybridTransform(Transform):
    """g = (y + c)^beta e^{theta y} on y > -c, with beta >= 0, c >= 0."""

    family = "power_exp_hybrid"

    def __init__(self, c: float, beta: float, theta=None):
        super().__init__(theta)
        if not (np.isfinite(c) and c >= 0):
            raise ValueError(f"power_exp_hybrid requires c >= 0, got {c}")
        if not (np.isfinite(beta) and beta >= 0):
            raise ValueError(f"power_exp_hybrid requires beta >= 0, got {beta}")
        self.c = float(c)
        self.beta = float(beta)

    @property
    def params(self):
        return {"c": self.c, "beta": self.beta}

    def domain_check(self, y):
        if np.any(np.asarray(y, dtype=float) <= -self.c):
            raise TransformDomainError(
                f"power_exp_hybrid(c={self.c:g}) requires y > {-self.c:g}"
            )

    def support_mask(self, y):
        return np.asarray(y, dtype=float) > -self.c

    def log_eval(self, theta, y):
        theta = _check_theta(theta)
        self.domain_check(y)
        y = np.asarray(y, dtype=float)
        out = self.beta * np.log(y + self.c) + theta * y
        return float(out) if np.ndim(y) == 0 else out


class SoftplusTransform(Transform):
    """g = log(1 + e^{theta y}); grows linearly for large theta*y, so linear
    evaluation never overflows."""

    family = "softplus"
    ratio_requires_positive = True

    def log_eval(self, theta, y):
        theta = _check_theta(theta)
        t = theta * np.asarray(y, dtype=float)
        sp = _softplus(t)
        # for very negative t, log(softplus(t)) = t + O(e^t); the direct log
        # would underflow to -inf before t does
        with np.errstate(divide="ignore"):
            out = np.where(t < -36.0, t, np.log(np.maximum(sp, np.finfo(float).tiny)))
        return float(out) if np.ndim(y) == 0 else out

    def eval(self, theta, y):
        theta = _check_theta(theta)
        out = _softplus(theta * np.asarray(y, dtype=float))
        return float(out) if np.ndim(y) == 0 else out


class SinhShiftTransform(Transform):
    """g = sinh(theta (y + c)) restricted to y >= -c, where it is nonnegative;
    the value at y = -c is exactly 0."""

    family = "sinh_shift"

    def __init__(self, c: float = 0.0, theta=None):
        super().__init__(theta)
        if not np.isfinite(c):
            raise ValueError(f"sinh_shift offset c must be finite, got {c}")
        self.c = float(c)

    @property
    def params(self):
        return {"c": self.c}

    def domain_check(self, y):
        if np.any(np.asarray(y, dtype=float) < -self.c):
            raise TransformDomainError(
                f"sinh_shift(c={self.c:g}) requires y >= {-self.c:g}"
            )

    def support_mask(self, y):
        return np.asarray(y, dtype=float) >= -self.c

    def log_eval(self, theta, y):
        theta = _check_theta(theta)
        self.domain_check(y)
        u = theta * (np.asarray(y, dtype=float) + self.c)
        # log sinh(u) = u - log 2 + log(1 - e^{-2u}), exact -inf at u = 0
        with np.errstate(divide="ignore"):
            out = u - np.log(2.0) + np.log1p(-np.exp(-2.0 * u))
        return float(out) if np.ndim(y) == 0 else out


class SigmoidPowerTransform(Transform):
    """g = sigmoid(alpha y)^theta with alpha > 0; bounded in (0, 1]."""

    family = "sigmoid_power"
    ratio_requires_positive = True

    def __init__(self, alpha: float, theta=None):
        super().__init__(theta)
        if not (np.isfinite(alpha) and alpha > 0):
            raise ValueError(f"sigmoid_power requires alpha > 0, got {alpha}")
        self.alpha = float(alpha)

    @property
    def params(self):
        return {"alpha": self.alpha}

    def log_eval(self, theta, y):
        theta = _check_theta(theta)
        # theta * log sigmoid(alpha y) = -theta * softplus(-alpha y)
        out = -theta * _softplus(-self.alpha * np.asarray(y, dtype=float))
        return float(out) if np.ndim(y) == 0 else out


_FAMILIES = {
    "power": PowerTransform,
    "exponential": ExponentialTransform,
    "frac_exponential": FracExponentialTransform,
    "power_exp_hybrid": PowerExpHybridTransform,
    "softplus": SoftplusTransform,
    "sinh_shift": SinhShiftTransform,
    "sigmoid_power": SigmoidPowerTransform,
}


def make_transform(family: str, **params) -> Transform:
    """Construct a transform from config fields (theta may be included)."""
    try:
        cls = _FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown transform family {family!r}; available: {sorted(_FAMILIES)}"
        ) from None
    return cls(**params)


def shipped_transforms() -> list[Transform]:
    """One representative of each family, for the verification suite."""
    return [
        PowerTransform(c=1.0),
        ExponentialTransform(),
        FracExponentialTransform(alpha=0.5),
        PowerExpHybridTransform(c=1.0, beta=2.0),
        SoftplusTransform(),
        SinhShiftTransform(c=1.0),
        SigmoidPowerTransform(alpha=1.0),
    ]


@dataclass
class RatioReport:
    """Outcome of a ratio-monotonicity probe on one (a, b) pair."""

    family: str
    a: float
    b: float
    status: str  # "pass" | "fail" | "not_claimed"
    min_margin: float
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"


def ratio_monotonicity_check(t: Transform, a: float, b: float, theta_grid) -> RatioReport:
    """Probe that theta -> g(theta, a) / g(theta, b) is nondecreasing.

    Requires a > b with both in the transform's domain.  Families whose
    guarantee only covers a > b > 0 report "not claimed" for other pairs.
    Ratios are compared on the linear scale (tolerance 1e-12) when they fit
    in double precision, and on the log scale (which is stricter) when they
    do not.
    """
    a, b = float(a), float(b)
    if not a > b:
        raise ValueError(f"need a > b, got a={a}, b={b}")
    t.domain_check(np.array([a, b]))
    if t.ratio_requires_positive and b <= 0:
        return RatioReport(
            t.family, a, b, "not_claimed", np.nan,
            "ratio-monotonicity is only claimed for a > b > 0 in this family",
        )
    grid = np.asarray(theta_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("theta_grid must be strictly increasing with >= 2 points")

    log_ratio = np.array(
        [t.log_eval(th, a) - t.log_eval(th, b) for th in grid]
    )
    if not np.all(np.isfinite(log_ratio)):
        # g(theta, b) can be 0 only at a domain boundary (sinh_shift at -c),
        # which drives the log ratio to +inf
        raise TransformDomainError(
            f"{t.family}: g(theta, b)=0 at b={b:g}; ratio undefined"
        )
    if np.max(np.abs(log_ratio)) < OVERFLOW_GUARD:
        ratio = np.exp(log_ratio)
        margins = np.diff(ratio)
        ok = bool(np.all(margins >= -1e-12))
    else:
        margins = np.diff(log_ratio)
        ok = bool(np.all(margins >= 0.0))
    return RatioReport(
        t.family, a, b, "pass" if ok else "fail", float(np.min(margins))
    )
