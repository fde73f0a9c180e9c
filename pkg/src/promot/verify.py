"""Verification suites: numerical checks of the library's core claims.

Each suite returns CheckResult records; the CLI `verify` command and the
acceptance tests share these implementations so there is exactly one
definition of every check.

Suites:
    constants      kernel Fisher information and curvature integrals vs the
                   reference table (quadrature vs closed forms)
    transforms     ratio monotonicity on random pairs per family, plus
                   boundedness of the sigmoid-power family
    unbiasedness   plain and leave-one-out estimators vs a common-random-
                   number central-difference oracle
    second_moment  empirical second moment vs the g*^2 I S2 bound
    loo            paired variance-reduction test at benchmark presets
    lipschitz      quadrature |G''| vs the g* max(K,I)/sigma^2 bound
    localization   stationary points of G' concentrate near the maximizer
                   once amplification crosses the recorded thresholds
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .kernels import (
    REFERENCE_CONSTANTS,
    compute_constants,
    make_kernel,
    shipped_kernels,
)
from .objectives import ackley, griewank, landscape_objective, rosenbrock
from .smoothing import (
    SmoothingSpec,
    _loo_from_weights,
    _plain_from_weights,
    default_ridge,
    grad_sign_changes,
    paired_second_moments,
    second_moment_probe,
    smoothed_second_deriv_quadrature,
)
from .transforms import make_transform, ratio_monotonicity_check

SUITES = ("constants", "transforms", "unbiasedness", "second_moment",
          "loo", "lipschitz", "localization")

FISHER_TOL = 1e-3
CURVATURE_TOL = 5e-3
LOCALIZATION_DELTA = 0.25
LOCALIZATION_SIGMAS = (2.0, 2.5, 3.0, 3.5)


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    measured: str
    expected: str
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"{status} {self.suite}:{self.name} measured={self.measured} expected={self.expected}"
        if self.detail:
            msg += f" ({self.detail})"
        return msg


# --------------------------------------------------------------------------
# constants


def constants_suite(kernel_rows=None) -> list[CheckResult]:
    """Quadrature I and K vs reference values for every shipped kernel.

    kernel_rows overrides the shipped list; each row is (label, kernel,
    expected_fisher, expected_curvature), which lets tests inject a kernel
    with a wrong expectation and watch the suite fail by name.
    """
    if kernel_rows is None:
        kernel_rows = [
            (kernel.label(), kernel, *REFERENCE_CONSTANTS[kernel.label()])
            for kernel in shipped_kernels()
        ]
    out = []
    for label, kernel, exp_i, exp_k in kernel_rows:
        got_i, got_k = compute_constants(kernel)
        ok_i = abs(got_i - exp_i) <= FISHER_TOL
        ok_k = abs(got_k - exp_k) <= CURVATURE_TOL
        out.append(CheckResult(
            "constants", label, ok_i and ok_k,
            f"I={got_i:.6f},K={got_k:.6f}",
            f"I={exp_i:.6f}+-{FISHER_TOL},K={exp_k:.6f}+-{CURVATURE_TOL}",
        ))
    return out


# --------------------------------------------------------------------------
# transforms

# (family, params, sampling interval for valid (a, b) pairs)
_TRANSFORM_DOMAINS = (
    ("power", {"c": 1.0}, (-0.95, 9.0)),
    ("exponential", {}, (-10.0, 10.0)),
    ("frac_exponential", {"alpha": 0.5}, (-10.0, 10.0)),
    ("power_exp_hybrid", {"c": 1.0, "beta": 2.0}, (-0.95, 9.0)),
    ("softplus", {}, (0.05, 10.0)),          # claim holds for a > b > 0
    ("sinh_shift", {"c": 1.0}, (-0.95, 9.0)),
    ("sigmoid_power", {"alpha": 1.0}, (0.05, 10.0)),  # claim for a > b > 0
)


def transforms_suite(seed: int = 7, n_pairs: int = 100,
                     n_theta: int = 50) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    theta_grid = np.geomspace(0.05, 20.0, n_theta)
    out = []
    for family, params, (lo, hi) in _TRANSFORM_DOMAINS:
        t = make_transform(family, **params)
        failures = []
        worst = np.inf
        for _ in range(n_pairs):
            y = rng.uniform(lo, hi, size=2)
            b, a = float(np.min(y)), float(np.max(y))
            if a == b:
                a = b + 0.1
            rep = ratio_monotonicity_check(t, a, b, theta_grid)
            if rep.status == "fail":
                failures.append((a, b, rep.message))
            if np.isfinite(rep.min_margin):
                worst = min(worst, rep.min_margin)
        out.append(CheckResult(
            "transforms", family, not failures,
            f"{n_pairs - len(failures)}/{n_pairs} pairs monotone",
            f"{n_pairs}/{n_pairs}",
            detail=f"min log-ratio increment {worst:.3e}" if not failures
            else f"first failure a={failures[0][0]:.3f} b={failures[0][1]:.3f}",
        ))

    # sigmoid-power boundedness 0 < g <= 1, verified on the log scale so
    # double-precision underflow of exp cannot fake a zero
    t = make_transform("sigmoid_power", alpha=1.0)
    n_pts = 100_000
    thetas = rng.uniform(0.1, 30.0, size=20)
    ys = rng.uniform(-50.0, 50.0, size=(20, n_pts // 20))
    ok = True
    worst_lg = -np.inf
    for th, yrow in zip(thetas, ys):
        lg = t.log_eval(float(th), yrow)
        if not (np.all(np.isfinite(lg)) and np.all(lg <= 0.0)):
            ok = False
            break
        worst_lg = max(worst_lg, float(np.max(lg)))
    out.append(CheckResult(
        "transforms", "sigmoid_power_bounded", ok,
        f"max log g = {worst_lg:.3e} over {n_pts} points",
        "log g <= 0 and finite (0 < g <= 1)",
    ))
    return out


# --------------------------------------------------------------------------
# unbiasedness


def _logh_for(f, transform, theta, box, mu, scales, Z):
    X = mu + scales * Z
    inside = box.contains(X)
    logh = np.full(inside.shape, -np.inf)
    if np.any(inside):
        vals = f.evaluate_batch(X[inside])
        sup = transform.support_mask(vals)
        lv = np.full(vals.shape, -np.inf)
        if np.any(sup):
            lv[sup] = transform.log_eval(theta, vals[sup])
        logh[inside] = lv
    return logh


def unbiasedness_suite(n_batches: int = 100_000, batch_size: int = 16,
                       seed: int = 2026) -> list[CheckResult]:
    """Both estimators vs a CRN central-difference oracle on Ackley d=2.

    Same draws feed the gradient estimators and both finite-difference
    sides, so the per-batch difference D_b = g_hat_b - fd_b has tiny
    variance and the 4-standard-error test is sharp at 1e5 batches.
    Everything is computed in common shifted units (one global log scale),
    which drops out of the comparison identically.
    """
    f = ackley(2)
    kernel = make_kernel("logistic")
    transform = make_transform("power_exp_hybrid", c=600.0, beta=10.0)
    theta = 5.0
    scales = np.array([0.5, 0.5])
    mu = np.array([1.5, -2.0])
    deltas = 1e-3 * scales
    lam = default_ridge(batch_size)

    rng = np.random.default_rng(seed)
    Z = kernel.sample(rng, n_batches * batch_size * 2).reshape(n_batches, batch_size, 2)
    S = -kernel.score(Z) / scales

    logh_c = _logh_for(f, transform, theta, f.domain, mu, scales, Z)
    C = float(np.max(logh_c))
    ht = np.exp(logh_c - C)

    grads = {
        "plain": _plain_from_weights(ht, S),
        "loo": _loo_from_weights(ht, S, lam)[0],
    }

    fd = np.empty((n_batches, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = deltas[i]
        lp = _logh_for(f, transform, theta, f.domain, mu + e, scales, Z)
        lm = _logh_for(f, transform, theta, f.domain, mu - e, scales, Z)
        hp = np.exp(lp - C).mean(axis=1)
        hm = np.exp(lm - C).mean(axis=1)
        fd[:, i] = (hp - hm) / (2.0 * deltas[i])

    out = []
    for name, g in grads.items():
        D = g - fd
        for i in range(2):
            mean_d = float(np.mean(D[:, i]))
            se = float(np.std(D[:, i]) / np.sqrt(n_batches))
            z = abs(mean_d) / se if se > 0 else 0.0
            out.append(CheckResult(
                "unbiasedness", f"{name}_coord{i}", z <= 4.0,
                f"|mean-fd|/SE = {z:.3f}", "<= 4.0",
                detail=f"mean diff {mean_d:.3e}, SE {se:.3e}",
            ))
    return out


# --------------------------------------------------------------------------
# second-moment bound


def _probe_config_rows():
    ak = ackley(3)
    gw = griewank(2)
    # log g* computed from the transform at the objective's optimum value
    rows = [
        ("ackley_iso_gaussian_exp",
         SmoothingSpec.for_objective(make_kernel("gaussian"), make_transform("exponential"),
                                     1.0, 0.5, 8, ak),
         ak, np.array([1.0, -1.5, 2.0])),
        ("ackley_aniso_logistic_hybrid",
         SmoothingSpec.for_objective(make_kernel("logistic"),
                                     make_transform("power_exp_hybrid", c=600.0, beta=10.0),
                                     1.0, [0.3, 0.5, 1.0], 8, ak),
         ak, np.array([1.0, -1.5, 2.0])),
        ("griewank_iso_hypsec_sigmoid",
         SmoothingSpec.for_objective(make_kernel("hypsec"),
                                     make_transform("sigmoid_power", alpha=1.0),
                                     2.0, 1.0, 8, gw),
         gw, np.array([10.0, -5.0])),
    ]
    return rows


def second_moment_suite(batches: int = 3000, seed: int = 11) -> list[CheckResult]:
    """Plain-estimator E||g||^2 against g*^2 I S2(Sigma) on 3 configs."""
    out = []
    for i, (name, spec, f, mu) in enumerate(_probe_config_rows()):
        rng = np.random.default_rng(seed + i)
        log_gstar = float(spec.transform.log_eval(spec.theta, np.array([f.optimum]))[0])
        probe = second_moment_probe(spec, f, mu, batches, "plain", rng,
                                    log_g_star=log_gstar)
        limit = 1.0 + 3.0 * probe.rel_se
        out.append(CheckResult(
            "second_moment", name, probe.bound_ratio <= limit,
            f"ratio={probe.bound_ratio:.4f}", f"<= {limit:.4f}",
            detail=f"R^2={probe.r2_hat:.3f}, rel SE {probe.rel_se:.4f}",
        ))
    return out


# --------------------------------------------------------------------------
# loo variance reduction

# benchmark, (kernel, hybrid c, theta, sigma) from the shipped loo presets
_LOO_PRESETS = (
    ("ackley", 600.0, 1.0, 0.1, 5.0),
    ("rosenbrock", 6000.0, 0.001, 0.1, 3.0),
    ("griewank", 1000.0, 1.0, 1.0, 5.0),
)

_BENCH = {"ackley": ackley, "rosenbrock": rosenbrock, "griewank": griewank}


def loo_suite(batches: int = 10_000, dimension: int = 10,
              batch_size: int = 50, seed: int = 23) -> list[CheckResult]:
    """Paired second-moment comparison at each benchmark's loo preset."""
    out = []
    for i, (bench, c, theta, sigma, init) in enumerate(_LOO_PRESETS):
        f = _BENCH[bench](dimension)
        spec = SmoothingSpec.for_objective(
            make_kernel("logistic"),
            make_transform("power_exp_hybrid", c=c, beta=10.0),
            theta, sigma, batch_size, f,
        )
        mu = np.full(dimension, init)
        rng = np.random.default_rng(seed + i)
        cmp = paired_second_moments(spec, f, mu, batches, rng)
        out.append(CheckResult(
            "loo", bench, cmp.reduction_confirmed(),
            f"z={cmp.z_score:.2f}", "z < -2.33 (99% one-sided)",
            detail=(f"loo/plain second-moment ratio "
                    f"{cmp.loo_mean_scaled / cmp.plain_mean_scaled:.4f}"),
        ))
    return out


# --------------------------------------------------------------------------
# 1-D Lipschitz bound

_LIPSCHITZ_PAIRS = (
    ("gaussian", "exponential", {}, 1.0, 1.0),
    ("logistic", "sigmoid_power", {"alpha": 1.0}, 3.0, 0.8),
    ("hypsec", "softplus", {}, 2.0, 1.2),
)


def lipschitz_suite(n_grid: int = 201) -> list[CheckResult]:
    """Quadrature |G''(mu)| <= g* max(K, I) / sigma^2 on a mu grid."""
    f = landscape_objective()
    out = []
    for kname, tname, tparams, theta, sigma in _LIPSCHITZ_PAIRS:
        kernel = make_kernel(kname)
        transform = make_transform(tname, **tparams)
        spec = SmoothingSpec.for_objective(kernel, transform, theta, sigma, 2, f)
        log_gstar = float(transform.log_eval(theta, np.array([f.optimum]))[0])
        bound = max(kernel.curvature, kernel.fisher_info) / sigma**2
        grid = np.linspace(-8.0, 8.0, n_grid)
        worst = 0.0
        for m in grid:
            val = abs(smoothed_second_deriv_quadrature(spec, f, float(m),
                                                       log_shift=log_gstar, tol=1e-8))
            worst = max(worst, val)
        ok = worst <= bound * (1.0 + 1e-9)
        out.append(CheckResult(
            "lipschitz", f"{kname}+{tname}", ok,
            f"max|G''| = {worst:.5f} (g* units)", f"<= {bound:.5f}",
            detail=f"theta={theta}, sigma={sigma}, {n_grid}-point grid",
        ))
    return out


# --------------------------------------------------------------------------
# localization


def load_localization_thresholds() -> dict:
    path = resources.files("promot").joinpath("data/localization.json")
    return json.loads(path.read_text())


def landscape_zero_crossings(theta: float, sigma: float,
                             n_grid: int = 161) -> np.ndarray:
    """Zeros of G' for the 1-D landscape with the exponential transform."""
    f = landscape_objective()
    spec = SmoothingSpec.for_objective(
        make_kernel("gaussian"), make_transform("exponential"),
        theta, sigma, 2, f,
    )
    log_shift = theta * f.optimum
    return grad_sign_changes(spec, f, window=f.scan_window, n_grid=n_grid,
                             log_shift=log_shift)


def localization_suite() -> list[CheckResult]:
    """Above the recorded threshold all of G's stationary points sit within
    0.25 of the maximizer; below it the landscape stays multimodal."""
    thresholds = load_localization_thresholds()
    f = landscape_objective()
    x_star = float(f.x_star[0])
    out = []
    for sigma in LOCALIZATION_SIGMAS:
        rec = thresholds[f"{sigma:.1f}"]
        th_hi, th_lo = float(rec["theta_localized"]), float(rec["theta_multimodal"])

        # the claim is "theta >= threshold localizes", so probe the recorded
        # threshold and one point half again as large
        for mult, tag in ((1.0, "localized"), (1.5, "localized_margin")):
            zeros_hi = landscape_zero_crossings(mult * th_hi, sigma)
            in_cube = np.abs(zeros_hi - x_star) <= LOCALIZATION_DELTA
            ok_hi = zeros_hi.size >= 1 and bool(np.all(in_cube))
            out.append(CheckResult(
                "localization", f"sigma={sigma}_{tag}", ok_hi,
                f"{zeros_hi.size} zeros at {np.round(zeros_hi, 3).tolist()}",
                f"all within {x_star:.3f}+-{LOCALIZATION_DELTA} "
                f"at theta={mult * th_hi:g}",
            ))

        zeros_lo = landscape_zero_crossings(th_lo, sigma)
        ok_lo = zeros_lo.size >= 2
        out.append(CheckResult(
            "localization", f"sigma={sigma}_multimodal", ok_lo,
            f"{zeros_lo.size} zeros at theta={th_lo}",
            ">= 2 zeros below threshold",
        ))
    return out


# --------------------------------------------------------------------------
# driver


def run_suites(names=None) -> list[CheckResult]:
    table = {
        "constants": constants_suite,
        "transforms": transforms_suite,
        "unbiasedness": unbiasedness_suite,
        "second_moment": second_moment_suite,
        "loo": loo_suite,
        "lipschitz": lipschitz_suite,
        "localization": localization_suite,
    }
    if names is None:
        names = SUITES
    unknown = [n for n in names if n not in table]
    if unknown:
        raise ValueError(f"unknown suite(s) {unknown}; available: {sorted(table)}")
    results = []
    for n in names:
        results.extend(table[n]())
    return results


def format_report(results: list[CheckResult]) -> str:
    lines = [r.line() for r in results]
    n_fail = sum(1 for r in results if not r.passed)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
