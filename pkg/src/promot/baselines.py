"""Comparison optimizers sharing the Objective interface and Trajectory type.

EPGS is not reimplemented: it is exactly the main optimizer with a Gaussian
kernel and an exponential transform, and `epgs_config` just assembles that
configuration so trajectories are bit-identical to the equivalent call.

The remaining methods use the two-point Gaussian-perturbation estimator with
a shared center,

    g_hat = (1/B) sum_k ((f(mu + sigma u_k) - f(mu)) / sigma) u_k,
    u_k ~ N(0, I_d),

which costs B+1 evaluations per step; the center evaluation doubles as the
metric value f(mu_t), so a T-step run costs (B+1)*T + 1 total, matching the
main optimizer's counter.  Forward differences from a shared center (rather
than central differences) are a deliberate choice and tests lock it in.

Update rules, reconstructed from the methods' standard forms:

    zo_sgd   mu += eta_t g_hat, sigma fixed.
    rsgf     same, with sigma_t = sigma0 * gamma_dec^t.
    zo_adamm AMSGrad moments: m = b1 m + (1-b1) g, v = b2 v + (1-b2) g^2,
             vhat = max(vhat, v), mu += eta_t m / (sqrt(vhat) + eps).
    zo_slghr mu-step at sigma_t, then sigma_{t+1} = sigma_t * gamma_dec
             (so sigma_t = sigma0 * gamma_dec^t exactly).
    zo_slghd mu-step, then an ascent step of size alpha on sigma using the
             sigma-score estimator (1/B) sum (f(mu+sigma u)-f(mu)) (||u||^2-d)/sigma,
             floored by the decay schedule:
             sigma_{t+1} = max(sigma + alpha dG/dsigma, sigma0 * gamma_dec^(t+1)).

All of these maximize.  Sigma underflow below 1e-12 is clamped and flagged
on the trajectory rather than raising; the run continues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import GaussianKernel
from .objectives import Objective
from .optimizer import ScheduleSpec, Trajectory, _as_rng
from .smoothing import SmoothingSpec
from .transforms import ExponentialTransform

_SIGMA_FLOOR = 1e-12
_ADAMM_EPS = 1e-8
_DIVERGENCE_FACTOR = 1e3

METHODS = ("rsgf", "zo_sgd", "zo_adamm", "zo_slghd", "zo_slghr")


def epgs_config(objective: Objective, theta: float, sigma, eta0: float,
                batch_size: int, gamma: float = 0.1,
                ridge: float | None = None) -> tuple[SmoothingSpec, ScheduleSpec]:
    """Exponential-transform Gaussian-kernel configuration for the main driver."""
    spec = SmoothingSpec.for_objective(
        GaussianKernel(), ExponentialTransform(), theta, sigma, batch_size,
        objective, ridge,
    )
    return spec, ScheduleSpec("isotropic_poly", gamma=gamma, base=float(eta0))


@dataclass(frozen=True)
class BaselineSpec:
    """Two-point baseline configuration.

    gamma_dec is required by rsgf / zo_slghd / zo_slghr, alpha by zo_slghd,
    beta1 and beta2 by zo_adamm; the others ignore them.
    """

    method: str
    eta0: float
    sigma0: float
    batch_size: int
    gamma_dec: float | None = None
    alpha: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    gamma: float = 0.1  # poly step-size decay exponent offset

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (np.isfinite(self.eta0) and self.eta0 >= 0):
            raise ValueError(f"eta0 must be finite and >= 0, got {self.eta0}")
        if not (np.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.method in ("rsgf", "zo_slghd", "zo_slghr"):
            if self.gamma_dec is None or not 0.0 < self.gamma_dec <= 1.0:
                raise ValueError(f"{self.method} needs gamma_dec in (0, 1], got {self.gamma_dec}")
        if self.method == "zo_slghd":
            if self.alpha is None or not self.alpha > 0:
                raise ValueError(f"zo_slghd needs alpha > 0, got {self.alpha}")
        if self.method == "zo_adamm":
            for name, v in (("beta1", self.beta1), ("beta2", self.beta2)):
                if v is None or not 0.0 < v < 1.0:
                    raise ValueError(f"zo_adamm needs {name} in (0, 1), got {v}")

    def schedule(self) -> ScheduleSpec:
        return ScheduleSpec("isotropic_poly", gamma=self.gamma, base=self.eta0)


def _two_point(f, mu, sigma, f_center, U):
    """Shared-center forward-difference estimator and the perturbed values."""
    fp = f.evaluate_batch(mu + sigma * U)
    coef = (fp - f_center) / sigma
    return (coef @ U) / U.shape[0], fp


def baseline_run(bspec: BaselineSpec, f: Objective, mu0, T: int, seed=None,
                 schedule: ScheduleSpec | None = None) -> Trajectory:
    """Run a baseline for T steps; same abort semantics as the main driver."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    mu0 = np.asarray(mu0, dtype=float)
    d = f.dimension
    if mu0.shape != (d,) or not np.all(np.isfinite(mu0)):
        raise ValueError(f"mu0 must be a finite vector of shape ({d},)")
    rng = _as_rng(seed)
    sched = schedule if schedule is not None else bspec.schedule()
    eta = sched.rates(T)
    escape_radius = _DIVERGENCE_FACTOR * f.domain.diameter()
    B = bspec.batch_size

    method = bspec.method
    sigma = float(bspec.sigma0)
    underflow = False
    m = np.zeros(d)
    v = np.zeros(d)
    vhat = np.zeros(d)

    mu = mu0.copy()
    f_center = float(f.evaluate(mu))
    mu_hist = [mu.copy()]
    f_hist = [f_center]
    sig_hist = [sigma]
    norms: list[float] = []
    evals = [1]
    aborted, reason, abort_step = False, None, None

    for t in range(T):
        U = rng.standard_normal((B, d))
        ghat, fp = _two_point(f, mu, sigma, f_center, U)

        if method == "zo_adamm":
            m = bspec.beta1 * m + (1.0 - bspec.beta1) * ghat
            v = bspec.beta2 * v + (1.0 - bspec.beta2) * ghat * ghat
            vhat = np.maximum(vhat, v)
            direction = m / (np.sqrt(vhat) + _ADAMM_EPS)
        else:
            direction = ghat

        if not np.all(np.isfinite(direction)):
            aborted, reason, abort_step = True, "non-finite gradient direction", t
            break
        mu = mu + eta[t] * direction
        norms.append(float(np.linalg.norm(direction)))

        if method in ("rsgf", "zo_slghr"):
            sigma = bspec.sigma0 * bspec.gamma_dec ** (t + 1)
        elif method == "zo_slghd":
            # sigma-score ascent reusing the mu-step evaluations
            dg_dsigma = float(np.mean((fp - f_center) * (np.sum(U * U, axis=1) - d)) / sigma)
            sigma = max(sigma + bspec.alpha * dg_dsigma,
                        bspec.sigma0 * bspec.gamma_dec ** (t + 1))
        if sigma < _SIGMA_FLOOR:
            sigma = _SIGMA_FLOOR
            underflow = True

        f_center = float(f.evaluate(mu))
        mu_hist.append(mu.copy())
        f_hist.append(f_center)
        sig_hist.append(sigma)
        evals.append(evals[-1] + B + 1)
        if not np.isfinite(f_center):
            aborted, reason, abort_step = True, "non-finite objective value", t
            break
        if np.max(np.abs(mu)) > escape_radius:
            aborted, reason, abort_step = True, "iterate diverged past domain guard", t
            break

    done = len(norms)
    return Trajectory(
        mu=np.asarray(mu_hist),
        f_mu=np.asarray(f_hist),
        eta=eta[:done],
        grad_norm=np.asarray(norms),
        evals=np.asarray(evals, dtype=np.int64),
        seed=seed if not isinstance(seed, np.random.Generator) else None,
        method=method,
        aborted=aborted,
        abort_reason=reason,
        abort_step=abort_step,
        sigma_underflow=underflow,
        sigma_path=np.asarray(sig_hist),
    )
