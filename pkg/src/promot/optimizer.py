"""Stochastic gradient ascent on the smoothed objective.

One loop, fixed smoothing scales: mu_{t+1} = mu_t + eta_t * g_hat_t, where
g_hat_t is the plain or leave-one-out score estimator.  The scales in the
SmoothingSpec are never touched; localization comes from the transform's
amplification, not from shrinking sigma.

The update consumes the estimator's batch-normalized direction (the
grad G / G estimate) rescaled into score-norm units, with an exploration
window that decays into an endgame over the run.  Step sizes therefore
operate on a gradient whose scale is set by the smoothing scores, not by
the transform, regardless of how extreme the amplification is; the
configured schedules assume this.  See run() for the policy.

Per step the objective is evaluated B times for the estimator plus once at
the new iterate for metrics, so a T-step run costs (B+1)*T + 1 evaluations
including f(mu_0).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .objectives import Objective
from .smoothing import SmoothingSpec, loo_gradient, score_gradient

_DIVERGENCE_FACTOR = 1e3

_ESTIMATORS = {"plain": score_gradient, "loo": loo_gradient}


def schedule_constant(gamma: float) -> float:
    """C_gamma = (1/2 - gamma) / (2^(1/2 - gamma) - 1) for gamma in (0, 1/2)."""
    if not 0.0 < gamma < 0.5:
        raise ValueError(f"gamma must lie in (0, 1/2), got {gamma}")
    return (0.5 - gamma) / (2.0 ** (0.5 - gamma) - 1.0)


@dataclass(frozen=True)
class ScheduleSpec:
    """Step-size schedule.

    kinds:
        isotropic_poly    eta_t = base * (t+1)^-(1/2+gamma), base defaulting
                          to sigma^2/d (requires equal scales)
        anisotropic_poly  same decay, base defaulting to 1/S2(Sigma)
        constant          eta_t = base
        table             eta_t = table[t]

    An explicit base always overrides the derived one.
    """

    kind: str
    gamma: float = 0.1
    base: float | None = None
    table: tuple[float, ...] | None = None

    _KINDS = ("isotropic_poly", "anisotropic_poly", "constant", "table")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; expected one of {self._KINDS}")
        if self.kind in ("isotropic_poly", "anisotropic_poly") and not 0.0 < self.gamma < 0.5:
            raise ValueError(f"gamma must lie in (0, 1/2), got {self.gamma}")
        if self.kind == "constant" and self.base is None:
            raise ValueError("constant schedule needs an explicit base")
        if self.kind == "table":
            if not self.table:
                raise ValueError("table schedule needs a non-empty table")
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        if self.base is not None and not (np.isfinite(self.base) and self.base >= 0):
            raise ValueError(f"base must be finite and >= 0, got {self.base}")

    def base_for(self, spec: SmoothingSpec | None) -> float:
        if self.base is not None:
            return float(self.base)
        if spec is None:
            raise ValueError("derived schedule base needs a SmoothingSpec")
        if self.kind == "isotropic_poly":
            sig = spec.scales
            if not np.all(sig == sig[0]):
                raise ValueError(
                    "isotropic_poly with derived base requires equal scales; "
                    "use anisotropic_poly or give an explicit base"
                )
            return float(sig[0] ** 2 / spec.dim)
        if self.kind == "anisotropic_poly":
            return 1.0 / spec.s2()
        raise ValueError(f"{self.kind} schedule has no derived base")

    def rates(self, T: int, spec: SmoothingSpec | None = None) -> np.ndarray:
        """eta_0 .. eta_{T-1} as an array."""
        if self.kind == "table":
            if len(self.table) < T:
                raise ValueError(f"table has {len(self.table)} entries but T={T}")
            return np.asarray(self.table[:T], dtype=float)
        if self.kind == "constant":
            return np.full(T, float(self.base))
        base = self.base_for(spec)
        t = np.arange(T, dtype=float)
        return base * (t + 1.0) ** (-(0.5 + self.gamma))


@dataclass
class Trajectory:
    """Iterates plus per-step bookkeeping for one optimizer run.

    grad_norm[t] is the Euclidean norm of the update vector consumed at
    step t, after magnitude rescaling (see run()); evals is the cumulative
    objective evaluation counter, evals[-1] = (B+1)*T + 1 for a completed
    run.
    """

    mu: np.ndarray
    f_mu: np.ndarray
    eta: np.ndarray
    grad_norm: np.ndarray
    evals: np.ndarray
    seed: object
    method: str = "promot"
    aborted: bool = False
    abort_reason: str | None = None
    abort_step: int | None = None
    n_starved_steps: int = 0
    sigma_underflow: bool = False  # set by sigma-adapting baselines only
    sigma_path: np.ndarray | None = None  # per-step sigma for adapting baselines

    @property
    def steps_completed(self) -> int:
        return self.mu.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.mu.shape[1]

    def final_mu(self) -> np.ndarray:
        return self.mu[-1]


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def run(spec: SmoothingSpec, f: Objective, mu0, schedule: ScheduleSpec, T: int,
        estimator: str = "plain", seed=None, method_label: str | None = None) -> Trajectory:
    """Ascend the smoothed objective for T steps from mu0.

    The consumed update points along the batch-normalized estimate
    grad G / G (GradientEstimate.normalized) and takes its magnitude from
    the smoothing scores, not from the estimate:

        |update_t| = eta_t * r * min(1, ((t+1) / (T/4))^(-1/2)),
        r = sqrt(S2 * I) = RMS norm of a single score vector

    For the first quarter of the budget every step is a full score length
    times eta_t, which carries the iterate across plateaus and ripple
    basins where the gradient signal is too weak to do so on its own; the
    magnitude then decays as 1/sqrt of elapsed steps on top of the eta_t
    schedule, which hands the endgame to whichever estimator points most
    accurately.  Tying the magnitude to the score scale rather than to the
    estimate keeps a weight-concentrated batch (one sample dominating an
    amplified transform) from flinging the iterate, makes step sizes
    calibrated on one transform carry over to transforms whose raw output
    differs by hundreds of orders of magnitude, and leaves the direction
    (hence the zeros of grad G) untouched.  Starved batches contribute a
    zero step.

    Aborts (returning the partial trajectory, flagged) when the estimator
    direction or the metric value f(mu) turns non-finite, or when the
    iterate escapes past 1000x the domain box diameter.  Nothing is clamped.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if estimator not in _ESTIMATORS:
        raise ValueError(f"estimator must be one of {sorted(_ESTIMATORS)}, got {estimator!r}")
    mu0 = np.asarray(mu0, dtype=float)
    if mu0.shape != (spec.dim,) or not np.all(np.isfinite(mu0)):
        raise ValueError(f"mu0 must be a finite vector of shape ({spec.dim},)")
    grad_fn = _ESTIMATORS[estimator]
    rng = _as_rng(seed)
    eta = schedule.rates(T, spec)
    escape_radius = _DIVERGENCE_FACTOR * spec.domain.diameter()
    score_rms = np.sqrt(spec.s2() * spec.kernel.fisher_info)
    explore_window = max(1.0, T / 4.0)

    label = method_label or ("promot" if estimator == "plain" else "promot-loo")
    mu_hist = [mu0.copy()]
    f_hist = [float(f.evaluate(mu0))]
    norms: list[float] = []
    evals = [1]
    n_starved = 0
    aborted, reason, abort_step = False, None, None

    mu = mu0.copy()
    for t in range(T):
        g = grad_fn(spec, f, mu, rng)
        if g.diagnostics.starved:
            n_starved += 1
        direction = g.normalized
        if not np.all(np.isfinite(direction)):
            aborted, reason, abort_step = True, "non-finite gradient direction", t
            break
        raw_norm = float(np.linalg.norm(direction))
        if raw_norm > 0.0:
            magnitude = score_rms * min(1.0, ((t + 1.0) / explore_window) ** -0.5)
            direction = (magnitude / raw_norm) * direction
        mu = mu + eta[t] * direction
        norms.append(float(np.linalg.norm(direction)))
        fv = float(f.evaluate(mu))
        mu_hist.append(mu.copy())
        f_hist.append(fv)
        evals.append(evals[-1] + spec.batch_size + 1)
        if not np.isfinite(fv):
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
        method=label,
        aborted=aborted,
        abort_reason=reason,
        abort_step=abort_step,
        n_starved_steps=n_starved,
    )


def grid_complexity_bound(gamma: float, s2: float, g_star: float, fisher_info: float,
                          curvature: float, epsilon: float,
                          alignment: float = 0.0) -> float:
    """Sufficient iteration count for E||grad G||^2 < epsilon.

    T > [ C_gamma * S2 * (g* + I max(K,I) g*^3 (1 - alignment/2)) / eps ]^(2/(1-2 gamma))

    alignment is the worst-case score/objective alignment coefficient of the
    leave-one-out analysis; 0 recovers the plain-estimator bound.  Reporting
    utility only; nothing in the optimizer consumes it.
    """
    c_gamma = schedule_constant(gamma)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0.0 <= alignment <= 1.0:
        raise ValueError(f"alignment must lie in [0, 1], got {alignment}")
    inner = g_star + fisher_info * max(curvature, fisher_info) * g_star**3 * (1.0 - alignment / 2.0)
    return float((c_gamma * s2 * inner / epsilon) ** (2.0 / (1.0 - 2.0 * gamma)))


def trajectory_csv_text(traj: Trajectory, include_mu: bool | None = None) -> str:
    """Trajectory table as CSV text; include_mu defaults to d <= 20.

    Rows are steps 0..T; eta and grad_norm describe the update applied at
    that step, so the last row leaves them empty.
    """
    import io

    d = traj.dim
    if include_mu is None:
        include_mu = d <= 20
    cols = ["step", "eta"]
    if include_mu:
        cols += [f"mu_{i}" for i in range(d)]
    cols += ["f_mu", "grad_norm", "evals"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    n = traj.mu.shape[0]
    for t in range(n):
        row = [str(t)]
        row.append(repr(float(traj.eta[t])) if t < traj.eta.size else "")
        if include_mu:
            row += [repr(float(v)) for v in traj.mu[t]]
        row.append(repr(float(traj.f_mu[t])))
        row.append(repr(float(traj.grad_norm[t])) if t < traj.grad_norm.size else "")
        row.append(str(int(traj.evals[t])))
        w.writerow(row)
    return buf.getvalue()


def trajectory_to_csv(traj: Trajectory, path, include_mu: bool | None = None) -> None:
    """Write the trajectory table atomically (temp file + rename)."""
    import os
    import tempfile

    text = trajectory_csv_text(traj, include_mu)
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
