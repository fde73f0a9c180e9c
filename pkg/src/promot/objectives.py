"""Benchmark and target objectives.

Everything here is a maximization problem: the benchmarks are already
written so their global optimum is a maximum, and the attack loss is the
negated C&W margin.  Objectives are pure (same x, same value) and carry
their compact domain box plus, where known, the maximizer x* and optimum
value used by the metric computation.

Shipped objectives:

    ackley(d) / rosenbrock(d) / griewank(d)   canonical benchmarks
    attack_objective(...)                     targeted black-box attack loss
                                              against a SoftmaxClassifier
    landscape_objective()                     fixed 1-D multimodal function
                                              for smoothing-landscape studies
    SubprocessObjective                       external black box over a line
                                              protocol

The smoothed-surrogate quadrature evaluator that pairs with
``landscape_objective`` lives in ``promot.smoothing`` (it needs the kernel
and transform machinery).
"""

from __future__ import annotations

import select
import subprocess
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo_i, hi_i]^d."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def cube(cls, lo: float, hi: float, d: int) -> "Box":
        if not lo < hi:
            raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
        return cls(np.full(d, float(lo)), np.full(d, float(hi)))

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box lo/hi must be 1-D arrays of equal length")
        if np.any(lo >= hi):
            raise ValueError("box requires lo < hi in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x) -> np.ndarray:
        """Elementwise membership for points along the last axis."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))


class Objective:
    """A black-box function over a compact box (maximization convention)."""

    def __init__(self, name, dimension, fn_batch, domain: Box,
                 x_star=None, optimum=None):
        self.name = name
        self.dimension = int(dimension)
        self._fn_batch = fn_batch
        self.domain = domain
        if domain.dim != self.dimension:
            raise ValueError(
                f"domain dim {domain.dim} != objective dim {self.dimension}"
            )
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.optimum = None if optimum is None else float(optimum)
        if self.x_star is not None and self.x_star.shape != (self.dimension,):
            raise ValueError("x_star has wrong dimension")

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected shape ({self.dimension},), got {x.shape}")
        return float(self._fn_batch(x[None, :])[0])

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise ValueError(f"expected shape (n, {self.dimension}), got {X.shape}")
        out = np.asarray(self._fn_batch(X), dtype=float)
        if out.shape != (X.shape[0],):
            raise ValueError("objective batch function returned wrong shape")
        return out

    def __repr__(self):
        return f"<Objective {self.name} d={self.dimension}>"


def ackley(d: int) -> Objective:
    """20 exp(-0.2 sqrt(mean x^2)) + exp(mean cos(2 pi x)) - 20 - e.

    Global maximum 0 at the origin.
    """
    if d < 1:
        raise ValueError(f"ackley requires d >= 1, got {d}")

    def values(X):
        rms = np.sqrt(np.mean(X * X, axis=-1))
        cos_term = np.mean(np.cos(2.0 * np.pi * X), axis=-1)
        return 20.0 * np.exp(-0.2 * rms) + np.exp(cos_term) - 20.0 - np.e

    return Objective("ackley", d, values, Box.cube(-32.768, 32.768, d),
                     x_star=np.zeros(d), optimum=0.0)


def rosenbrock(d: int) -> Objective:
    """-(1/(D-1)) sum_d [100 (x_{d+1} - x_d^2)^2 + (1 - x_d)^2].

    Global maximum 0 at the all-ones point.  Needs d >= 2 (the sum runs over
    consecutive coordinate pairs).
    """
    if d < 2:
        raise ValueError(f"rosenbrock requires d >= 2, got {d}")

    def values(X):
        a = X[..., 1:] - X[..., :-1] ** 2
        b = 1.0 - X[..., :-1]
        return -np.mean(100.0 * a * a + b * b, axis=-1)

    return Objective("rosenbrock", d, values, Box.cube(-5.0, 10.0, d),
                     x_star=np.ones(d), optimum=0.0)


_GRIEWANK_FACTOR = 1.05**0.2


def griewank(d: int) -> Objective:
    """-1 - sum x^2 / 4000 + prod_d 1.05^{0.2} cos(x_d / sqrt(d)).

    The cosine argument is scaled by the square root of the 1-based
    coordinate index.  Global maximum 1.05^{0.2 D} - 1 at the origin.
    """
    if d < 1:
        raise ValueError(f"griewank requires d >= 1, got {d}")
    root_idx = np.sqrt(np.arange(1, d + 1, dtype=float))

    def values(X):
        quad = np.sum(X * X, axis=-1) / 4000.0
        prod = np.prod(_GRIEWANK_FACTOR * np.cos(X / root_idx), axis=-1)
        return -1.0 - quad + prod

    return Objective("griewank", d, values, Box.cube(-600.0, 600.0, d),
                     x_star=np.zeros(d), optimum=1.05 ** (0.2 * d) - 1.0)


BENCHMARKS = {"ackley": ackley, "rosenbrock": rosenbrock, "griewank": griewank}


# --------------------------------------------------------------------------
# synthetic classifier and attack objective


@dataclass(frozen=True)
class SoftmaxClassifier:
    """Linear logits C(x) = W x + bias; the black-box target for attacks."""

    weights: np.ndarray  # (classes, d)
    bias: np.ndarray     # (classes,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ValueError("weights must be (classes, d) with matching bias")
        if w.shape[0] < 2:
            raise ValueError("classifier needs at least 2 classes")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]

    def logits(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.weights.T + self.bias

    def predict(self, x) -> int:
        return int(np.argmax(self.logits(x)))


SYNTHETIC_CLASSIFIER_SEED = 90125


def make_synthetic_classifier(dimension: int, n_classes: int = 4,
                              seed: int = SYNTHETIC_CLASSIFIER_SEED) -> SoftmaxClassifier:
    """Reproducible stand-in target: weight rows on the scale 1/sqrt(d), so
    logits over unit-scale inputs are O(1)."""
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1.0 / np.sqrt(dimension), size=(n_classes, dimension))
    b = rng.normal(0.0, 0.25, size=n_classes)
    return SoftmaxClassifier(w, b)


def attack_objective(classifier: SoftmaxClassifier, x, kappa: float = 0.0,
                     lambda_pen: float = 0.0, box_radius: float = 5.0) -> Objective:
    """Targeted attack loss over the perturbation mu (maximization).

    L(mu) = -max{ max_{y != tgt} C(x+mu)_y - C(x+mu)_tgt, kappa } - lambda_pen ||mu||_2

    with the target class tgt = argmin_y C(x)_y (the most unlikely class at
    the clean input).  Success means argmax_y C(x+mu)_y == tgt; with kappa=0
    and lambda_pen=0 this is equivalent (up to logit ties) to L = 0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (classifier.dimension,):
        raise ValueError(
            f"input shape {x.shape} does not match classifier d={classifier.dimension}"
        )
    if lambda_pen < 0:
        raise ValueError(f"lambda_pen must be >= 0, got {lambda_pen}")
    tgt = int(np.argmin(classifier.logits(x)))
    others = np.array([c for c in range(classifier.n_classes) if c != tgt])

    def values(M):
        logits = (x + M) @ classifier.weights.T + classifier.bias
        margin = np.max(logits[:, others], axis=1) - logits[:, tgt]
        pen = lambda_pen * np.linalg.norm(M, axis=1)
        return -np.maximum(margin, kappa) - pen

    obj = Objective(
        "attack", classifier.dimension, values,
        Box.cube(-box_radius, box_radius, classifier.dimension),
    )
    obj.target_class = tgt
    obj.clean_input = x
    obj.classifier = classifier
    return obj


def attack_success(objective: Objective, mu) -> bool:
    """Whether the perturbed input is classified as the target class."""
    clf = objective.classifier
    return clf.predict(objective.clean_input + np.asarray(mu, dtype=float)) == objective.target_class


# --------------------------------------------------------------------------
# 1-D landscape objective

# Two well-separated bumps plus a short-wavelength ripple: multimodal at
# every scale the landscape studies probe, strictly positive on the box so
# identity-like transforms (power with c=0) stay in domain.
_LS_BUMPS = ((3.0, 4.0, 1.2), (2.4, -6.0, 1.4))  # (height, center, width)
_LS_RIPPLE = (0.25, 3.0)                          # (amplitude, frequency)
_LS_FLOOR = 0.3

# Global maximizer of the expression above, located by a 10^6-point grid
# over the box followed by local refinement; unique by construction (bump
# heights differ by more than twice the ripple amplitude).
LANDSCAPE_XSTAR = 4.097592034696
LANDSCAPE_WINDOW = 8.0  # stationary-point scans stay inside |mu| < this


def _landscape_values(X):
    x = X[..., 0]
    out = _LS_FLOOR + _LS_RIPPLE[0] * np.cos(_LS_RIPPLE[1] * x)
    for height, center, width in _LS_BUMPS:
        out = out + height * np.exp(-0.5 * ((x - center) / width) ** 2)
    return out


def landscape_objective() -> Objective:
    """The fixed 1-D multimodal objective used by the landscape exports and
    the localization checks."""
    obj = Objective(
        "landscape", 1, _landscape_values, Box.cube(-12.0, 12.0, 1),
        x_star=np.array([LANDSCAPE_XSTAR]),
        optimum=float(_landscape_values(np.array([[LANDSCAPE_XSTAR]]))[0]),
    )
    obj.scan_window = LANDSCAPE_WINDOW
    return obj


# --------------------------------------------------------------------------
# external black box over a line protocol


class SubprocessObjectiveError(RuntimeError):
    pass


class SubprocessObjective(Objective):
    """External objective spoken to over stdin/stdout, one evaluation per
    line: whitespace-separated coordinates in, a single real out.

    The child process is started once and reused; close() (or use as a
    context manager) terminates it.
    """

    def __init__(self, argv, dimension: int, domain: Box, timeout: float = 10.0):
        self.timeout = float(timeout)
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1,
        )
        super().__init__("subprocess", dimension, self._batch, domain)

    def _read_line(self) -> str:
        out = self._proc.stdout
        ready, _, _ = select.select([out], [], [], self.timeout)
        if not ready:
            self.close()
            raise SubprocessObjectiveError(
                f"external objective timed out after {self.timeout:g}s"
            )
        line = out.readline()
        if line == "":
            raise SubprocessObjectiveError("external objective closed its output")
        return line

    def _eval_one(self, x) -> float:
        if self._proc.poll() is not None:
            raise SubprocessObjectiveError("external objective process has exited")
        self._proc.stdin.write(" ".join(repr(float(v)) for v in x) + "\n")
        self._proc.stdin.flush()
        line = self._read_line()
        try:
            return float(line.strip())
        except ValueError:
            raise SubprocessObjectiveError(
                f"external objective wrote a non-numeric line: {line!r}"
            ) from None

    def _batch(self, X):
        return np.array([self._eval_one(row) for row in X])

    def close(self):
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
