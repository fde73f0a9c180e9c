"""Declarative experiment configuration files.

One TOML file describes one experiment: the objective, the method, its
hyperparameters, the seed protocol and the output options.  Sweep grids are
inline lists under [sweep].  Validation is strict: unknown keys anywhere are
rejected with their full field path, and the method/objective preconditions
are exercised by a dry construction before any run starts, so a bad config
fails in milliseconds rather than mid-experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

try:  # 3.11+ stdlib, tomli otherwise
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

from .harness import ALL_METHODS, SMOOTHING_METHODS, ExperimentSpec, build_problem, build_smoothing, build_baseline


class ConfigError(ValueError):
    """Invalid configuration; `path` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


_EXPERIMENT_KEYS = {
    "objective", "dimension", "method", "T", "batch_size", "seeds",
    "n_seeds", "init_mean", "init_std", "root_seed",
}
_SMOOTHING_PARAM_KEYS = {
    "eta0", "sigma", "theta", "kernel", "kernel_params", "transform",
    "transform_params", "gamma", "ridge", "schedule",
}
_BASELINE_PARAM_KEYS = {"eta0", "sigma", "gamma", "gamma_dec", "alpha", "beta1", "beta2"}
_ATTACK_PARAM_KEYS = {"n_classes", "input_seed", "kappa", "lambda_pen", "box_radius"}
_OUTPUT_KEYS = {"directory", "trajectories", "include_mu"}
_TOP_KEYS = {"experiment", "params", "sweep", "output", "schema_version"}

_OBJECTIVES = ("ackley", "rosenbrock", "griewank", "landscape", "attack_synthetic")


@dataclass
class ExperimentConfig:
    spec: ExperimentSpec
    seeds: list[int]
    root_seed: int = 0
    sweep: dict = field(default_factory=dict)
    output_dir: str | None = None
    write_trajectories: bool = True
    include_mu: bool | None = None


def _require(table: dict, key: str, types, path: str):
    if key not in table:
        raise ConfigError(f"{path}.{key}", "required key missing")
    v = table[key]
    if not isinstance(v, types) or isinstance(v, bool) and bool not in _astuple(types):
        raise ConfigError(f"{path}.{key}", f"expected {_typename(types)}, got {type(v).__name__}")
    return v


def _astuple(types):
    return types if isinstance(types, tuple) else (types,)


def _typename(types):
    return "/".join(t.__name__ for t in _astuple(types))


def _optional(table: dict, key: str, types, path: str, default=None):
    if key not in table:
        return default
    return _require(table, key, types, path)


def _reject_unknown(table: dict, allowed: set, path: str):
    for k in table:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}", "unknown key")


def _check_number(value, path: str, *, positive=False, nonnegative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be > 0, got {value}")
    if nonnegative and value < 0:
        raise ConfigError(path, f"must be >= 0, got {value}")
    return float(value)


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config root must be a table")
    _reject_unknown(doc, _TOP_KEYS, "<root>")
    if "experiment" not in doc:
        raise ConfigError("experiment", "required table missing")
    exp = doc["experiment"]
    _reject_unknown(exp, _EXPERIMENT_KEYS, "experiment")

    objective = _require(exp, "objective", str, "experiment")
    if objective not in _OBJECTIVES:
        raise ConfigError("experiment.objective",
                          f"unknown objective {objective!r}; expected one of {_OBJECTIVES}")
    method = _require(exp, "method", str, "experiment")
    if method not in ALL_METHODS:
        raise ConfigError("experiment.method",
                          f"unknown method {method!r}; expected one of {ALL_METHODS}")
    dimension = _require(exp, "dimension", int, "experiment")
    T = _require(exp, "T", int, "experiment")
    batch_size = _require(exp, "batch_size", int, "experiment")
    for name, v in (("dimension", dimension), ("T", T), ("batch_size", batch_size)):
        if v < 1:
            raise ConfigError(f"experiment.{name}", f"must be >= 1, got {v}")
    if method == "promot_loo" and batch_size < 2:
        raise ConfigError("experiment.batch_size", "leave-one-out estimator needs batch_size >= 2")

    if "seeds" in exp and "n_seeds" in exp:
        raise ConfigError("experiment.seeds", "give either seeds or n_seeds, not both")
    if "seeds" in exp:
        seeds_raw = _require(exp, "seeds", list, "experiment")
        if not seeds_raw or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds_raw):
            raise ConfigError("experiment.seeds", "must be a nonempty list of integers")
        seeds = [int(s) for s in seeds_raw]
    elif "n_seeds" in exp:
        n = _require(exp, "n_seeds", int, "experiment")
        if n < 1:
            raise ConfigError("experiment.n_seeds", f"must be >= 1, got {n}")
        seeds = list(range(n))
    else:
        raise ConfigError("experiment.seeds", "seeds or n_seeds is required")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("experiment.seeds", "seeds must be distinct")

    init_mean = exp.get("init_mean", 0.0)
    if isinstance(init_mean, list):
        if len(init_mean) != dimension:
            raise ConfigError("experiment.init_mean",
                              f"length {len(init_mean)} != dimension {dimension}")
        init_mean = [_check_number(v, "experiment.init_mean") for v in init_mean]
    else:
        init_mean = _check_number(init_mean, "experiment.init_mean")
    init_std = _check_number(exp.get("init_std", 0.0), "experiment.init_std", nonnegative=True)
    root_seed = _optional(exp, "root_seed", int, "experiment", 0)
    if root_seed < 0:
        raise ConfigError("experiment.root_seed", f"must be >= 0, got {root_seed}")

    params = dict(doc.get("params", {}))
    allowed = set(_ATTACK_PARAM_KEYS) if objective == "attack_synthetic" else set()
    allowed |= _SMOOTHING_PARAM_KEYS if method in SMOOTHING_METHODS else _BASELINE_PARAM_KEYS
    _reject_unknown(params, allowed, "params")
    _validate_params(method, objective, params)

    sweep_tbl = dict(doc.get("sweep", {}))
    _reject_unknown(sweep_tbl, allowed, "sweep")
    for k, v in sweep_tbl.items():
        if not isinstance(v, list) or not v:
            raise ConfigError(f"sweep.{k}", "sweep values must be nonempty lists")

    out_tbl = dict(doc.get("output", {}))
    _reject_unknown(out_tbl, _OUTPUT_KEYS, "output")
    output_dir = _optional(out_tbl, "directory", str, "output")
    write_traj = _optional(out_tbl, "trajectories", bool, "output", True)
    include_mu = _optional(out_tbl, "include_mu", bool, "output", None)

    spec = ExperimentSpec(
        objective=objective, dimension=dimension, method=method, T=T,
        batch_size=batch_size, params=params, init_mean=init_mean,
        init_std=init_std,
    )
    cfg = ExperimentConfig(
        spec=spec, seeds=seeds, root_seed=root_seed, sweep=sweep_tbl,
        output_dir=output_dir, write_trajectories=write_traj,
        include_mu=include_mu,
    )
    _dry_build(cfg)
    return cfg


def _validate_params(method: str, objective: str, params: dict) -> None:
    if method in SMOOTHING_METHODS:
        if "theta" not in params:
            raise ConfigError("params.theta", "required for smoothing methods")
        _check_number(params["theta"], "params.theta", positive=True)
        if "sigma" not in params:
            raise ConfigError("params.sigma", "required for smoothing methods")
        sig = params["sigma"]
        if isinstance(sig, list):
            for v in sig:
                _check_number(v, "params.sigma", positive=True)
        else:
            _check_number(sig, "params.sigma", positive=True)
        if "eta0" in params and params["eta0"] is not None:
            _check_number(params["eta0"], "params.eta0", nonnegative=True)
        if "gamma" in params:
            g = _check_number(params["gamma"], "params.gamma")
            if not 0.0 < g < 0.5:
                raise ConfigError("params.gamma", f"must lie in (0, 1/2), got {g}")
        if "ridge" in params:
            _check_number(params["ridge"], "params.ridge", positive=True)
        for key in ("kernel_params", "transform_params"):
            if key in params and not isinstance(params[key], dict):
                raise ConfigError(f"params.{key}", "must be a table")
    else:
        for key in ("eta0", "sigma"):
            if key not in params:
                raise ConfigError(f"params.{key}", "required for baseline methods")
        _check_number(params["eta0"], "params.eta0", nonnegative=True)
        _check_number(params["sigma"], "params.sigma", positive=True)
        # gamma_dec / alpha / beta ranges are enforced by BaselineSpec in
        # the dry build; only basic typing here
        for key in ("gamma_dec", "alpha", "beta1", "beta2", "gamma"):
            if key in params:
                _check_number(params[key], f"params.{key}")
    if objective == "attack_synthetic":
        for key in ("kappa", "lambda_pen", "box_radius"):
            if key in params:
                _check_number(params[key], f"params.{key}")
        for key in ("n_classes", "input_seed"):
            if key in params and (isinstance(params[key], bool) or not isinstance(params[key], int)):
                raise ConfigError(f"params.{key}", "must be an integer")


def _dry_build(cfg: ExperimentConfig) -> None:
    """Exercise module preconditions without running anything."""
    try:
        objective, _ = build_problem(cfg.spec)
    except (ValueError, KeyError) as e:
        raise ConfigError("experiment", f"objective construction failed: {e}") from e
    try:
        if cfg.spec.method in SMOOTHING_METHODS:
            sm, sched, _ = build_smoothing(cfg.spec, objective)
            sched.rates(min(cfg.spec.T, 4), sm)
        else:
            build_baseline(cfg.spec)
    except KeyError as e:
        raise ConfigError(f"params.{e.args[0]}", "required key missing") from e
    except ValueError as e:
        raise ConfigError("params", str(e)) from e


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"cannot read {path}: not found") from None
    except _toml.TOMLDecodeError as e:
        raise ConfigError("<file>", f"TOML parse error: {e}") from None
    return parse_config(doc)
