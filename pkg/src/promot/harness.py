"""Experiment orchestration: multi-seed protocols, sweeps, persistence.

Everything an experiment needs is captured in a declarative ExperimentSpec
(plain data, picklable), so grid points x seeds form an embarrassingly
parallel job set.  Each job derives its random stream from
SeedSequence([root_seed, stable_hash(job_key)]), and results are merged in
sorted job-key order, so output is independent of worker count and
completion order.

Metrics follow the trajectory-wide convention: mse is the minimum squared
distance to the known maximizer over all iterates including mu_0,
hitting_time the first iteration attaining it, best_value the objective
value at that iterate.  When no maximizer is known the metrics fall back to
the best observed objective value and mse is NaN.

Persistence: one CSV row per (config, seed) plus a JSON summary carrying
schema_version.  Wall-clock time is kept on the in-memory result only so
the written artifacts are byte-deterministic.  All files are written to a
temp path and renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import baselines as _baselines
from . import objectives as _objectives
from .kernels import make_kernel
from .optimizer import ScheduleSpec, Trajectory, run as _run
from .smoothing import SmoothingSpec
from .transforms import make_transform

SCHEMA_VERSION = 1

SMOOTHING_METHODS = ("promot", "promot_loo", "epgs")
ALL_METHODS = SMOOTHING_METHODS + _baselines.METHODS

RESULT_COLUMNS = (
    "config_id", "method", "objective", "dimension", "T", "batch_size",
    "params", "seed", "mse", "hitting_time", "best_value", "evals",
    "aborted", "abort_reason", "success",
)


@dataclass
class ExperimentSpec:
    """One experiment configuration; params hold the method hyperparameters.

    Smoothing methods read: eta0 (None derives it from the schedule kind),
    sigma, theta, kernel, kernel_params, transform, transform_params, gamma,
    ridge, schedule.  Baselines read: eta0, sigma, gamma (step decay) plus
    their own gamma_dec / alpha / beta1 / beta2.  Attack objectives read
    n_classes, input_seed, kappa, lambda_pen, box_radius from params.
    """

    objective: str
    dimension: int
    method: str
    T: int
    batch_size: int
    params: dict = field(default_factory=dict)
    init_mean: float | list = 0.0
    init_std: float = 0.0

    def __post_init__(self):
        if self.method not in ALL_METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {ALL_METHODS}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.init_std < 0:
            raise ValueError(f"init_std must be >= 0, got {self.init_std}")


@dataclass
class RunResult:
    """Metrics for one seed of one configuration."""

    config_id: str
    method: str
    objective: str
    dimension: int
    T: int
    batch_size: int
    params: dict
    seed: int
    mse: float
    hitting_time: int
    best_value: float
    evals: int
    wall_time: float  # in-memory only; never persisted
    aborted: bool = False
    abort_reason: str | None = None
    success: bool | None = None  # attack objectives only


def canonical_params(params: dict) -> str:
    return json.dumps(params, sort_keys=True, separators=(",", ":"))


def config_id(spec: ExperimentSpec) -> str:
    blob = canonical_params({
        "objective": spec.objective, "dimension": spec.dimension,
        "method": spec.method, "T": spec.T, "batch_size": spec.batch_size,
        "params": spec.params, "init_mean": spec.init_mean,
        "init_std": spec.init_std,
    })
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def job_key(spec: ExperimentSpec, seed: int) -> str:
    return f"{config_id(spec)}:{seed}"


def stable_hash(key: str) -> int:
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:16], "big")


# --------------------------------------------------------------------------
# problem / method construction


def build_problem(spec: ExperimentSpec):
    """Objective plus its known maximizer (None when unknown)."""
    name = spec.objective
    if name in _objectives.BENCHMARKS:
        obj = _objectives.BENCHMARKS[name](spec.dimension)
        return obj, obj.x_star
    if name == "landscape":
        if spec.dimension != 1:
            raise ValueError("landscape objective is 1-D")
        obj = _objectives.landscape_objective()
        return obj, obj.x_star
    if name == "attack_synthetic":
        p = spec.params
        clf = _objectives.make_synthetic_classifier(
            spec.dimension, n_classes=int(p.get("n_classes", 4)),
        )
        input_rng = np.random.default_rng(int(p.get("input_seed", 0)))
        x = input_rng.standard_normal(spec.dimension)
        obj = _objectives.attack_objective(
            clf, x, kappa=float(p.get("kappa", 0.0)),
            lambda_pen=float(p.get("lambda_pen", 0.0)),
            box_radius=float(p.get("box_radius", 5.0)),
        )
        return obj, None
    raise ValueError(f"unknown objective {name!r}")


def build_smoothing(spec: ExperimentSpec, objective) -> tuple[SmoothingSpec, ScheduleSpec, str]:
    p = spec.params
    if spec.method == "epgs":
        kernel = make_kernel("gaussian")
        transform = make_transform("exponential")
    else:
        kernel = make_kernel(p.get("kernel", "gaussian"), **p.get("kernel_params", {}))
        transform = make_transform(p.get("transform", "exponential"),
                                   **p.get("transform_params", {}))
    sm = SmoothingSpec.for_objective(
        kernel, transform, float(p["theta"]), p["sigma"], spec.batch_size,
        objective, p.get("ridge"),
    )
    kind = p.get("schedule", "isotropic_poly")
    eta0 = p.get("eta0")
    sched = ScheduleSpec(kind, gamma=float(p.get("gamma", 0.1)),
                         base=None if eta0 is None else float(eta0))
    estimator = "loo" if spec.method == "promot_loo" else "plain"
    return sm, sched, estimator


def build_baseline(spec: ExperimentSpec) -> _baselines.BaselineSpec:
    p = spec.params
    return _baselines.BaselineSpec(
        method=spec.method,
        eta0=float(p["eta0"]),
        sigma0=float(p["sigma"]),
        batch_size=spec.batch_size,
        gamma_dec=p.get("gamma_dec"),
        alpha=p.get("alpha"),
        beta1=p.get("beta1"),
        beta2=p.get("beta2"),
        gamma=float(p.get("gamma", 0.1)),
    )


def _initial_point(spec: ExperimentSpec, rng: np.random.Generator) -> np.ndarray:
    mean = np.asarray(spec.init_mean, dtype=float)
    if mean.ndim == 0:
        mean = np.full(spec.dimension, float(mean))
    if mean.shape != (spec.dimension,):
        raise ValueError(f"init_mean must be scalar or length {spec.dimension}")
    if spec.init_std == 0.0:
        return mean.copy()
    return mean + spec.init_std * rng.standard_normal(spec.dimension)


def execute_run(spec: ExperimentSpec, seed: int, root_seed: int = 0,
                keep_trajectory: bool = False):
    """Run one (config, seed) job; returns (RunResult, Trajectory or None)."""
    objective, x_star = build_problem(spec)
    ss = np.random.SeedSequence([int(root_seed), stable_hash(job_key(spec, seed))])
    init_ss, run_ss = ss.spawn(2)
    mu0 = _initial_point(spec, np.random.default_rng(init_ss))

    t0 = time.perf_counter()
    if spec.method in SMOOTHING_METHODS:
        sm, sched, estimator = build_smoothing(spec, objective)
        traj = _run(sm, objective, mu0, sched, spec.T, estimator=estimator,
                    seed=np.random.default_rng(run_ss), method_label=spec.method)
    else:
        bspec = build_baseline(spec)
        traj = _baselines.baseline_run(bspec, objective, mu0, spec.T,
                                       seed=np.random.default_rng(run_ss))
    wall = time.perf_counter() - t0

    mse, hit, best = compute_metrics(traj, x_star)
    success = None
    if spec.objective == "attack_synthetic":
        success = _objectives.attack_success(objective, traj.mu[hit])
    result = RunResult(
        config_id=config_id(spec), method=spec.method, objective=spec.objective,
        dimension=spec.dimension, T=spec.T, batch_size=spec.batch_size,
        params=dict(spec.params), seed=int(seed), mse=mse, hitting_time=hit,
        best_value=best, evals=int(traj.evals[-1]), wall_time=wall,
        aborted=traj.aborted, abort_reason=traj.abort_reason, success=success,
    )
    return result, (traj if keep_trajectory else None)


def compute_metrics(traj: Trajectory, x_star) -> tuple[float, int, float]:
    """(mse, hitting_time, best_value) per the trajectory-wide convention."""
    if x_star is None:
        hit = int(np.argmax(traj.f_mu))
        return float("nan"), hit, float(traj.f_mu[hit])
    x_star = np.asarray(x_star, dtype=float)
    sq = np.sum((traj.mu - x_star) ** 2, axis=1)
    hit = int(np.argmin(sq))  # argmin takes the first minimizer, earliest wins
    return float(sq[hit]), hit, float(traj.f_mu[hit])


# --------------------------------------------------------------------------
# protocols


@dataclass
class Aggregate:
    mean_mse: float
    std_mse: float
    mean_hitting_time: float
    std_hitting_time: float
    mean_best_value: float
    std_best_value: float
    n_seeds: int
    n_aborted: int

    def formatted(self, metric: str = "mse") -> str:
        mean = getattr(self, f"mean_{metric}")
        std = getattr(self, f"std_{metric}")
        return f"{mean:.2f}({std:.2f})"


def aggregate_results(results: list[RunResult]) -> Aggregate:
    """Population mean/std over completed (non-aborted) runs."""
    ok = [r for r in results if not r.aborted]
    n_ab = len(results) - len(ok)

    def stats(vals):
        if not vals:
            return float("nan"), float("nan")
        a = np.asarray(vals, dtype=float)
        return float(np.mean(a)), float(np.std(a))

    m, s = stats([r.mse for r in ok])
    mh, sh = stats([r.hitting_time for r in ok])
    mb, sb = stats([r.best_value for r in ok])
    return Aggregate(m, s, mh, sh, mb, sb, len(results), n_ab)


def _job_payload(args):
    spec_dict, seed, root_seed, keep = args
    spec = ExperimentSpec(**spec_dict)
    return job_key(spec, seed), execute_run(spec, seed, root_seed, keep)


def run_jobs(jobs: list[tuple[ExperimentSpec, int]], root_seed: int = 0,
             n_jobs: int = 1, keep_trajectories: bool = False) -> dict:
    """Execute (spec, seed) jobs, possibly in parallel; keyed, sorted results.

    Returns {job_key: (RunResult, Trajectory or None)} in sorted key order,
    which makes downstream output independent of scheduling.
    """
    payloads = [(asdict(s), seed, root_seed, keep_trajectories) for s, seed in jobs]
    out: dict = {}
    if n_jobs <= 1 or len(payloads) <= 1:
        for p in payloads:
            k, v = _job_payload(p)
            out[k] = v
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for k, v in pool.map(_job_payload, payloads):
                out[k] = v
    return dict(sorted(out.items()))


@dataclass
class ProtocolResult:
    spec: ExperimentSpec
    results: list  # RunResult per seed, seed order
    aggregate: Aggregate
    trajectories: dict  # seed -> Trajectory when kept


def run_protocol(spec: ExperimentSpec, seeds: list[int], root_seed: int = 0,
                 n_jobs: int = 1, keep_trajectories: bool = False) -> ProtocolResult:
    """Multi-seed protocol: per-seed metrics plus mean(std) aggregation."""
    if len(seeds) < 2:
        raise ValueError("protocol needs at least 2 seeds")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    keyed = run_jobs([(spec, s) for s in seeds], root_seed, n_jobs, keep_trajectories)
    by_seed = {r.seed: (r, t) for r, t in keyed.values()}
    results = [by_seed[s][0] for s in seeds]
    trajs = {s: by_seed[s][1] for s in seeds} if keep_trajectories else {}
    return ProtocolResult(spec, results, aggregate_results(results), trajs)


@dataclass
class SweepEntry:
    rank: int
    config_id: str
    overrides: dict
    aggregate: Aggregate
    abort_reasons: list


@dataclass
class SweepResult:
    entries: list  # SweepEntry, ranked
    selected: dict  # overrides of the winning config
    selected_config_id: str


def sweep(base: ExperimentSpec, grid: dict, seeds: list[int], root_seed: int = 0,
          n_jobs: int = 1) -> SweepResult:
    """Evaluate the Cartesian product of grid over params, rank by mean mse.

    grid maps param names to candidate lists.  Configs whose runs aborted
    rank after all clean ones (ordered by abort count, then mean mse);
    selection is the lowest mean mse among fully clean configs when any
    exist.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be a nonempty mapping of nonempty candidate lists")
    names = sorted(grid)
    combos = list(itertools.product(*(grid[n] for n in names)))
    specs = []
    for combo in combos:
        params = dict(base.params)
        params.update(dict(zip(names, combo)))
        specs.append(replace(base, params=params))

    jobs = [(s, seed) for s in specs for seed in seeds]
    keyed = run_jobs(jobs, root_seed, n_jobs)
    by_config: dict = {}
    for r, _ in keyed.values():
        by_config.setdefault(r.config_id, []).append(r)

    rows = []
    for s, combo in zip(specs, combos):
        cid = config_id(s)
        results = sorted(by_config[cid], key=lambda r: r.seed)
        agg = aggregate_results(results)
        reasons = sorted({r.abort_reason for r in results if r.aborted})
        rows.append((agg.n_aborted, agg.mean_mse, cid, dict(zip(names, combo)), agg, reasons))

    def sort_key(row):
        n_ab, mean, cid = row[0], row[1], row[2]
        return (n_ab > 0, n_ab, np.inf if np.isnan(mean) else mean, cid)

    rows.sort(key=sort_key)
    entries = [SweepEntry(i, cid, ov, agg, reasons)
               for i, (_, _, cid, ov, agg, reasons) in enumerate(rows)]
    best = entries[0]
    return SweepResult(entries, best.overrides, best.config_id)


# --------------------------------------------------------------------------
# persistence


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(path: str, results: list) -> None:
    """One row per (config, seed); deterministic byte-for-byte."""
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in results:
        w.writerow([
            r.config_id, r.method, r.objective, str(r.dimension), str(r.T),
            str(r.batch_size), canonical_params(r.params), str(r.seed),
            _fmt_cell(r.mse), str(r.hitting_time), _fmt_cell(r.best_value),
            str(r.evals), _fmt_cell(r.aborted), r.abort_reason or "",
            _fmt_cell(r.success),
        ])
    _atomic_write(path, buf.getvalue())


def read_results_csv(path: str) -> list:
    """Inverse of write_results_csv, returning RunResult objects."""
    out = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != RESULT_COLUMNS:
            raise ValueError(f"unexpected results schema in {path}")
        for row in rd:
            out.append(RunResult(
                config_id=row["config_id"], method=row["method"],
                objective=row["objective"], dimension=int(row["dimension"]),
                T=int(row["T"]), batch_size=int(row["batch_size"]),
                params=json.loads(row["params"]), seed=int(row["seed"]),
                mse=float(row["mse"]) if row["mse"] else float("nan"),
                hitting_time=int(row["hitting_time"]),
                best_value=float(row["best_value"]) if row["best_value"] else float("nan"),
                evals=int(row["evals"]), wall_time=float("nan"),
                aborted=row["aborted"] == "true",
                abort_reason=row["abort_reason"] or None,
                success=None if row["success"] == "" else row["success"] == "true",
            ))
    return out


def summary_json(protocol: ProtocolResult, root_seed: int) -> str:
    agg = protocol.aggregate
    doc = {
        "schema_version": SCHEMA_VERSION,
        "root_seed": int(root_seed),
        "config": {
            "objective": protocol.spec.objective,
            "dimension": protocol.spec.dimension,
            "method": protocol.spec.method,
            "T": protocol.spec.T,
            "batch_size": protocol.spec.batch_size,
            "params": protocol.spec.params,
            "init_mean": protocol.spec.init_mean,
            "init_std": protocol.spec.init_std,
            "config_id": config_id(protocol.spec),
        },
        "seeds": [r.seed for r in protocol.results],
        "metrics": {
            "mse": {"mean": agg.mean_mse, "std": agg.std_mse,
                    "formatted": agg.formatted("mse")},
            "hitting_time": {"mean": agg.mean_hitting_time, "std": agg.std_hitting_time,
                             "formatted": agg.formatted("hitting_time")},
            "best_value": {"mean": agg.mean_best_value, "std": agg.std_best_value,
                           "formatted": agg.formatted("best_value")},
        },
        "n_aborted": agg.n_aborted,
        "aborted_seeds": [
            {"seed": r.seed, "reason": r.abort_reason}
            for r in protocol.results if r.aborted
        ],
        "per_seed": [
            {"seed": r.seed, "mse": r.mse, "hitting_time": r.hitting_time,
             "best_value": r.best_value, "evals": r.evals,
             "aborted": r.aborted, "success": r.success}
            for r in protocol.results
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_summary_json(path: str, protocol: ProtocolResult, root_seed: int) -> None:
    _atomic_write(path, summary_json(protocol, root_seed))


def write_sweep_csv(path: str, sw: SweepResult) -> None:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "config_id", "overrides", "mean_mse", "std_mse",
                "mean_hitting_time", "mean_best_value", "n_seeds", "n_aborted",
                "abort_reasons"])
    for e in sw.entries:
        a = e.aggregate
        w.writerow([
            str(e.rank), e.config_id, canonical_params(e.overrides),
            _fmt_cell(a.mean_mse), _fmt_cell(a.std_mse),
            _fmt_cell(a.mean_hitting_time), _fmt_cell(a.mean_best_value),
            str(a.n_seeds), str(a.n_aborted), ";".join(e.abort_reasons),
        ])
    _atomic_write(path, buf.getvalue())
