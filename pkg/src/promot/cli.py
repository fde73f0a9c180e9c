"""Command-line interface.

Subcommands:
    run        execute a config file's multi-seed protocol, write artifacts
    sweep      grid search over the config's [sweep] lists
    landscape  quadrature export of smoothed 1-D curves, one column per
               (theta, sigma) pair
    verify     run the numerical check suites
    attack     targeted-attack protocol on the synthetic classifier

Exit codes: 0 success, 1 verification failures, 2 configuration errors,
3 runtime failures.  Errors are emitted as one JSON object on stderr so
wrappers can parse them.  The default output directory comes from
PROMOT_OUTPUT_DIR, falling back to ./promot_out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .harness import (
    ExperimentSpec,
    _atomic_write,
    execute_run,
    run_jobs,
    run_protocol,
    sweep as run_sweep,
    write_results_csv,
    write_summary_json,
    write_sweep_csv,
)
from .kernels import make_kernel
from .objectives import landscape_objective
from .optimizer import trajectory_csv_text
from .smoothing import SmoothingQuadratureError, SmoothingSpec, smoothed_value_quadrature
from .transforms import make_transform
from .verify import SUITES, format_report, run_suites

_ENV_OUTPUT = "PROMOT_OUTPUT_DIR"


def _emit_error(kind: str, message: str, field: str | None = None) -> None:
    doc = {"error": {"type": kind, "message": message}}
    if field:
        doc["error"]["field"] = field
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def _output_dir(arg: str | None, cfg_dir: str | None = None) -> str:
    return arg or cfg_dir or os.environ.get(_ENV_OUTPUT) or "promot_out"


def _preset_path(name: str) -> str:
    base = resources.files("promot").joinpath("presets")
    p = base.joinpath(f"{name}.toml")
    if not p.is_file():
        available = sorted(f.name[:-5] for f in base.iterdir() if f.name.endswith(".toml"))
        raise ConfigError("--preset", f"unknown preset {name!r}; available: {available}")
    return str(p)


def list_presets() -> list[str]:
    base = resources.files("promot").joinpath("presets")
    return sorted(f.name[:-5] for f in base.iterdir() if f.name.endswith(".toml"))


# --------------------------------------------------------------------------
# run / sweep


def _resolve_config(args):
    if getattr(args, "preset", None):
        if args.config:
            raise ConfigError("--preset", "give a config path or --preset, not both")
        path = _preset_path(args.preset)
        stem = args.preset
    else:
        if not args.config:
            raise ConfigError("<args>", "a config path or --preset is required")
        path = args.config
        stem = os.path.splitext(os.path.basename(path))[0]
    return load_config(path), stem


def cmd_run(args) -> int:
    cfg, stem = _resolve_config(args)
    root_seed = cfg.root_seed if args.seed is None else args.seed
    out_root = _output_dir(args.output, cfg.output_dir)
    run_dir = os.path.join(out_root, stem)
    os.makedirs(run_dir, exist_ok=True)

    protocol = run_protocol(cfg.spec, cfg.seeds, root_seed=root_seed,
                            n_jobs=args.jobs, keep_trajectories=cfg.write_trajectories)
    write_results_csv(os.path.join(run_dir, "results.csv"), protocol.results)
    write_summary_json(os.path.join(run_dir, "summary.json"), protocol, root_seed)
    if cfg.write_trajectories:
        for seed, traj in protocol.trajectories.items():
            text = trajectory_csv_text(traj, include_mu=cfg.include_mu)
            _atomic_write(os.path.join(run_dir, f"trajectory_seed{seed}.csv"), text)

    agg = protocol.aggregate
    print(f"{cfg.spec.method} on {cfg.spec.objective} d={cfg.spec.dimension}: "
          f"mse {agg.formatted('mse')}, hitting_time {agg.formatted('hitting_time')}, "
          f"best_value {agg.formatted('best_value')} over {agg.n_seeds} seeds")
    if agg.n_aborted:
        print(f"warning: {agg.n_aborted} run(s) aborted; see summary.json")
    print(f"artifacts in {run_dir}")
    if agg.n_aborted == agg.n_seeds:
        _emit_error("runtime", "all runs aborted", None)
        return 3
    return 0


def cmd_sweep(args) -> int:
    cfg, stem = _resolve_config(args)
    if not cfg.sweep:
        raise ConfigError("sweep", "config has no [sweep] table")
    root_seed = cfg.root_seed if args.seed is None else args.seed
    out_root = _output_dir(args.output, cfg.output_dir)
    run_dir = os.path.join(out_root, f"{stem}_sweep")
    os.makedirs(run_dir, exist_ok=True)

    result = run_sweep(cfg.spec, cfg.sweep, cfg.seeds, root_seed=root_seed,
                       n_jobs=args.jobs)
    write_sweep_csv(os.path.join(run_dir, "sweep.csv"), result)
    doc = {
        "schema_version": 1,
        "selected": result.selected,
        "selected_config_id": result.selected_config_id,
        "n_configs": len(result.entries),
    }
    _atomic_write(os.path.join(run_dir, "sweep_summary.json"),
                  json.dumps(doc, sort_keys=True, indent=2) + "\n")

    print(f"swept {len(result.entries)} configs; selected {result.selected} "
          f"(config {result.selected_config_id})")
    for e in result.entries[:5]:
        print(f"  rank {e.rank}: mse {e.aggregate.mean_mse:.4g} {e.overrides}")
    print(f"artifacts in {run_dir}")
    return 0


# --------------------------------------------------------------------------
# landscape


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(flag, f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(flag, "list must be nonempty")
    return vals


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--grid", f"expected lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError("--grid", f"expected lo:hi:n, got {text!r}") from None
    if n < 2 or not hi > lo:
        raise ConfigError("--grid", "need hi > lo and n >= 2")
    return np.linspace(lo, hi, n)


def _parse_json_params(text: str | None, flag: str) -> dict:
    if not text:
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(flag, f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(flag, "expected a JSON object")
    return doc


def cmd_landscape(args) -> int:
    thetas = _parse_float_list(args.theta, "--theta")
    sigmas = _parse_float_list(args.sigma, "--sigma")
    grid = _parse_grid(args.grid)
    try:
        kernel = make_kernel(args.kernel, **_parse_json_params(args.kernel_params, "--kernel-params"))
        transform = make_transform(args.transform,
                                   **_parse_json_params(args.transform_params, "--transform-params"))
    except (ValueError, TypeError) as e:
        raise ConfigError("--kernel/--transform", str(e)) from None

    f = landscape_objective()
    columns: dict[str, list] = {}
    status: dict[str, str] = {}
    for theta in thetas:
        log_star = float(transform.log_eval(theta, np.array([f.optimum]))[0])
        for sigma in sigmas:
            name = f"g_theta{theta:g}_sigma{sigma:g}"
            spec = SmoothingSpec.for_objective(kernel, transform, theta, sigma, 2, f)
            vals: list = []
            col_status = "ok"
            for mu in grid:
                try:
                    shifted = smoothed_value_quadrature(spec, f, float(mu),
                                                        log_shift=log_star, tol=1e-9)
                except SmoothingQuadratureError as e:
                    col_status = f"quadrature_failed: {e}"
                    vals = [""] * len(grid)
                    break
                with np.errstate(over="ignore"):
                    raw = shifted * np.exp(log_star)
                if not np.isfinite(raw):
                    col_status = "overflow: values exceed double range"
                    vals = [""] * len(grid)
                    break
                vals.append(raw)
            if len(vals) < len(grid):
                vals += [""] * (len(grid) - len(vals))
            columns[name] = vals
            status[name] = col_status

    out_root = _output_dir(args.output)
    os.makedirs(out_root, exist_ok=True)
    csv_path = os.path.join(out_root, "landscape.csv")
    names = list(columns)
    lines = [",".join(["x", "f"] + names)]
    f_vals = f.evaluate_batch(grid.reshape(-1, 1))
    for i, x in enumerate(grid):
        row = [repr(float(x)), repr(float(f_vals[i]))]
        for n in names:
            v = columns[n][i]
            row.append("" if v == "" else repr(float(v)))
        lines.append(",".join(row))
    _atomic_write(csv_path, "\n".join(lines) + "\n")
    meta = {"schema_version": 1, "kernel": args.kernel, "transform": args.transform,
            "columns": status}
    _atomic_write(os.path.join(out_root, "landscape_meta.json"),
                  json.dumps(meta, sort_keys=True, indent=2) + "\n")

    n_bad = sum(1 for s in status.values() if s != "ok")
    print(f"wrote {csv_path} ({len(names)} curves, {n_bad} flagged)")
    return 0


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    names = None
    if args.suite:
        names = [s.strip() for s in args.suite.split(",") if s.strip()]
        bad = [n for n in names if n not in SUITES]
        if bad:
            raise ConfigError("--suite", f"unknown suite(s) {bad}; available: {list(SUITES)}")
    results = run_suites(names)
    print(format_report(results))
    return 0 if all(r.passed for r in results) else 1


# --------------------------------------------------------------------------
# attack


def cmd_attack(args) -> int:
    params = {
        "eta0": args.eta0, "sigma": args.sigma, "theta": args.theta,
        "kernel": args.kernel,
        "kernel_params": _parse_json_params(args.kernel_params, "--kernel-params"),
        "transform": args.transform,
        "transform_params": _parse_json_params(args.transform_params, "--transform-params"),
        "kappa": args.kappa, "lambda_pen": args.lambda_pen,
        "box_radius": args.box_radius, "n_classes": args.n_classes,
    }
    jobs = []
    for i in range(args.n_inputs):
        p = dict(params)
        p["input_seed"] = i
        spec = ExperimentSpec(
            objective="attack_synthetic", dimension=args.dimension,
            method=args.method, T=args.T, batch_size=args.batch_size,
            params=p, init_mean=0.0, init_std=0.0,
        )
        jobs.append((spec, 0))

    keyed = run_jobs(jobs, root_seed=args.seed or 0, n_jobs=args.jobs,
                     keep_trajectories=True)
    pairs = sorted(keyed.values(), key=lambda rt: rt[0].params["input_seed"])
    results = [r for r, _ in pairs]

    from .harness import build_problem

    reports = []
    for (spec, _), (r, traj) in zip(jobs, pairs):
        obj, _ = build_problem(spec)
        mu_best = traj.mu[r.hitting_time]
        x = obj.clean_input
        # share of the clean input's variance displaced by the perturbation
        denom = float(np.sum((x - np.mean(x)) ** 2))
        r2 = 1.0 - float(np.sum(mu_best**2)) / denom if denom > 0 else float("nan")
        reports.append({
            "input_seed": r.params["input_seed"],
            "success": bool(r.success),
            "best_value": r.best_value,
            "perturbation_r2": r2,
            "evals": r.evals,
        })
    rate = float(np.mean([rep["success"] for rep in reports])) if reports else 0.0

    out_root = _output_dir(args.output)
    os.makedirs(out_root, exist_ok=True)
    doc = {
        "schema_version": 1,
        "method": args.method, "dimension": args.dimension,
        "T": args.T, "batch_size": args.batch_size, "kappa": args.kappa,
        "success_rate": rate,
        "inputs": reports,
    }
    path = os.path.join(out_root, "attack_report.json")
    _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    write_results_csv(os.path.join(out_root, "attack_results.csv"), results)
    print(f"attack success rate {rate:.2f} over {args.n_inputs} inputs; report in {path}")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="promot",
                                 description="transform-amplified smoothing optimizer toolkit")
    ap.add_argument("--version", action="version", version=f"promot {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p, with_config=True):
        if with_config:
            p.add_argument("config", nargs="?", help="path to a TOML experiment config")
            p.add_argument("--preset", help="name of a shipped preset (see --list-presets)")
        p.add_argument("--seed", type=int, default=None, help="root seed override")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("--output", default=None,
                       help=f"output directory (default ${_ENV_OUTPUT} or ./promot_out)")

    p_run = sub.add_parser("run", help="run a config's multi-seed protocol")
    add_common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid search over the [sweep] lists")
    add_common(p_sweep)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_land = sub.add_parser("landscape", help="export smoothed 1-D curves")
    p_land.add_argument("--kernel", default="gaussian")
    p_land.add_argument("--kernel-params", default=None, help="JSON object")
    p_land.add_argument("--transform", default="exponential")
    p_land.add_argument("--transform-params", default=None, help="JSON object")
    p_land.add_argument("--theta", required=True, help="comma-separated list")
    p_land.add_argument("--sigma", required=True, help="comma-separated list")
    p_land.add_argument("--grid", default="-8:8:161", help="lo:hi:n")
    p_land.add_argument("--output", default=None)
    p_land.set_defaults(fn=cmd_landscape)

    p_ver = sub.add_parser("verify", help="run the numerical check suites")
    p_ver.add_argument("--suite", default=None,
                       help=f"comma-separated subset of {','.join(SUITES)}")
    p_ver.set_defaults(fn=cmd_verify)

    p_atk = sub.add_parser("attack", help="targeted attacks on the synthetic classifier")
    p_atk.add_argument("--dimension", type=int, default=42)
    p_atk.add_argument("--n-inputs", type=int, default=20)
    p_atk.add_argument("--n-classes", type=int, default=4)
    p_atk.add_argument("--method", default="promot_loo")
    p_atk.add_argument("--T", type=int, default=500)
    p_atk.add_argument("--batch-size", type=int, default=30)
    p_atk.add_argument("--kappa", type=float, default=0.0)
    p_atk.add_argument("--lambda-pen", type=float, default=0.0)
    p_atk.add_argument("--box-radius", type=float, default=5.0)
    p_atk.add_argument("--eta0", type=float, default=0.01)
    p_atk.add_argument("--sigma", type=float, default=0.3)
    p_atk.add_argument("--theta", type=float, default=5.0)
    p_atk.add_argument("--kernel", default="gaussian")
    p_atk.add_argument("--kernel-params", default=None)
    p_atk.add_argument("--transform", default="power_exp_hybrid")
    p_atk.add_argument("--transform-params", default='{"c": 1000.0, "beta": 10.0}')
    p_atk.add_argument("--seed", type=int, default=None)
    p_atk.add_argument("--jobs", type=int, default=1)
    p_atk.add_argument("--output", default=None)
    p_atk.set_defaults(fn=cmd_attack)

    p_list = sub.add_parser("presets", help="list shipped preset names")
    p_list.set_defaults(fn=lambda args: (print("\n".join(list_presets())), 0)[1])

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        _emit_error("config", str(e), e.path)
        return 2
    except KeyboardInterrupt:
        _emit_error("runtime", "interrupted")
        return 3
    except Exception as e:  # noqa: BLE001 - CLI boundary
        _emit_error("runtime", f"{type(e).__name__}: {e}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
