"""Command-line interface: ``svaid simulate | fit | verify | bench``.

Exit codes: 0 ok, 1 property failure, 2 input error, 3 runtime error,
4 degenerate system.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_property_suite
from .control import write_control_csv
from .identify import (
    DegenerateSystemError,
    SampleLogError,
    fit,
    fit_with_prior,
    read_samples_csv,
    stack,
    write_samples_csv,
)
from .model import ModelFormatError, load_model, random_chain
from .regressor import compute_regressor
from .sim import ScenarioFormatError, SimulationError, load_scenario, run_scenario

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_RUNTIME, EXIT_DEGENERATE = 0, 1, 2, 3, 4
OUTPUT_VERSION = 1


class InputError(Exception):
    pass


# ------------------------------------------------------------ file helpers

def write_json_atomic(path, doc: dict) -> None:
    """Write ``doc`` to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def run_manifest(command: str, args: dict, inputs: dict, outputs: dict, seed) -> dict:
    hashed = {
        "command": command,
        "args": args,
        "inputs": {k: _file_digest(p) for k, p in sorted(inputs.items()) if p is not None},
    }
    config_hash = hashlib.sha256(json.dumps(hashed, sort_keys=True).encode()).hexdigest()
    return {
        "format_version": OUTPUT_VERSION,
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "args": args,
        "inputs": {k: str(p) for k, p in inputs.items() if p is not None},
        "outputs": {k: str(p) for k, p in outputs.items()},
        "versions": {
            "svaid": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }


def _load_model(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except ModelFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


# ------------------------------------------------------------ commands

def cmd_simulate(args) -> int:
    model = _load_model(args.model_file)
    try:
        scn, cfg = load_scenario(args.scenario_file, model)
    except FileNotFoundError as exc:
        raise InputError(f"{exc.filename}: no such file") from None
    except (ScenarioFormatError, ModelFormatError) as exc:
        raise InputError(f"{args.scenario_file}: {exc}") from None
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = Path(args.out_dir)
    outputs = {
        "samples": out / "samples.csv",
        "control": out / "control.csv",
        "metrics": out / "metrics.json",
    }
    manifest = run_manifest(
        "simulate",
        {"seed": cfg.seed},
        {"model": args.model_file, "scenario": args.scenario_file},
        outputs,
        cfg.seed,
    )
    write_json_atomic(out / "manifest.json", manifest)

    result = run_scenario(scn, cfg)
    write_samples_csv(outputs["samples"], result.samples, model.n)
    c = result.control
    write_control_csv(outputs["control"], c["t"], c["model_used"], c["q_des"], c["q"], c["u_cmd"],
                      c["saturated"], n=model.n)
    metrics = {"format_version": OUTPUT_VERSION, **result.metrics}
    write_json_atomic(outputs["metrics"], json.loads(json.dumps(metrics, default=_jsonable)))
    summary = {k: metrics[k] for k in ("scenario", "n_ticks", "final_r2", "switch_time") if k in metrics}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.alpha is not None and args.theta0 is None:
        args.parser.error("--alpha requires --theta0")
    if args.theta0 is not None and args.alpha is None:
        args.parser.error("--theta0 requires --alpha")
    model = _load_model(args.model_file)
    theta0 = None
    if args.theta0 is not None:
        prior = _load_model(args.theta0)
        if prior.n != model.n:
            raise InputError(f"{args.theta0}: prior has {prior.n} links, model has {model.n}")
        theta0 = prior.theta
        if not 0.0 < args.alpha < 1.0:
            raise InputError("--alpha must lie in (0, 1)")
    try:
        samples = read_samples_csv(args.samples_csv, model.n)
    except FileNotFoundError:
        raise InputError(f"{args.samples_csv}: no such file") from None
    except (SampleLogError, ValueError) as exc:
        raise InputError(str(exc)) from None
    if not samples:
        raise InputError(f"{args.samples_csv}: no samples")

    out = Path(args.out_file)
    manifest_path = out.with_name(out.name + ".manifest.json")
    write_json_atomic(manifest_path, run_manifest(
        "fit", {"alpha": args.alpha},
        {"model": args.model_file, "samples": args.samples_csv, "theta0": args.theta0},
        {"fit": out}, None,
    ))
    sys_ = stack(model, samples)
    result = fit(sys_) if theta0 is None else fit_with_prior(sys_, theta0, args.alpha)
    doc = {
        "format_version": OUTPUT_VERSION,
        "n_samples": len(samples),
        "alpha": args.alpha,
        "theta_hat": result.theta_hat.tolist(),
        "r_squared": result.r_squared,
        "per_joint_r_squared": result.per_joint_r_squared.tolist(),
        "residual_norm": result.residual_norm,
        "singular_values": result.singular_values.tolist(),
    }
    write_json_atomic(out, doc)
    print(f"R2 {result.r_squared:.17g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        args.parser.error("--trials must be at least 1")
    model = _load_model(args.model_file)
    if args.out_dir:
        write_json_atomic(Path(args.out_dir) / "manifest.json", run_manifest(
            "verify", {"trials": args.trials, "seed": args.seed}, {"model": args.model_file}, {}, args.seed))
    results = run_property_suite(model, args.trials, args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max_error={r.max_error:.3e}  tol={r.tolerance:.0e}  {status}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed properties: " + ", ".join(failed), file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def bench_regressor(max_links: int, repeats: int, seed: int = 0):
    """Mean and standard deviation (µs) of one regressor evaluation for n = 2..max_links."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in range(2, max_links + 1):
        model = random_chain(rng, n)
        states = rng.uniform(-1, 1, (repeats, 3, n))
        compute_regressor(model, *states[0])  # warm-up
        times = []
        for q, dq, ddq in states:
            t0 = time.perf_counter()
            compute_regressor(model, q, dq, ddq)
            times.append(time.perf_counter() - t0)
        times = np.array(times) * 1e6
        rows.append((n, float(times.mean()), float(times.std())))
    return rows


def loglog_slope(rows) -> float:
    if len(rows) < 2:
        return float("nan")
    n = np.log([r[0] for r in rows])
    t = np.log([r[1] for r in rows])
    return float(np.polyfit(n, t, 1)[0])


def cmd_bench(args) -> int:
    if args.max_links < 2:
        args.parser.error("--max-links must be at least 2")
    if args.repeats < 1:
        args.parser.error("--repeats must be at least 1")
    if args.out_dir:
        write_json_atomic(Path(args.out_dir) / "manifest.json", run_manifest(
            "bench", {"max_links": args.max_links, "repeats": args.repeats, "seed": args.seed}, {},
            {"table": Path(args.out_dir) / "bench.csv"}, args.seed))
    rows = bench_regressor(args.max_links, args.repeats, args.seed)
    lines = ["n,mean_us,std_us"] + [f"{n},{m:.17g},{s:.17g}" for n, m, s in rows]
    slope = loglog_slope(rows)
    text = "\n".join(lines) + "\n"
    print(text, end="")
    print(f"# loglog_slope {slope:.4f}")
    if args.out_dir:
        with open(Path(args.out_dir) / "bench.csv", "w") as fh:
            fh.write(text)
    return EXIT_OK


# ------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svaid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"svaid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scripted scenario and write logs")
    p.add_argument("model_file")
    p.add_argument("scenario_file")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.set_defaults(func=cmd_simulate, parser=p)

    p = sub.add_parser("fit", help="identify parameters from a sample CSV")
    p.add_argument("model_file")
    p.add_argument("samples_csv")
    p.add_argument("out_file")
    p.add_argument("--alpha", type=float, default=None, help="data weight of the prior-regularised fit")
    p.add_argument("--theta0", default=None, help="model file whose parameters form the prior")
    p.set_defaults(func=cmd_fit, parser=p)

    p = sub.add_parser("verify", help="check structural properties of a model")
    p.add_argument("model_file")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None, help="also write a run manifest here")
    p.set_defaults(func=cmd_verify, parser=p)

    p = sub.add_parser("bench", help="time the regressor against chain length")
    p.add_argument("--max-links", type=int, default=32)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None, help="write bench.csv and a manifest here")
    p.set_defaults(func=cmd_bench, parser=p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateSystemError as exc:
        print(f"error: degenerate system: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
