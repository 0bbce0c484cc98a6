"""Command-line interface tying generation, training, and sweeps together.

Every command is deterministic given its config file and flags; each run
writes a manifest recording the resolved configuration and package version
next to its primary output.  Exit codes: 0 success, 1 failed diagnostics,
2 configuration errors, 3 data errors, 4 numeric failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_config, coerce_fields, load_json_config
from .data import Dataset, LoadError, load_dataset, median_spacing, save_dataset
from .evaluation import (
    METHOD_NAMES,
    ExperimentReport,
    MethodSpec,
    predict_dataset,
    score,
    train_method,
)
from .experiments import (
    SweepConfig,
    preset_naive_quality,
    preset_noiseless,
    preset_pi_sweep,
    preset_sigma_sweep,
    run_sweep,
)
from .inference import (
    compute_tables,
    posterior_assignment_marginals,
    posterior_count_marginals,
    posterior_label_marginals,
)
from .learning import FitError
from .model import ModelParams, init_params, load_model, save_model
from .plots import render_sweep_figures
from .synth import GenConfig, NoiseConfig, gen_sessions, inject_noise_dataset

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

PRESETS = {
    "noiseless": preset_noiseless,
    "sigma": preset_sigma_sweep,
    "pi": preset_pi_sweep,
    "naive-quality": preset_naive_quality,
}


def _write_manifest(out: Path, command: str, payload: dict) -> Path:
    target = out / "manifest.json" if out.is_dir() else out.with_suffix(".manifest.json")
    body = {"command": command, "version": __version__, "config": payload}
    target.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return target


def _dataset_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_DATA


def cmd_synth(args: argparse.Namespace) -> int:
    payload = load_json_config(args.config)
    unknown = sorted(set(payload) - {"gen", "noise"})
    if unknown:
        raise ConfigError(f"config: unknown sections {unknown}")
    gen = build_config(GenConfig, payload.get("gen", {}), "gen")
    noise = build_config(NoiseConfig, payload.get("noise", {}), "noise")
    if args.seed is not None:
        # Distinct seeds keep the generator and noise streams unrelated.
        gen = replace(gen, seed=args.seed)
        noise = replace(noise, seed=args.seed + 1)
    data = inject_noise_dataset(gen_sessions(gen), noise)
    out = Path(args.out)
    paths = save_dataset(data, out)
    _write_manifest(
        out,
        "synth",
        {"gen": dataclasses.asdict(gen), "noise": dataclasses.asdict(noise)},
    )
    print(
        f"wrote {len(paths)} sessions ({data.total_instances} instances, "
        f"{data.total_events} events) to {out}"
    )
    return EXIT_OK


def _method_spec(args: argparse.Namespace) -> MethodSpec:
    payload = load_json_config(args.config) if args.config else {}
    if payload.get("name", args.method) != args.method:
        raise ConfigError(
            f"config names method {payload['name']!r} but --method is {args.method!r}"
        )
    payload["name"] = args.method
    return build_config(MethodSpec, payload, "method")


def _placeholder_model(
    spec: MethodSpec, data: Dataset, classifier, seed: int
) -> ModelParams:
    # Baseline methods train only a classifier; serialize it inside a
    # default count/noise shell so one model format fits every method.
    template = init_params(
        classifier.kind,
        data.feature_dim,
        hidden=classifier.hidden,
        prior_variance=spec.prior_variance,
        sigma_init=median_spacing(data),
        max_count=spec.fit.max_count,
        seed=seed,
    )
    return replace(template, classifier=classifier)


def _dump_tables(model: ModelParams, data: Dataset, out: Path) -> Path:
    table_dir = Path(str(out) + ".tables")
    table_dir.mkdir(parents=True, exist_ok=True)
    for session in data:
        tables = compute_tables(session, model)
        arrays = {
            "log_a": tables.log_a,
            "log_b": tables.log_b,
            "log_marginal": np.float64(tables.log_marginal),
            "label_posterior": posterior_label_marginals(tables),
            "count_posterior": posterior_count_marginals(tables),
        }
        if session.num_events:
            arrays["assignment_posterior"] = posterior_assignment_marginals(tables)
        np.savez(table_dir / f"{session.session_id}.npz", **arrays)
    return table_dir


def cmd_train(args: argparse.Namespace) -> int:
    spec = _method_spec(args)
    data = load_dataset(args.dataset)
    if spec.name == "supervised" and not data.has_labels:
        return _dataset_error("supervised training requires labeled sessions")
    started = time.perf_counter()
    outcome = train_method(data, spec, seed=args.seed or 0)
    wall = time.perf_counter() - started
    out = Path(args.out)
    model = outcome.model
    if model is None:
        model = _placeholder_model(spec, data, outcome.classifier, args.seed or 0)
    save_model(model, out)

    log_lines = [
        f"method {spec.name}",
        f"wall_time {wall:.3f}",
        f"converged {outcome.converged}",
    ]
    if outcome.alternations is not None:
        log_lines.append(f"alternations {outcome.alternations}")
    log_lines.extend(f"objective {value!r}" for value in outcome.trace)
    out.with_suffix(".log").write_text("\n".join(log_lines) + "\n")

    if args.dump_tables:
        if spec.name in ("lrm", "nnm"):
            table_dir = _dump_tables(model, data, out)
            print(f"posterior tables in {table_dir}")
        else:
            print(
                f"note: --dump-tables applies to lrm/nnm only; {spec.name} has no "
                "posterior tables",
                file=sys.stderr,
            )
    _write_manifest(
        out,
        "train",
        {"method": dataclasses.asdict(spec), "dataset": str(args.dataset),
         "seed": args.seed or 0},
    )
    summary = f"trained {spec.name} on {len(data)} sessions in {wall:.1f}s"
    if outcome.trace:
        summary += f"; objective {outcome.trace[-1]:.4f}"
    if outcome.alternations is not None:
        summary += f"; {outcome.alternations} alternations"
    print(f"{summary}; model at {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    data = load_dataset(args.dataset)
    if not data.has_labels:
        return _dataset_error("evaluation requires labeled sessions")
    model = load_model(args.model)
    lines = ["session_id,instances,positives,precision,recall,f1"]

    def add(name: str, subset: Dataset) -> None:
        pred = predict_dataset(model.classifier, subset, args.threshold)
        truth = np.concatenate([s.true_labels for s in subset])
        precision, recall, f1 = score(pred, truth)
        lines.append(
            f"{name},{truth.size},{int(truth.sum())},"
            f"{precision!r},{recall!r},{f1!r}"
        )

    for index, session in enumerate(data):
        add(session.session_id, data.subset([index]))
    add("POOLED", data)
    body = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(body)
        _write_manifest(
            out,
            "eval",
            {"dataset": str(args.dataset), "model": str(args.model),
             "threshold": args.threshold},
        )
        print(f"wrote metrics for {len(data)} sessions to {out}")
    else:
        print(body, end="")
    return EXIT_OK


def _sweep_config(args: argparse.Namespace) -> SweepConfig:
    payload = load_json_config(args.config)
    preset_name = payload.pop("preset", None)
    if preset_name is None:
        config = build_config(SweepConfig, payload, "sweep")
    else:
        if preset_name not in PRESETS:
            raise ConfigError(
                f"sweep.preset: unknown preset {preset_name!r}; "
                f"choose from {sorted(PRESETS)}"
            )
        config = PRESETS[preset_name]()
        if payload:
            config = replace(config, **coerce_fields(SweepConfig, payload, "sweep"))
    if args.seed is not None:
        config = replace(config, seeds=(args.seed,))
    return config


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _sweep_config(args)
    report = run_sweep(config, workers=args.workers)
    out = Path(args.out)
    report.write_csv(out)
    figures = render_sweep_figures(report, out.parent if out.parent != Path("") else Path("."))
    _write_manifest(out, "sweep", dataclasses.asdict(config))
    print(f"wrote {len(report)} rows to {out}")
    for figure in figures:
        print(f"figure {figure}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    from .diagnostics import run_checks

    results = run_checks(quick=args.quick, seed=args.seed or 0)
    for result in results:
        print(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offbeat",
        description="Train event detectors from temporally imprecise annotations.",
    )
    parser.add_argument("--version", action="version", version=f"offbeat {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a labeled noisy dataset")
    synth.add_argument("--config", required=True, help="JSON with gen/noise sections")
    synth.add_argument("--out", required=True, help="output dataset directory")
    synth.add_argument("--seed", type=int, default=None, help="override both seeds")
    synth.set_defaults(handler=cmd_synth)

    train = commands.add_parser("train", help="fit one detector on a dataset")
    train.add_argument("dataset", help="session directory or file")
    train.add_argument("--method", required=True, choices=METHOD_NAMES)
    train.add_argument("--config", default=None, help="JSON method spec overrides")
    train.add_argument("--out", required=True, help="model file to write")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument(
        "--dump-tables",
        action="store_true",
        help="write per-session posterior tables next to the model",
    )
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("eval", help="score a model against true labels")
    evaluate.add_argument("dataset")
    evaluate.add_argument("model")
    evaluate.add_argument("--threshold", type=float, default=0.5)
    evaluate.add_argument("--out", default=None, help="metrics CSV (stdout if omitted)")
    evaluate.set_defaults(handler=cmd_eval)

    sweep = commands.add_parser("sweep", help="run a (sigma, pi) noise grid")
    sweep.add_argument("--config", required=True,
                       help="JSON sweep config or {'preset': ...} with overrides")
    sweep.add_argument("--out", required=True, help="report CSV path")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=None,
                       help="replace the seed list with a single replicate")
    sweep.set_defaults(handler=cmd_sweep)

    check = commands.add_parser("check", help="run built-in correctness checks")
    check.add_argument("--quick", action="store_true", help="smaller case counts")
    check.add_argument("--seed", type=int, default=None)
    check.set_defaults(handler=cmd_check)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LoadError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
