"""Command-line interface.

Subcommands: analyze (property reports), train (single cell), bench
(resumable sweep), compare (rank/CD/MCM statistics), trace (activation
applied to a series). Every invocation writes a manifest.json with the
fully resolved configuration into an output directory named by the hash of
the result-affecting settings.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric divergence,
5 incomplete results matrix.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import activations as zoo
from . import kernels
from .bench import (
    DivergenceError,
    ResultsStore,
    RunResult,
    TrainConfig,
    build_spec,
    cell_hash,
    evaluate,
    run_sweep,
    train,
)
from .data import data_root as resolve_data_root
from .data import load_dataset_pair, znormalize
from .errors import ConfigError, DataError, LeakySineLUError, NumericError
from .models import save_checkpoint
from .properties import dead_region_trace, property_report, report_to_dict
from .stats import build_report, matrix_from_records, write_report_files

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_INCOMPLETE = 5

# Settings that change where/how work runs but not what it computes.
_VOLATILE_KEYS = {"out", "jobs", "data_root", "config_file"}


def _invocation_dir(command: str, out_root: str, resolved: dict) -> Path:
    hashed = {k: v for k, v in sorted(resolved.items()) if k not in _VOLATILE_KEYS}
    digest = hashlib.sha256(
        json.dumps({"command": command, **hashed}, sort_keys=True).encode()
    ).hexdigest()[:12]
    outdir = Path(out_root) / f"{command}-{digest}"
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "invocation_hash": digest,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        **resolved,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return outdir


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc


def _resolve_root(args) -> str:
    cfg = _load_config_file(getattr(args, "config_file", None))
    root = resolve_data_root(getattr(args, "data_root", None), cfg.get("data_root"))
    if not root:
        raise DataError(
            "no dataset root: pass --data-root, set UCR_DATA_ROOT, or use a config file"
        )
    return root


def _parse_activations(value: str) -> list[str]:
    if value == "all":
        return list(zoo.ACTIVATION_NAMES)
    names = [v.strip() for v in value.split(",") if v.strip()]
    for name in names:
        if name not in zoo.ACTIVATION_NAMES:
            raise ConfigError(
                f"unknown activation {name!r}; choose from {', '.join(zoo.ACTIVATION_NAMES)}"
            )
    if not names:
        raise ConfigError("empty activation list")
    return names


def _parse_datasets(value: str) -> list[str]:
    if value.startswith("@"):
        path = Path(value[1:])
        if not path.is_file():
            raise DataError(f"dataset list file not found: {path}")
        names = [line.strip() for line in path.read_text().splitlines() if line.strip()]
    else:
        names = [v.strip() for v in value.split(",") if v.strip()]
    if not names:
        raise ConfigError("empty dataset list")
    return names


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "epochs", None) is not None:
        out["epochs"] = args.epochs
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "batch_size", None) is not None:
        out["batch_size"] = args.batch_size
    if getattr(args, "no_norm_layers", False):
        out["norm_enabled"] = False
    if getattr(args, "no_znorm", False):
        out["znorm"] = "none"
    return out


def cmd_analyze(args) -> int:
    names = _parse_activations(args.activation)
    resolved = {"activation": args.activation, "activations": names}
    outdir = _invocation_dir("analyze", args.out, resolved)
    reports = [property_report(name) for name in names]
    rows = []
    for rep in reports:
        doc = report_to_dict(rep)
        (outdir / f"properties_{rep.kind.name}.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )
        for key in (
            "limit_neg",
            "limit_pos",
            "monotone",
            "semi_periodic_period",
            "semi_periodic_max_dev",
            "empirical_min",
            "empirical_max",
            "matches_catalog",
        ):
            value = doc[key]
            if isinstance(value, dict):
                value = f"{value['verdict']}:{value['value']}"
            rows.append((rep.kind.name, key, value))
        status = "ok" if rep.matches_catalog else "MISMATCH " + "; ".join(rep.mismatches)
        note = f" ({rep.table_note})" if rep.table_note else ""
        print(f"{rep.kind.name}: {status}{note}")
    with open(outdir / "properties.csv", "w") as fh:
        fh.write("activation,property,value\n")
        for name, key, value in rows:
            fh.write(f"{name},{key},{value}\n")
    print(f"wrote {len(reports)} report(s) under {outdir}")
    return EXIT_OK if all(r.matches_catalog for r in reports) else 1


def cmd_train(args) -> int:
    root = _resolve_root(args)
    config = TrainConfig.for_architecture(args.arch, args.activation, **_overrides(args))
    resolved = {
        "dataset": args.dataset,
        "config": config.to_dict(),
        "data_root": root,
        "out": args.out,
    }
    outdir = _invocation_dir("train", args.out, resolved)
    train_ds, test_ds = load_dataset_pair(root, args.dataset)
    train_ds = znormalize(train_ds, config.znorm)
    test_ds = znormalize(test_ds, config.znorm)
    spec = build_spec(config, train_ds)
    digest = cell_hash(args.dataset, config)
    store = ResultsStore(outdir / "results.jsonl")
    started = time.perf_counter()
    try:
        state, history, opt_state = train(spec, train_ds, config)
    except DivergenceError as exc:
        result = RunResult(
            dataset=args.dataset,
            config=config.to_dict(),
            config_hash=digest,
            status="diverged",
            error=str(exc),
            diverged_epoch=exc.epoch,
            seconds=time.perf_counter() - started,
        )
        store.append(result.to_record())
        print(f"diverged at epoch {exc.epoch}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    accuracy = evaluate(state, spec, test_ds)
    ckpt = outdir / f"{digest}.npz"
    save_checkpoint(ckpt, spec, state, opt_state)
    result = RunResult(
        dataset=args.dataset,
        config=config.to_dict(),
        config_hash=digest,
        status="completed",
        accuracy=accuracy,
        final_train_loss=history[-1] if history else None,
        seconds=time.perf_counter() - started,
        checkpoint=str(ckpt),
    )
    store.append(result.to_record())
    print(f"dataset={args.dataset} arch={args.arch} activation={config.activation.name} "
          f"accuracy={accuracy:.6f}")
    print(f"results under {outdir}")
    return EXIT_OK


def cmd_bench(args) -> int:
    root = _resolve_root(args)
    activations = _parse_activations(args.activations)
    datasets = _parse_datasets(args.datasets)
    for name in datasets:
        load_dataset_pair(root, name)  # fail fast on missing/malformed data
    overrides = _overrides(args)
    config_docs = {
        name: TrainConfig.for_architecture(args.arch, name, **overrides).to_dict()
        for name in activations
    }
    resolved = {
        "architecture": args.arch,
        "activations": activations,
        "datasets": datasets,
        "configs": config_docs,
        "data_root": root,
        "jobs": args.jobs,
        "out": args.out,
    }
    outdir = _invocation_dir("bench", args.out, resolved)
    store = ResultsStore(outdir / "results.jsonl")
    outcome = run_sweep(
        datasets,
        activations,
        args.arch,
        root,
        store,
        overrides=overrides,
        jobs=args.jobs,
        checkpoint_dir=outdir / "checkpoints",
    )
    print(f"{outcome.n_cached} cached, {outcome.n_trained} trained, "
          f"{outcome.n_failed} failed/diverged")
    print(f"results: {store.path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    results_path = Path(args.results)
    if not results_path.is_file():
        raise DataError(f"results file not found: {results_path}")
    records = ResultsStore(results_path).load()
    resolved = {
        "results": str(results_path),
        "architecture": args.arch,
        "alpha": args.alpha,
        "out": args.out,
    }
    matrix, missing = matrix_from_records(records, args.arch)
    if matrix is None:
        print("incomplete results matrix; missing cells:", file=sys.stderr)
        for dataset, method in missing:
            print(f"  {dataset} x {method}", file=sys.stderr)
        return EXIT_INCOMPLETE
    outdir = _invocation_dir("compare", args.out, resolved)
    report = build_report(matrix, alpha=args.alpha)
    written = write_report_files(report, matrix, outdir)
    for method in report.methods:
        print(f"{method}: avg_rank={report.avg_ranks[method]:.4f} "
              f"mean_acc={report.mean_accuracy[method]:.4f}")
    print(f"wrote {len(written)} file(s) under {outdir}")
    return EXIT_OK


def _trace_series(args) -> np.ndarray:
    if args.grid is not None:
        lo, hi, n = args.grid
        return np.linspace(lo, hi, int(n))
    value = args.input
    path = Path(value)
    try:
        if path.is_file():
            tokens = path.read_text().split()
        else:
            tokens = value.replace("\t", " ").split()
        series = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"cannot parse trace input: {exc}") from exc
    if series.size == 0:
        raise DataError("trace input is empty")
    return series


def cmd_trace(args) -> int:
    kind = zoo.activation(args.activation)
    series = _trace_series(args)
    values, dead_fraction = dead_region_trace(kind, series)
    derivs = zoo.array_derivative(kind, series)
    lines = ["x,value,derivative"]
    lines += [f"{repr(float(x))},{repr(float(v))},{repr(float(d))}"
              for x, v, d in zip(series, values, derivs)]
    text = "\n".join(lines) + "\n"
    if args.out_file:
        Path(args.out_file).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"dead_fraction={dead_fraction}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leakysinelu",
        description="Activation property analysis, training and comparison "
        "for univariate time series classification.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="verify activation properties against the catalog")
    p.add_argument("--activation", required=True,
                   choices=list(zoo.ACTIVATION_NAMES) + ["all"])
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="train one (architecture, activation, dataset) cell")
    p.add_argument("--arch", required=True, choices=["mlp", "fcn"])
    p.add_argument("--activation", required=True, choices=list(zoo.ACTIVATION_NAMES))
    p.add_argument("--dataset", required=True)
    p.add_argument("--data-root", dest="data_root")
    p.add_argument("--config", dest="config_file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--no-norm-layers", dest="no_norm_layers", action="store_true")
    p.add_argument("--no-znorm", dest="no_znorm", action="store_true")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="run a sweep over datasets x activations")
    p.add_argument("--arch", required=True, choices=["mlp", "fcn"])
    p.add_argument("--activations", required=True,
                   help="comma-separated names or 'all'")
    p.add_argument("--datasets", required=True,
                   help="comma-separated names or @file with one name per line")
    p.add_argument("--data-root", dest="data_root")
    p.add_argument("--config", dest="config_file")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--no-norm-layers", dest="no_norm_layers", action="store_true")
    p.add_argument("--no-znorm", dest="no_znorm", action="store_true")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="statistical comparison from a results file")
    p.add_argument("--results", required=True)
    p.add_argument("--arch", required=True, choices=["mlp", "fcn"])
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("trace", help="emit (x, value, derivative) CSV for a series")
    p.add_argument("--activation", required=True, choices=list(zoo.ACTIVATION_NAMES))
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--input", help="tab/space-separated values or a file path")
    group.add_argument("--grid", nargs=3, type=float, metavar=("LO", "HI", "N"),
                       help="evaluate on N points from LO to HI")
    p.add_argument("--out", dest="out_file")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: diverged at epoch {exc.epoch}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except LeakySineLUError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
