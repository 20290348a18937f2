"""Command-line entry point: select model, prepare data, train, simulate, report.

Every run writes a manifest (full parameter set, seeds, input digests,
version, timestamps) next to its outputs so seeded experiments are auditable.
Exit codes: 0 success, 1 experiment/runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import costmodel, datapipe, edgesim, featsel, harness, learner, registry

__version__ = "0.1.0"


class UsageError(ValueError):
    pass


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    inputs: list[Path]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "parameters": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "input_digests": {str(p): _digest(p) for p in inputs if p and Path(p).exists()},
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(out_dir / f"{command}-manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")


def _load_registry(args) -> registry.Registry:
    if getattr(args, "profiles", None):
        return registry.load_profiles(args.profiles)
    return registry.builtin_registry()


def _resolve_models(reg, name):
    if name.lower() == "all":
        return [reg.models[k] for k in reg.models]
    try:
        return [reg.model(name)]
    except KeyError as exc:
        raise UsageError(str(exc)) from None


def _resolve_hardware(reg, name):
    if name.lower() == "all":
        # the 8 GB Jetson variant duplicates the 2 GB latencies; skip it in "all"
        return [h for h in reg.hardware.values() if h.name != "jetson-nano-8gb"]
    try:
        return [reg.hw(name)]
    except KeyError as exc:
        raise UsageError(str(exc)) from None


def cmd_estimate(args) -> int:
    reg = _load_registry(args)
    models = _resolve_models(reg, args.model)
    hw_list = _resolve_hardware(reg, args.hardware)
    workload = costmodel.WorkloadSpec(
        batch_size=args.batch, seq_length=args.seq_len, bytes_per_scalar=args.fpa,
        runtime_overhead_bytes=int(args.overhead_mb * costmodel.MB))

    reports = []
    for model in models:
        base = costmodel.estimate(model, workload, hw_list[0])
        merged: dict[str, float] = {}
        for hw in hw_list:
            for unit, seconds in costmodel.latency(base.total_flops, hw).items():
                key = unit if len(hw_list) == 1 else f"{hw.name}/{unit}"
                merged[key] = seconds
        reports.append(dataclasses.replace(base, latency_seconds=merged))

    fmt = "csv" if args.format == "csv" else "markdown"
    text = costmodel.render_table(reports, fmt=fmt)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "csv" if fmt == "csv" else "md"
    (out_dir / f"estimate.{ext}").write_text(text, encoding="utf-8")
    print(text, end="")
    _write_manifest(out_dir, "estimate", args, [])
    return 0


def cmd_prepare(args) -> int:
    out_dir = Path(args.out).parent
    if args.synth:
        try:
            n, n_features, n_informative, attack_fraction = args.synth.split(",")
            records, informative = datapipe.synth_generate(
                int(n), int(n_features), int(n_informative), float(attack_fraction),
                seed=args.seed, margin=args.synth_margin)
        except ValueError as exc:
            raise UsageError(f"bad --synth spec (want n,features,informative,fraction): {exc}") from None
        inputs = []
    else:
        if not args.input:
            raise UsageError("either --input or --synth is required")
        path = Path(args.input)
        if not path.exists():
            raise UsageError(f"input file not found: {path}")
        reg = _load_registry(args)
        try:
            descriptor = reg.dataset(args.dataset)
        except KeyError as exc:
            raise UsageError(str(exc)) from None
        table = datapipe.load_table(path, descriptor)
        codec = datapipe.fit_label_codec(table, descriptor.primary_label_column)
        records = datapipe.prepare(table, descriptor, codec)
        inputs = [path]
    if args.limit:
        records = datapipe.few_shot_subsample(records, limit=args.limit, seed=args.seed)
    datapipe.write_prepared(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    _write_manifest(out_dir if str(out_dir) else Path("."), "prepare", args, inputs)
    return 0


def _train_config(args) -> learner.TrainConfig:
    return learner.TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                               batch_size=args.batch_size, seed=args.seed)


def _featurizer(args) -> learner.HashedFeaturizer:
    return learner.HashedFeaturizer(dimension=args.hash_dim, seed=args.seed)


def _report_json(report: harness.ExperimentReport, label: str) -> dict:
    return {
        "label": label,
        "mode": report.spec_mode,
        "epochs": report.epochs,
        "train_seconds": report.train_seconds,
        "train_log": [dataclasses.asdict(e) for e in report.train_log],
        "metrics": dataclasses.asdict(report.test_metrics) | {
            "zero_division_flags": sorted(report.test_metrics.zero_division_flags)},
        "confusion": dataclasses.asdict(report.confusion),
        "seed": report.seed,
    }


def cmd_train(args) -> int:
    records = datapipe.read_prepared(args.data)
    spec = harness.ExperimentSpec(mode=args.mode, train_records=tuple(records),
                                  config=_train_config(args), seed=args.seed)
    report = harness.run_experiment(spec, _featurizer(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label = f"{args.mode}:{Path(args.data).stem}"
    with open(out_dir / "experiment.json", "w", encoding="utf-8") as fh:
        json.dump(_report_json(report, label), fh, indent=2)
        fh.write("\n")
    row = harness.ReportRow(label=label, report=report)
    print(harness.emit_report([row], fmt="markdown" if args.format == "md" else "csv"), end="")
    _write_manifest(out_dir, "train", args, [Path(args.data)])
    return 0


def cmd_cross_eval(args) -> int:
    train_path, eval_path = Path(args.train), Path(args.eval)
    if train_path.resolve() == eval_path.resolve():
        raise UsageError("cross-eval train and eval datasets must differ")
    train_records = datapipe.read_prepared(train_path)
    eval_records = datapipe.read_prepared(eval_path)
    spec = harness.ExperimentSpec(
        mode="cross_dataset", train_records=tuple(train_records),
        eval_records=tuple(eval_records), config=_train_config(args), seed=args.seed,
        train_name=str(train_path), eval_name=str(eval_path))
    report = harness.run_experiment(spec, _featurizer(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label = f"{train_path.stem}->{eval_path.stem}"
    with open(out_dir / "experiment.json", "w", encoding="utf-8") as fh:
        json.dump(_report_json(report, label), fh, indent=2)
        fh.write("\n")
    print(harness.emit_report([harness.ReportRow(label=label, report=report)],
                              fmt="markdown" if args.format == "md" else "csv"), end="")
    _write_manifest(out_dir, "cross-eval", args, [train_path, eval_path])
    return 0


def cmd_kfold(args) -> int:
    records = datapipe.read_prepared(args.data)
    result = harness.run_kfold(records, k=args.k, config=_train_config(args),
                               seed=args.seed, featurizer=_featurizer(args))
    rows = [harness.ReportRow(label=f"fold {i + 1}", report=rep)
            for i, rep in enumerate(result.fold_reports)]
    fmt = "markdown" if args.format == "md" else "csv"
    text = harness.emit_report(rows, fmt=fmt)
    print(text, end="")
    print(f"accuracy spread: {result.accuracy_spread:.4f}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / ("kfold.md" if fmt == "markdown" else "kfold.csv")).write_text(text, encoding="utf-8")
    _write_manifest(out_dir, "kfold", args, [Path(args.data)])
    return 0


def cmd_select_features(args) -> int:
    records = datapipe.read_prepared(args.data)
    names, X, y = datapipe.records_to_matrix(records)
    if not np.all(np.isfinite(X)):
        raise UsageError("feature selection needs an all-numeric feature matrix")
    Z, _ = featsel.standardize(X)
    yc = y - y.mean()
    results = []
    methods = featsel.METHODS if args.method == "all" else (args.method,)
    for method in methods:
        if method == "lasso":
            lam = args.lasso_lambda if args.lasso_lambda is not None else (
                0.1 * featsel.lasso_lambda_max(Z, yc))
            res, _beta = featsel.lasso(Z, yc, lam)
        elif method == "rfe":
            res = featsel.rfe(X, y, n_keep=args.n_keep or max(1, X.shape[1] // 2))
        elif method == "pca":
            _c, _v, res = featsel.pca(X, k=args.n_keep or max(1, X.shape[1] // 2))
        elif method == "random_forest":
            res = featsel.random_forest_importance(X, y.astype(int), seed=args.seed,
                                                   n_keep=args.n_keep)
        elif method == "correlation":
            res = featsel.correlation_filter(X, threshold=args.corr_threshold)
        else:
            raise UsageError(f"unknown method {method!r}; valid: all, {', '.join(featsel.METHODS)}")
        results.append(res)
        print(f"{res.method}: kept {len(res.kept)}/{X.shape[1]} features -> {list(res.kept)}")
    csv_text = featsel.export_selection_csv(results, names)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "selection.csv").write_text(csv_text, encoding="utf-8")
    _write_manifest(out_dir, "select-features", args, [Path(args.data)])
    return 0


def cmd_simulate(args) -> int:
    reg = _load_registry(args)
    try:
        model = reg.model(args.model)
        hw = reg.hw(args.hardware)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    unit = args.unit or hw.execution_units[0][0]
    source = edgesim.AnalyticalSource(model=model, hardware=hw, unit=unit)
    config = edgesim.SimConfig(latency_source=source, arrival_interval=args.interval,
                               duration=args.duration,
                               queue_capacity=args.queue_capacity,
                               primary_task_share=args.share)
    verdict = edgesim.stability(config)
    report, trajectory = edgesim.run(config)
    print(f"model={model.name} hardware={hw.name}/{unit} "
          f"service={report.service_time_used:.4f}s rho={verdict.rho:.4f} "
          f"{'stable' if verdict.stable else 'saturated'}")
    print(f"arrivals={report.arrivals} completed={report.completed} dropped={report.dropped} "
          f"final_backlog={report.final_backlog} max_backlog={report.max_backlog} "
          f"mean_sojourn={report.mean_sojourn:.3f}s utilization={report.utilization:.4f}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "backlog.csv").write_text(edgesim.export_trajectory_csv(trajectory),
                                         encoding="utf-8")
    with open(out_dir / "simulation.json", "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(report) | {"rho": verdict.rho, "stable": verdict.stable},
                  fh, indent=2)
        fh.write("\n")
    _write_manifest(out_dir, "simulate", args, [])
    return 0


def cmd_score_preds(args) -> int:
    path = Path(args.preds)
    if not path.exists():
        raise UsageError(f"prediction file not found: {path}")
    report, per_class = harness.score_prediction_file(path)
    print(f"accuracy={report.accuracy:.4f} precision={report.precision:.4f} "
          f"recall={report.recall:.4f} f1={report.f1:.4f}")
    for cls, counts in sorted(per_class.items(), key=lambda kv: str(kv[0])):
        print(f"class {cls}: tp={counts.tp} fp={counts.fp} fn={counts.fn} tn={counts.tn}")
    if report.zero_division_flags:
        print(f"zero-division flags: {sorted(report.zero_division_flags)}")
    out_dir = Path(args.out_dir)
    _write_manifest(out_dir, "score-preds", args, [path])
    return 0


def cmd_report(args) -> int:
    rows = []
    inputs = []
    for path in args.experiments:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"experiment file not found: {p}")
        inputs.append(p)
        data = json.loads(p.read_text(encoding="utf-8"))
        metrics = harness.MetricsReport(
            accuracy=data["metrics"]["accuracy"], precision=data["metrics"]["precision"],
            recall=data["metrics"]["recall"], f1=data["metrics"]["f1"],
            mean_loss=data["metrics"].get("mean_loss"),
            zero_division_flags=frozenset(data["metrics"].get("zero_division_flags", [])))
        log = tuple(learner.EpochLog(**e) for e in data.get("train_log", []))
        counts = harness.ConfusionCounts(**data["confusion"])
        rep = harness.ExperimentReport(
            spec_mode=data["mode"], epochs=data["epochs"],
            train_seconds=data["train_seconds"], train_log=log,
            test_metrics=metrics, confusion=counts, seed=data["seed"])
        rows.append(harness.ReportRow(label=data.get("label", p.stem), report=rep))
    fmt = "markdown" if args.format == "md" else "csv"
    text = harness.emit_report(rows, fmt=fmt)
    print(text, end="")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / ("report.md" if fmt == "markdown" else "report.csv")).write_text(
        text, encoding="utf-8")
    _write_manifest(out_dir, "report", args, inputs)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgeslm",
                                     description="SLM edge malware-detection feasibility toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, training=False):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--format", choices=("md", "csv"), default="md")
        p.add_argument("--profiles", default=None, help="user profile file merged over built-ins")
        if training:
            p.add_argument("--epochs", type=int, default=4)
            p.add_argument("--lr", type=float, default=1e-2,
                           help="learning rate for the built-in linear head "
                                "(the transformer fine-tuning default is 2e-5)")
            p.add_argument("--batch-size", type=int, default=32)
            p.add_argument("--hash-dim", type=int, default=2**18)

    p = sub.add_parser("estimate", help="analytical cost table for (model, hardware)")
    p.add_argument("--model", required=True)
    p.add_argument("--hardware", required=True)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--seq-len", type=int, default=128)
    p.add_argument("--fpa", type=int, default=4)
    p.add_argument("--overhead-mb", type=float, default=100.0)
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("prepare", help="turn a raw CSV (or synthetic spec) into prepared records")
    p.add_argument("--dataset", default="X-IIoTID")
    p.add_argument("--input", default=None)
    p.add_argument("--synth", default=None, metavar="N,FEATURES,INFORMATIVE,FRACTION")
    p.add_argument("--synth-margin", type=float, default=0.0)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="run a zero-shot / few-shot / complete experiment")
    p.add_argument("--mode", choices=("zero_shot", "few_shot", "complete"), default="complete")
    p.add_argument("--data", required=True)
    common(p, training=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cross-eval", help="train on one prepared dataset, evaluate on another")
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    common(p, training=True)
    p.set_defaults(func=cmd_cross_eval)

    p = sub.add_parser("kfold", help="k-fold cross-validation on prepared records")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=5)
    common(p, training=True)
    p.set_defaults(func=cmd_kfold)

    p = sub.add_parser("select-features", help="run the five feature-analysis procedures")
    p.add_argument("--data", required=True)
    p.add_argument("--method", default="all")
    p.add_argument("--n-keep", type=int, default=None)
    p.add_argument("--lasso-lambda", type=float, default=None)
    p.add_argument("--corr-threshold", type=float, default=0.9)
    common(p)
    p.set_defaults(func=cmd_select_features)

    p = sub.add_parser("simulate", help="discrete-event simulation of an edge deployment")
    p.add_argument("--model", required=True)
    p.add_argument("--hardware", required=True)
    p.add_argument("--unit", default=None)
    p.add_argument("--interval", type=float, default=1.0)
    p.add_argument("--duration", type=float, default=3600.0)
    p.add_argument("--queue-capacity", type=int, default=None)
    p.add_argument("--share", type=float, default=0.0)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score-preds", help="score an external prediction file")
    p.add_argument("--preds", required=True)
    common(p)
    p.set_defaults(func=cmd_score_preds)

    p = sub.add_parser("report", help="render saved experiment JSON files as a table")
    p.add_argument("experiments", nargs="+")
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (datapipe.ParseError, datapipe.SchemaError, datapipe.EncodingError,
            registry.ProfileError, harness.SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
