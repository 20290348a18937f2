"""Metrics, experiment protocols, prediction-file scoring and report rendering.

Implements the four evaluation protocols (zero-shot, few-shot, complete,
cross-dataset) plus k-fold validation on top of the built-in classifier,
and scores externally produced prediction files in the same code path so
there is a single source of truth for every metric.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from fractions import Fraction

from . import datapipe, learner
from .datapipe import LabeledRecord, ParseError
from .learner import ClassifierState, TrainConfig

MODES = ("zero_shot", "few_shot", "complete", "cross_dataset")


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    mean_loss: float | None = None
    zero_division_flags: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str
    train_records: tuple[LabeledRecord, ...]
    eval_records: tuple[LabeledRecord, ...] | None = None
    config: TrainConfig = TrainConfig()
    seed: int = 0
    split_ratio: float = 0.6
    few_shot_limit: int = 30000
    train_name: str = "D1"
    eval_name: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"unknown mode {self.mode!r}; valid: {MODES}")
        if self.mode == "cross_dataset":
            if self.eval_records is None:
                raise SpecError("cross_dataset requires an eval dataset")
            if self.eval_name is not None and self.eval_name == self.train_name:
                raise SpecError("cross_dataset train and eval datasets must differ")


@dataclass(frozen=True)
class ExperimentReport:
    spec_mode: str
    epochs: int
    train_seconds: float
    train_log: tuple[learner.EpochLog, ...]
    test_metrics: MetricsReport
    confusion: ConfusionCounts
    seed: int


def confusion(pairs) -> ConfusionCounts:
    tp = fp = fn = tn = 0
    for pred, true in pairs:
        if true == 1:
            if pred == 1:
                tp += 1
            else:
                fn += 1
        else:
            if pred == 1:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def multiclass_confusion(pairs) -> dict[object, ConfusionCounts]:
    """One-vs-rest counts per class appearing in either position."""
    classes = sorted({p for p, _ in pairs} | {t for _, t in pairs}, key=str)
    out = {}
    for cls in classes:
        out[cls] = confusion(((1 if p == cls else 0, 1 if t == cls else 0) for p, t in pairs))
    return out


def metrics(c: ConfusionCounts, mean_loss: float | None = None) -> MetricsReport:
    if c.total == 0:
        raise ValueError("cannot compute metrics over zero records")
    flags = set()
    accuracy = Fraction(c.tp + c.tn, c.total)
    if c.tp + c.fp == 0:
        precision = Fraction(0)
        flags.add("precision")
    else:
        precision = Fraction(c.tp, c.tp + c.fp)
    if c.tp + c.fn == 0:
        recall = Fraction(0)
        flags.add("recall")
    else:
        recall = Fraction(c.tp, c.tp + c.fn)
    if precision + recall == 0:
        f1 = Fraction(0)
        flags.add("f1")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(accuracy=float(accuracy), precision=float(precision),
                         recall=float(recall), f1=float(f1), mean_loss=mean_loss,
                         zero_division_flags=frozenset(flags))


def macro_metrics(per_class: dict[object, ConfusionCounts]) -> MetricsReport:
    reports = [metrics(c) for c in per_class.values()]
    n = len(reports)
    flags = frozenset().union(*(r.zero_division_flags for r in reports))
    return MetricsReport(
        accuracy=sum(r.accuracy for r in reports) / n,
        precision=sum(r.precision for r in reports) / n,
        recall=sum(r.recall for r in reports) / n,
        f1=sum(r.f1 for r in reports) / n,
        zero_division_flags=flags,
    )


def evaluate(state: ClassifierState, records) -> tuple[MetricsReport, ConfusionCounts]:
    pairs = []
    total_loss = 0.0
    for rec in records:
        score, label = learner.predict(state, rec.text)
        pairs.append((label, rec.binary_label))
        total_loss += learner.record_loss(state, rec)
    c = confusion(pairs)
    return metrics(c, mean_loss=total_loss / len(records)), c


def run_experiment(spec: ExperimentSpec,
                   featurizer: learner.HashedFeaturizer | None = None) -> ExperimentReport:
    if spec.mode == "cross_dataset":
        train_set = list(spec.train_records)
        plan = datapipe.split(train_set, ratio=spec.split_ratio, seed=spec.seed)
        train_set = [train_set[i] for i in plan.train_indices]
        eval_set = list(spec.eval_records)
    else:
        records = list(spec.train_records)
        plan = datapipe.split(records, ratio=spec.split_ratio, seed=spec.seed)
        train_set = [records[i] for i in plan.train_indices]
        eval_set = [records[i] for i in plan.test_indices]

    if spec.mode == "zero_shot":
        state = ClassifierState.zeros(featurizer)
        log: tuple[learner.EpochLog, ...] = ()
        train_seconds = 0.0
        epochs = 0
    else:
        if spec.mode == "few_shot":
            train_set = datapipe.few_shot_subsample(train_set, limit=spec.few_shot_limit,
                                                    seed=spec.seed)
        t0 = time.perf_counter()
        state, epoch_log = learner.train(train_set, spec.config, featurizer)
        train_seconds = time.perf_counter() - t0
        log = tuple(epoch_log)
        epochs = spec.config.epochs

    test_metrics, counts = evaluate(state, eval_set)
    return ExperimentReport(spec_mode=spec.mode, epochs=epochs, train_seconds=train_seconds,
                            train_log=log, test_metrics=test_metrics, confusion=counts,
                            seed=spec.seed)


@dataclass(frozen=True)
class KFoldReport:
    fold_reports: tuple[ExperimentReport, ...]
    accuracy_spread: float
    seed: int


def run_kfold(records, k: int = 5, config: TrainConfig = TrainConfig(),
              seed: int = 0, featurizer: learner.HashedFeaturizer | None = None) -> KFoldReport:
    records = list(records)
    plan = None
    used_seed = seed
    for attempt in range(10):
        candidate = datapipe.kfold_plan(records, k=k, seed=seed + attempt)
        ok = True
        for fold in candidate.folds:
            train_idx = [i for i in range(len(records)) if i not in set(fold)]
            if len({records[i].binary_label for i in train_idx}) < 2:
                ok = False
                break
        if ok:
            plan = candidate
            used_seed = seed + attempt
            break
    if plan is None:
        raise SpecError("could not build k folds with both classes in every training set")

    reports = []
    for fold in plan.folds:
        fold_set = set(fold)
        train_set = [records[i] for i in range(len(records)) if i not in fold_set]
        eval_set = [records[i] for i in fold]
        t0 = time.perf_counter()
        state, log = learner.train(train_set, config, featurizer)
        train_seconds = time.perf_counter() - t0
        test_metrics, counts = evaluate(state, eval_set)
        reports.append(ExperimentReport(
            spec_mode="kfold", epochs=config.epochs, train_seconds=train_seconds,
            train_log=tuple(log), test_metrics=test_metrics, confusion=counts, seed=used_seed))
    accs = [r.test_metrics.accuracy for r in reports]
    return KFoldReport(fold_reports=tuple(reports), accuracy_spread=max(accs) - min(accs),
                       seed=used_seed)


def cross_matrix(datasets: dict[str, list[LabeledRecord]], mode: str = "complete",
                 config: TrainConfig = TrainConfig(), seed: int = 0,
                 featurizer: learner.HashedFeaturizer | None = None):
    """Train per row dataset, evaluate per column dataset; diagonal absent."""
    if mode not in ("few_shot", "complete"):
        raise SpecError("cross matrix mode must be few_shot or complete")
    if len(datasets) < 2:
        raise SpecError("cross matrix needs at least 2 datasets")
    names = list(datasets)
    matrix: dict[str, dict[str, float | None]] = {}
    for row in names:
        matrix[row] = {}
        for col in names:
            if row == col:
                matrix[row][col] = None
                continue
            spec = ExperimentSpec(mode="cross_dataset",
                                  train_records=tuple(datasets[row]),
                                  eval_records=tuple(datasets[col]),
                                  config=config, seed=seed,
                                  train_name=row, eval_name=col)
            if mode == "few_shot":
                train_set = datapipe.few_shot_subsample(list(datasets[row]), seed=seed)
                spec = ExperimentSpec(mode="cross_dataset", train_records=tuple(train_set),
                                      eval_records=tuple(datasets[col]), config=config,
                                      seed=seed, train_name=row, eval_name=col)
            report = run_experiment(spec, featurizer)
            matrix[row][col] = report.test_metrics.accuracy
    return matrix


PRED_HEADER = "#edgeslm-pred v1"


def write_prediction_file(path, rows) -> None:
    """rows: iterable of (id, true_label, predicted_label, score-or-None)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PRED_HEADER + "\n")
        for rid, true, pred, score in rows:
            score_txt = "" if score is None else f"{score:.6f}"
            fh.write(f"{rid}\t{true}\t{pred}\t{score_txt}\n")


def score_prediction_file(path):
    """Returns (MetricsReport, per_class_confusion). Binary files additionally
    use the binary confusion for the headline metrics; multiclass files get
    macro-averaged metrics."""
    pairs = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != PRED_HEADER:
            raise ParseError(f"{path}: line 1: expected header {PRED_HEADER!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"{path}: line {line_no}: expected 4 tab-separated fields, "
                                 f"got {len(parts)}")
            rid, true, pred, score_txt = parts
            if rid in seen_ids:
                raise ParseError(f"{path}: line {line_no}: duplicate record id {rid!r}")
            seen_ids.add(rid)
            if score_txt:
                try:
                    score = float(score_txt)
                except ValueError:
                    raise ParseError(f"{path}: line {line_no}: bad score {score_txt!r}") from None
                if not (0.0 <= score <= 1.0):
                    raise ParseError(f"{path}: line {line_no}: score {score} outside [0,1]")
            pairs.append((pred, true))
    if not pairs:
        raise ParseError(f"{path}: no prediction rows")

    labels = {p for p, _ in pairs} | {t for _, t in pairs}
    if labels <= {"0", "1"}:
        c = confusion(((int(p), int(t)) for p, t in pairs))
        return metrics(c), {"1": c}
    per_class = multiclass_confusion(pairs)
    return macro_metrics(per_class), per_class


REPORT_COLUMNS = ("Epochs", "Train Time", "Train Loss", "Train Accuracy",
                  "Test Loss", "Test Accuracy", "Precision", "Recall", "F1-score")


@dataclass(frozen=True)
class ReportRow:
    label: str
    report: ExperimentReport
    # Deterministic rendering needs a fixed train time; wall-clock timings go
    # through round_time_to if reproducible output is required.
    train_time_override: float | None = None


def _report_cells(row: ReportRow) -> list[str]:
    rep = row.report
    last = rep.train_log[-1] if rep.train_log else None
    train_time = row.train_time_override if row.train_time_override is not None else rep.train_seconds
    m = rep.test_metrics
    return [
        str(rep.epochs),
        f"{train_time:.2f}s",
        f"{last.train_loss:.4f}" if last else "---",
        f"{last.train_accuracy:.4f}" if last else "---",
        f"{m.mean_loss:.4f}" if m.mean_loss is not None else "---",
        f"{m.accuracy:.4f}",
        f"{m.precision:.4f}",
        f"{m.recall:.4f}",
        f"{m.f1:.4f}",
    ]


def emit_report(rows: list[ReportRow], fmt: str = "markdown") -> str:
    headers = ("Run",) + REPORT_COLUMNS
    table = [[row.label] + _report_cells(row) for row in rows]
    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(headers) + "\n")
        for cells in table:
            out.write(",".join(cells) + "\n")
        return out.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(headers) + " |",
                 "|" + "|".join("---" for _ in headers) + "|"]
        for cells in table:
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def render_cross_matrix(matrix: dict[str, dict[str, float | None]], fmt: str = "markdown") -> str:
    names = list(matrix)
    headers = ["Train \\ Eval"] + names
    rows = []
    for row in names:
        cells = [row]
        for col in names:
            value = matrix[row][col]
            cells.append("---" if value is None else f"{100 * value:.2f}%")
        rows.append(cells)
    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(headers) + "\n")
        for cells in rows:
            out.write(",".join(cells) + "\n")
        return out.getvalue()
    lines = ["| " + " | ".join(headers) + " |",
             "|" + "|".join("---" for _ in headers) + "|"]
    for cells in rows:
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
