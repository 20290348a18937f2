"""Dataset loading, label encoding, serialization, splits and synthetic data.

Raw CSV tables become LabeledRecords: the feature columns are serialized as
space-joined ``name=value`` pairs (delimiter characters escaped), the primary
label column drives the binary benign/attack target, and all label columns
are encoded into a multilabel vector. Splits (60/40 and k-fold) are seeded
and deterministic.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass

import numpy as np

from .registry import DatasetDescriptor


class SchemaError(ValueError):
    """Input table does not match the dataset descriptor."""


class ParseError(ValueError):
    """Malformed input file."""


class EncodingError(ValueError):
    """A label value was not seen when the codec was fitted."""


@dataclass(frozen=True)
class RawTable:
    column_names: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def column(self, name: str) -> list[str]:
        try:
            idx = self.column_names.index(name)
        except ValueError:
            raise SchemaError(f"no column named {name!r}") from None
        return [row[idx] for row in self.rows]


@dataclass(frozen=True)
class LabelCodec:
    classes: tuple[str, ...]

    def code(self, value: str) -> int:
        try:
            return self._index()[value]
        except KeyError:
            raise EncodingError(f"unseen label value {value!r}") from None

    def _index(self) -> dict[str, int]:
        # cached on first use; frozen dataclass so stash via object.__setattr__
        idx = getattr(self, "_idx", None)
        if idx is None:
            idx = {c: i for i, c in enumerate(self.classes)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def __len__(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class LabeledRecord:
    id: int
    text: str
    binary_label: int
    class_label: int
    multilabel: tuple[int, ...] = ()


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]


@dataclass(frozen=True)
class KFoldPlan:
    k: int
    seed: int
    folds: tuple[tuple[int, ...], ...]


def load_table(path, descriptor: DatasetDescriptor) -> RawTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            rows.append(tuple(row))
    missing = [c for c in descriptor.label_columns if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing label column(s) {missing} for dataset {descriptor.name}")
    return RawTable(column_names=tuple(header), rows=tuple(rows))


def fit_label_codec(table: RawTable, label_column: str) -> LabelCodec:
    values = table.column(label_column)
    return LabelCodec(classes=tuple(sorted(set(values))))


def escape_value(value: str) -> str:
    return value.replace("\\", "\\\\").replace("=", "\\=").replace(" ", "\\ ")


def unescape_value(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        if value[i] == "\\" and i + 1 < len(value):
            out.append(value[i + 1])
            i += 2
        else:
            out.append(value[i])
            i += 1
    return "".join(out)


MISSING_TOKEN = "__missing__"


def serialize_features(names, values) -> str:
    parts = []
    for name, value in zip(names, values):
        rendered = MISSING_TOKEN if value == "" else escape_value(value)
        parts.append(f"{escape_value(name)}={rendered}")
    return " ".join(parts)


def parse_features(text: str) -> list[tuple[str, str]]:
    """Inverse of serialize_features (round-trip property)."""
    pairs = []
    token = []
    i = 0
    tokens = []
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            token.append(text[i:i + 2])
            i += 2
            continue
        if ch == " ":
            tokens.append("".join(token))
            token = []
        else:
            token.append(ch)
        i += 1
    if token:
        tokens.append("".join(token))
    for tok in tokens:
        # split on the first unescaped '='
        j = 0
        split_at = -1
        while j < len(tok):
            if tok[j] == "\\":
                j += 2
                continue
            if tok[j] == "=":
                split_at = j
                break
            j += 1
        if split_at < 0:
            raise ParseError(f"feature token without '=': {tok!r}")
        pairs.append((unescape_value(tok[:split_at]), unescape_value(tok[split_at + 1:])))
    return pairs


def prepare(table: RawTable, descriptor: DatasetDescriptor, codec: LabelCodec) -> list[LabeledRecord]:
    label_cols = descriptor.label_columns
    primary = descriptor.primary_label_column
    feature_cols = [c for c in table.column_names if c not in label_cols]
    feature_idx = [table.column_names.index(c) for c in feature_cols]
    label_idx = {c: table.column_names.index(c) for c in label_cols}
    codecs = {primary: codec}
    for col in label_cols[1:]:
        codecs[col] = fit_label_codec(table, col)

    records = []
    for rid, row in enumerate(table.rows):
        text = serialize_features(feature_cols, [row[i] for i in feature_idx])
        primary_value = row[label_idx[primary]]
        class_label = codec.code(primary_value)
        binary = 0 if primary_value == descriptor.benign_label_value else 1
        multilabel = tuple(codecs[c].code(row[label_idx[c]]) for c in label_cols)
        records.append(LabeledRecord(id=rid, text=text, binary_label=binary,
                                     class_label=class_label, multilabel=multilabel))
    return records


def split(records, ratio: float = 0.6, seed: int = 0) -> SplitPlan:
    n = len(records)
    if n < 2:
        raise ValueError("need at least 2 records to split")
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    n_train = int(round(ratio * n))
    return SplitPlan(seed=seed, train_indices=tuple(indices[:n_train]),
                     test_indices=tuple(indices[n_train:]))


def few_shot_subsample(records, limit: int = 30000, seed: int = 0):
    if limit < 1:
        raise ValueError("limit must be >= 1")
    if len(records) <= limit:
        return list(records)
    picked = random.Random(seed).sample(range(len(records)), limit)
    return [records[i] for i in sorted(picked)]


def kfold_plan(records, k: int = 5, seed: int = 0) -> KFoldPlan:
    n = len(records)
    if n < k:
        raise ValueError(f"need at least k={k} records, got {n}")
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    folds: list[list[int]] = [[] for _ in range(k)]
    for pos, idx in enumerate(indices):
        folds[pos % k].append(idx)
    return KFoldPlan(k=k, seed=seed, folds=tuple(tuple(f) for f in folds))


def synth_generate(n: int, n_features: int, n_informative: int, attack_fraction: float,
                   seed: int = 0, quantum: float = 0.25, margin: float = 0.0):
    """Synthetic desk-scale dataset with known informative features.

    Features are standard normals quantized to a grid of step `quantum` so
    serialized values repeat across records (the built-in classifier hashes
    value tokens). The binary label thresholds a linear score of the
    informative features at the attack_fraction quantile; rows whose score
    falls within `margin` of the threshold are resampled, so margin > 0
    yields a linearly separable set.

    Returns (records, informative_index_set). Records go through the same
    serialization as real data.
    """
    if n_informative > n_features:
        raise ValueError("n_informative must be <= n_features")
    rng = np.random.default_rng(seed)
    informative = list(range(n_informative))
    weights = rng.uniform(1.0, 2.0, size=n_informative) * rng.choice([-1.0, 1.0], size=n_informative)

    X = rng.standard_normal((n, n_features))
    X = np.round(X / quantum) * quantum
    score = X[:, informative] @ weights if n_informative else np.zeros(n)

    if attack_fraction <= 0:
        y = np.zeros(n, dtype=int)
    else:
        threshold = float(np.quantile(score, 1.0 - attack_fraction))
        if margin > 0:
            bad = np.abs(score - threshold) < margin
            attempts = 0
            while bad.any() and attempts < 200:
                m = int(bad.sum())
                Xn = rng.standard_normal((m, n_features))
                Xn = np.round(Xn / quantum) * quantum
                X[bad] = Xn
                score[bad] = Xn[:, informative] @ weights if n_informative else 0.0
                bad = np.abs(score - threshold) < margin
                attempts += 1
        y = (score > threshold).astype(int)

    feature_names = [f"f{j}" for j in range(n_features)]
    records = []
    for i in range(n):
        values = [f"{X[i, j]:.2f}" for j in range(n_features)]
        text = serialize_features(feature_names, values)
        records.append(LabeledRecord(id=i, text=text, binary_label=int(y[i]),
                                     class_label=int(y[i]), multilabel=(int(y[i]),)))
    return records, set(informative)


def records_to_matrix(records) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Recover (feature_names, X, y) from prepared records with numeric values.

    Non-numeric or missing cells become NaN.
    """
    names: list[str] | None = None
    rows = []
    y = []
    for rec in records:
        pairs = parse_features(rec.text)
        if names is None:
            names = [p[0] for p in pairs]
        row = []
        for _, value in pairs:
            try:
                row.append(float(value))
            except ValueError:
                row.append(float("nan"))
        rows.append(row)
        y.append(rec.binary_label)
    return names or [], np.asarray(rows, dtype=float), np.asarray(y, dtype=float)


PREP_HEADER = "#edgeslm-prep v1"


def write_prepared(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PREP_HEADER + "\n")
        for rec in records:
            fh.write(f"{rec.id}\t{rec.binary_label}\t{rec.class_label}\t{rec.text}\n")


def read_prepared(path) -> list[LabeledRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != PREP_HEADER:
            raise ParseError(f"{path}: line 1: expected header {PREP_HEADER!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 3)
            if len(parts) != 4:
                raise ParseError(f"{path}: line {line_no}: expected 4 tab-separated fields")
            try:
                rid, binary, cls = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                raise ParseError(f"{path}: line {line_no}: non-integer id/label field") from None
            records.append(LabeledRecord(id=rid, text=parts[3], binary_label=binary,
                                         class_label=cls, multilabel=(cls,)))
    return records
