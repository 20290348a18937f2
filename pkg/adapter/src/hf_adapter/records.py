"""Wire formats shared with the evaluation harness.

Prepared records: ``#edgeslm-prep v1`` header, then tab-separated
``id  binary_label  class_label  text`` lines.
Predictions: ``#edgeslm-pred v1`` header, then ``id  true  pred  score``.
Implemented here from the format contract only.
"""

import pathlib
from dataclasses import dataclass

PREP_HEADER = "#edgeslm-prep v1"
PRED_HEADER = "#edgeslm-pred v1"


class ParseError(Exception):
    pass


@dataclass(frozen=True)
class PrepRecord:
    id: int
    binary_label: int
    class_label: int
    text: str


def read_prepared_file(path) -> list[PrepRecord]:
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
            records.append(PrepRecord(id=rid, binary_label=binary, class_label=cls,
                                      text=parts[3]))
    return records


def read_prepared(path) -> list[PrepRecord]:
    """Read one prepared file, or every *.prep file in a directory (sorted)."""
    p = pathlib.Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.prep"))
        if not files:
            raise ParseError(f"{p}: no *.prep files found")
        records = []
        for f in files:
            records.extend(read_prepared_file(f))
        return records
    return read_prepared_file(p)


def write_prediction_file(path, rows) -> None:
    """rows: iterable of (id, true_label, predicted_label, score in [0,1])."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PRED_HEADER + "\n")
        for rid, true, pred, score in rows:
            score_txt = "" if score is None else f"{score:.6f}"
            fh.write(f"{rid}\t{true}\t{pred}\t{score_txt}\n")
