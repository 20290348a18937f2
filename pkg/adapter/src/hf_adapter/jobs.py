"""Fine-tuning and batch prediction for sequence-classification transformers."""

import csv
import pathlib
import random
import time
from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .records import PrepRecord, read_prepared, write_prediction_file


class AdapterError(Exception):
    """Bad job configuration (unknown model, missing data)."""


# Five benchmark models mapped to their hub identifiers; a filesystem path
# (local checkpoint or any saved_pretrained directory) is always accepted too.
MODEL_HUB_IDS = {
    "distilgpt2": "distilgpt2",
    "distilbert": "distilbert-base-uncased",
    "tinybert": "huawei-noah/TinyBERT_General_4L_312D",
    "llama-3.2-1b": "meta-llama/Llama-3.2-1B",
    "tinyt5": "google/t5-efficient-tiny",
}

LOG_COLUMNS = ("Epochs", "Train Time", "Train Loss", "Train Accuracy",
               "Test Loss", "Test Accuracy", "Precision", "Recall", "F1-score")


def resolve_model(name_or_path: str) -> str:
    if pathlib.Path(name_or_path).exists():
        return name_or_path
    hub_id = MODEL_HUB_IDS.get(name_or_path.lower())
    if hub_id is None:
        known = ", ".join(sorted(MODEL_HUB_IDS))
        raise AdapterError(f"unknown model {name_or_path!r}; expected a local path "
                           f"or one of: {known}")
    return hub_id


@dataclass
class AdapterJob:
    model: str
    data: str                       # prepared file or directory of *.prep files
    output_dir: str
    epochs: int = 4
    learning_rate: float = 2e-5
    seed: int = 0
    batch_size: int = 16
    max_length: int = 128
    label_map: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.epochs < 1:
            raise AdapterError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise AdapterError("learning rate must be positive")


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def _load(model_source: str, num_labels: int | None = None):
    tokenizer = AutoTokenizer.from_pretrained(model_source)
    kwargs = {} if num_labels is None else {"num_labels": num_labels}
    model = AutoModelForSequenceClassification.from_pretrained(model_source, **kwargs)
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token
    if model.config.pad_token_id is None and tokenizer.pad_token_id is not None:
        model.config.pad_token_id = tokenizer.pad_token_id
    return tokenizer, model


def _batches(records: list[PrepRecord], batch_size: int):
    for start in range(0, len(records), batch_size):
        yield records[start:start + batch_size]


def _encode(tokenizer, batch, max_length):
    return tokenizer([r.text for r in batch], padding=True, truncation=True,
                     max_length=max_length, return_tensors="pt")


def positive_score(logits: torch.Tensor, label_map: dict) -> torch.Tensor:
    """Probability of the attack class from a single- or multi-logit head.

    For multi-logit heads the attack logit index defaults to 1; a label map
    entry "1" overrides it (generative checkpoints make no standard claim
    about which output token/logit means attack, so the caller decides).
    """
    if logits.shape[-1] == 1:
        return torch.sigmoid(logits[:, 0])
    idx = int(label_map.get("1", 1))
    return torch.softmax(logits, dim=-1)[:, idx]


def finetune(job: AdapterJob) -> pathlib.Path:
    """Fine-tune for binary detection with a sigmoid + BCE-with-logits head.

    Saves the checkpoint to <output_dir>/checkpoint and a per-epoch
    training_log.csv in the harness report schema (evaluation columns left
    as '---'; scoring is the harness's job). Returns the checkpoint path.
    """
    _seed_everything(job.seed)
    records = read_prepared(job.data)
    if not records:
        raise AdapterError(f"{job.data}: no records")
    source = resolve_model(job.model)
    tokenizer, model = _load(source, num_labels=1)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=job.learning_rate)
    loss_fn = torch.nn.BCEWithLogitsLoss()

    out_dir = pathlib.Path(job.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_rows = []
    order = list(range(len(records)))
    rng = random.Random(job.seed)
    for epoch in range(1, job.epochs + 1):
        rng.shuffle(order)
        shuffled = [records[i] for i in order]
        t0 = time.perf_counter()
        total_loss, n_correct = 0.0, 0
        for batch in _batches(shuffled, job.batch_size):
            enc = _encode(tokenizer, batch, job.max_length)
            targets = torch.tensor([float(r.binary_label) for r in batch])
            optimizer.zero_grad()
            logits = model(**enc).logits[:, 0]
            loss = loss_fn(logits, targets)
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(batch)
            n_correct += int(((logits > 0).float() == targets).sum())
        log_rows.append({
            "Epochs": epoch,
            "Train Time": f"{time.perf_counter() - t0:.2f}s",
            "Train Loss": f"{total_loss / len(records):.4f}",
            "Train Accuracy": f"{n_correct / len(records):.4f}",
        })

    checkpoint = out_dir / "checkpoint"
    model.save_pretrained(checkpoint)
    tokenizer.save_pretrained(checkpoint)
    with open(out_dir / "training_log.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS, restval="---")
        writer.writeheader()
        writer.writerows(log_rows)
    return checkpoint


def predict(model_source: str, data, out_path, *, batch_size: int = 16,
            max_length: int = 128, seed: int = 0, label_map: dict | None = None) -> int:
    """Write a harness v1 prediction file; returns the number of rows.

    Works for fine-tuned checkpoints and, zero-shot, for any base model with
    a classification head attached. Seeded runs on the same stack produce
    identical files (nondeterministic kernels excepted).
    """
    _seed_everything(seed)
    records = read_prepared(data)
    if not records:
        raise AdapterError(f"{data}: no records")
    tokenizer, model = _load(resolve_model(model_source))
    model.eval()
    rows = []
    with torch.no_grad():
        for batch in _batches(records, batch_size):
            enc = _encode(tokenizer, batch, max_length)
            scores = positive_score(model(**enc).logits, label_map or {})
            for rec, score in zip(batch, scores.tolist()):
                score = min(1.0, max(0.0, score))
                rows.append((rec.id, rec.binary_label, int(score > 0.5), score))
    write_prediction_file(out_path, rows)
    return len(rows)
