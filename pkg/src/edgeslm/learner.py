"""Reference classifier: hashed features, linear head, BCE loss, AdamW.

Stands in for a fine-tuned transformer so the whole evaluation protocol is
runnable on a laptop: serialized flow text is hashed into a fixed-width
signed-count vector and scored by a single logistic unit trained with
decoupled-weight-decay Adam.
"""

from __future__ import annotations

import hashlib
import math
import struct
import time
from dataclasses import dataclass, field, replace

import numpy as np


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class HashedFeaturizer:
    dimension: int = 2**18
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 2 or self.dimension & (self.dimension - 1):
            raise ValueError("dimension must be a power of two >= 2")

    def featurize(self, text: str) -> dict[int, float]:
        """Whitespace tokens -> signed counts in hashed buckets."""
        vec: dict[int, float] = {}
        salt = self.seed.to_bytes(8, "little", signed=True)
        for token in text.split():
            digest = hashlib.blake2s(token.encode("utf-8"), salt=salt, digest_size=8).digest()
            h = int.from_bytes(digest, "little")
            bucket = h % self.dimension
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            vec[bucket] = vec.get(bucket, 0.0) + sign
        return {b: v for b, v in vec.items() if v != 0.0}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 4
    # Published fine-tuning rate; end-to-end tests on the linear head override
    # to 1e-2 (see config reference in the README).
    learning_rate: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ValueError("rates must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ClassifierState:
    featurizer: HashedFeaturizer
    weights: np.ndarray  # (dimension,)
    bias: float
    m: np.ndarray  # (dimension + 1,), last entry is the bias moment
    v: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, featurizer: HashedFeaturizer | None = None) -> "ClassifierState":
        featurizer = featurizer or HashedFeaturizer()
        d = featurizer.dimension
        return cls(featurizer=featurizer, weights=np.zeros(d), bias=0.0,
                   m=np.zeros(d + 1), v=np.zeros(d + 1), step_count=0)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    train_accuracy: float


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def bce_with_logits(logit: float, target: int) -> tuple[float, float]:
    """Numerically stable loss and d(loss)/d(logit) = sigmoid(logit) - target."""
    loss = max(logit, 0.0) - logit * target + math.log1p(math.exp(-abs(logit)))
    return loss, sigmoid(logit) - target


def adamw_step(state: ClassifierState, gradient: np.ndarray, config: TrainConfig) -> ClassifierState:
    """One decoupled-weight-decay Adam update over (weights, bias).

    `gradient` is dense of length dimension + 1 (bias last). Moments decay on
    every coordinate, so sparse gradients must be densified by the caller;
    this keeps sparse and dense application bit-identical.
    """
    if not np.all(np.isfinite(gradient)):
        raise TrainingError("non-finite gradient")
    t = state.step_count + 1
    m = config.beta1 * state.m + (1 - config.beta1) * gradient
    v = config.beta2 * state.v + (1 - config.beta2) * gradient * gradient
    m_hat = m / (1 - config.beta1**t)
    v_hat = v / (1 - config.beta2**t)
    theta = np.concatenate([state.weights, [state.bias]])
    theta = theta - config.learning_rate * (m_hat / (np.sqrt(v_hat) + config.epsilon)
                                            + config.weight_decay * theta)
    return replace(state, weights=theta[:-1], bias=float(theta[-1]), m=m, v=v, step_count=t)


def _logit(state: ClassifierState, sparse: dict[int, float]) -> float:
    return float(sum(state.weights[b] * x for b, x in sparse.items()) + state.bias)


def train(records, config: TrainConfig,
          featurizer: HashedFeaturizer | None = None) -> tuple[ClassifierState, list[EpochLog]]:
    """Seeded mini-batch loop; per-epoch train loss/accuracy recorded."""
    if len(records) < 2:
        raise TrainingError("need at least 2 records to train")
    labels = {r.binary_label for r in records}
    if labels != {0, 1}:
        raise TrainingError(f"training set must contain both classes, got labels {sorted(labels)}")

    state = ClassifierState.zeros(featurizer)
    d = state.featurizer.dimension
    cached = [(state.featurizer.featurize(r.text), r.binary_label) for r in records]
    rng = np.random.default_rng(config.seed)
    log: list[EpochLog] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(cached))
        epoch_loss = 0.0
        correct = 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            grad = np.zeros(d + 1)
            for i in batch:
                sparse, target = cached[i]
                z = _logit(state, sparse)
                loss, dz = bce_with_logits(z, target)
                epoch_loss += loss
                correct += int((1 if z > 0 else 0) == target)
                for b, x in sparse.items():
                    grad[b] += dz * x
                grad[-1] += dz
            grad /= len(batch)
            state = adamw_step(state, grad, config)
        log.append(EpochLog(epoch=epoch, train_loss=epoch_loss / len(cached),
                            train_accuracy=correct / len(cached)))
    return state, log


def predict(state: ClassifierState, text: str) -> tuple[float, int]:
    """Score in [0,1] and hard label; a score of exactly 0.5 maps to benign."""
    score = sigmoid(_logit(state, state.featurizer.featurize(text)))
    return score, 1 if score > 0.5 else 0


def record_loss(state: ClassifierState, record) -> float:
    z = _logit(state, state.featurizer.featurize(record.text))
    return bce_with_logits(z, record.binary_label)[0]


def gradient_check(state: ClassifierState, record, h: float = 1e-6,
                   n_coords: int = 50, seed: int = 0) -> float:
    """Max relative error of analytic vs central-difference gradients."""
    sparse = state.featurizer.featurize(record.text)
    target = record.binary_label
    z = _logit(state, sparse)
    _, dz = bce_with_logits(z, target)

    touched = list(sparse.keys())
    rng = np.random.default_rng(seed)
    if len(touched) > n_coords:
        touched = list(rng.choice(touched, size=n_coords, replace=False))
    coords = [("w", b) for b in touched] + [("b", None)]

    worst = 0.0
    for kind, b in coords:
        if kind == "w":
            analytic = dz * sparse[b]
            orig = state.weights[b]
            state.weights[b] = orig + h
            up = bce_with_logits(_logit(state, sparse), target)[0]
            state.weights[b] = orig - h
            down = bce_with_logits(_logit(state, sparse), target)[0]
            state.weights[b] = orig
        else:
            analytic = dz
            up = bce_with_logits(_logit(state, sparse) + h, target)[0]
            down = bce_with_logits(_logit(state, sparse) - h, target)[0]
        numeric = (up - down) / (2 * h)
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def fit_linear(X: np.ndarray, y: np.ndarray, config: TrainConfig) -> tuple[np.ndarray, float]:
    """Logistic regression on a dense numeric matrix with the same loss and
    optimizer as the text model; used by recursive feature elimination."""
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    m = np.zeros(d + 1)
    v = np.zeros(d + 1)
    rng = np.random.default_rng(config.seed)
    t = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            z = X[batch] @ w + b
            p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
            dz = p - y[batch]
            grad = np.concatenate([X[batch].T @ dz, [dz.sum()]]) / len(batch)
            t += 1
            m = config.beta1 * m + (1 - config.beta1) * grad
            v = config.beta2 * v + (1 - config.beta2) * grad * grad
            m_hat = m / (1 - config.beta1**t)
            v_hat = v / (1 - config.beta2**t)
            theta = np.concatenate([w, [b]])
            theta = theta - config.learning_rate * (m_hat / (np.sqrt(v_hat) + config.epsilon)
                                                    + config.weight_decay * theta)
            w, b = theta[:-1], float(theta[-1])
    return w, b


CHECKPOINT_MAGIC = b"EDGESLM1"


def save_checkpoint(state: ClassifierState, path) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IQq", 1, state.featurizer.dimension, state.featurizer.seed))
        fh.write(struct.pack("<q", state.step_count))
        fh.write(struct.pack("<d", state.bias))
        for arr in (state.weights, state.m, state.v):
            fh.write(np.asarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> ClassifierState:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise TrainingError(f"{path}: not a checkpoint file (bad magic)")
        version, dimension, seed = struct.unpack("<IQq", fh.read(20))
        if version != 1:
            raise TrainingError(f"{path}: unsupported checkpoint version {version}")
        step_count, = struct.unpack("<q", fh.read(8))
        bias, = struct.unpack("<d", fh.read(8))
        featurizer = HashedFeaturizer(dimension=int(dimension), seed=int(seed))
        d = featurizer.dimension
        weights = np.frombuffer(fh.read(8 * d), dtype="<f8").copy()
        m = np.frombuffer(fh.read(8 * (d + 1)), dtype="<f8").copy()
        v = np.frombuffer(fh.read(8 * (d + 1)), dtype="<f8").copy()
    return ClassifierState(featurizer=featurizer, weights=weights, bias=bias,
                           m=m, v=v, step_count=step_count)


def time_predictions(state: ClassifierState, texts: list[str]) -> float:
    """Median wall-clock seconds per prediction over the given texts."""
    times = []
    for text in texts:
        t0 = time.perf_counter()
        predict(state, text)
        times.append(time.perf_counter() - t0)
    times.sort()
    return times[len(times) // 2]
