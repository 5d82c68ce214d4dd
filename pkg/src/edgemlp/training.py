"""Training loop, evaluation, confusion analysis and input saliency."""

from __future__ import annotations

import csv
import json
import logging
import string
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, InvalidParameter, ShapeMismatch
from .features import unflatten
from .model import Model, backward, forward, loss_softmax_xent, predict_logits
from .optim import STOP, Adam, EarlyStopping, ReduceLROnPlateau
from .tensor import Rng, argmax_rows

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    max_epochs: int = 50
    seed: int = 0
    dataset: str = "mnist"
    lr: float = 1e-3
    early_stop_patience: int = 4
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    plateau_min_delta: float = 1e-4

    def __post_init__(self):
        if self.batch_size < 2:
            raise InvalidParameter("batch_size must be at least 2 for batch norm")
        if self.max_epochs < 1:
            raise InvalidParameter("max_epochs must be at least 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    lr: float
    seconds: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    def column(self, name):
        return [getattr(r, name) for r in self.records]


class TrainingAborted(DomainError):
    def __init__(self, message, epoch, batch):
        super().__init__(f"epoch {epoch}, batch {batch}: {message}")
        self.epoch = epoch
        self.batch = batch


class MetricsLog:
    """JSON-lines writer: one header object, then one object per finished epoch."""

    def __init__(self, path, header: dict):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w") as fh:
            fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")

    def append(self, record: EpochRecord):
        with open(self.path, "a") as fh:
            fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")


def read_metrics_log(path):
    """Return ``(header, [epoch dicts])`` from a metrics log."""
    lines = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    header = lines[0]["header"] if lines and "header" in lines[0] else {}
    return header, [line for line in lines if "epoch" in line]


def batch_slices(n: int, batch_size: int):
    """Consecutive ``(start, stop)`` pairs; a trailing batch of one is merged into its predecessor."""
    bounds = list(range(0, n, batch_size)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
        del bounds[-2]
    return list(zip(bounds[:-1], bounds[1:]))


def _metrics(model, features, labels, batch_size=1024):
    logits = predict_logits(model, features, batch_size)
    loss, _ = loss_softmax_xent(logits, labels)
    accuracy = float(np.mean(argmax_rows(logits) == labels))
    return loss, accuracy


def train(fit_x, fit_y, val_x, val_y, model: Model, config: TrainConfig, log_path=None, header=None):
    """Fit ``model`` in place with Adam and the two callbacks; returns ``(model, history)``.

    Every epoch reshuffles the fit set with a seeded stream, runs
    mini-batches in train mode, evaluates the validation set in eval mode,
    then applies the plateau rule and the early-stopping rule (in that
    order). The best-validation-accuracy weights are restored at the end.
    Train loss/accuracy are the running train-mode values of the epoch.
    """
    if len(fit_x) != len(fit_y) or len(val_x) != len(val_y):
        raise ShapeMismatch("features and labels differ in length")
    if len(fit_x) < 2:
        raise InvalidParameter("need at least two training samples")
    adam = Adam(lr=config.lr)
    plateau = ReduceLROnPlateau(config.plateau_patience, config.plateau_factor,
                                config.min_lr, config.plateau_min_delta)
    stopper = EarlyStopping(config.early_stop_patience)
    history = TrainHistory()
    metrics_log = None
    if log_path is not None:
        metrics_log = MetricsLog(log_path, header or asdict(config))
    root = Rng(config.seed, "train")
    slices = batch_slices(len(fit_x), config.batch_size)

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = root.child(f"epoch{epoch}/shuffle").shuffle(len(fit_x))
        dropout_rng = root.child(f"epoch{epoch}/dropout")
        loss_sum, correct = 0.0, 0
        for b, (lo, hi) in enumerate(slices):
            idx = order[lo:hi]
            x, y = fit_x[idx], fit_y[idx]
            logits, cache = forward(model, x, "train", dropout_rng)
            loss, dlogits = loss_softmax_xent(logits, y)
            if not np.isfinite(loss):
                raise TrainingAborted("non-finite training loss", epoch, b)
            grads = backward(model, cache, dlogits)
            adam.step(model.params, grads)
            loss_sum += loss * len(idx)
            correct += int(np.sum(argmax_rows(logits) == y))
        val_loss, val_accuracy = _metrics(model, val_x, val_y)
        if not np.isfinite(val_loss):
            raise TrainingAborted("non-finite validation loss", epoch, len(slices))
        record = EpochRecord(epoch, loss_sum / len(fit_x), correct / len(fit_x), val_loss,
                             val_accuracy, adam.lr, time.perf_counter() - started)
        history.records.append(record)
        if metrics_log:
            metrics_log.append(record)
        log.info("epoch %d loss %.4f acc %.4f val_loss %.4f val_acc %.4f lr %.2e",
                 epoch, record.train_loss, record.train_accuracy, val_loss, val_accuracy, adam.lr)
        adam.lr = plateau.update(epoch, val_loss, adam.lr)
        if stopper.update(epoch, val_accuracy, model.snapshot) == STOP:
            history.stopped_early = True
            break

    if stopper.best_weights is not None:
        model.restore(stopper.best_weights)
    history.best_epoch = stopper.best_epoch
    model.meta["epochs_trained"] = len(history.records)
    model.meta["best_epoch"] = stopper.best_epoch
    return model, history


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows: true class, columns: predicted class

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")


def confusion_matrix(true, predicted, class_count) -> ConfusionMatrix:
    true = np.asarray(true, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    flat = np.bincount(true * class_count + predicted, minlength=class_count * class_count)
    return ConfusionMatrix(flat.reshape(class_count, class_count))


def evaluate(model: Model, features, labels, batch_size=1024):
    """Top-1 accuracy and confusion matrix of the eval-mode model."""
    features = np.asarray(features)
    labels = np.asarray(labels)
    if len(features) != len(labels):
        raise ShapeMismatch(f"{len(features)} feature rows vs {len(labels)} labels")
    if len(labels) == 0:
        raise InvalidParameter("cannot evaluate on an empty set")
    predicted = argmax_rows(predict_logits(model, features, batch_size))
    cm = confusion_matrix(labels, predicted, model.config.output_dim)
    return cm.accuracy, cm


def top_confusions(cm: ConfusionMatrix, k: int = 10):
    """Largest off-diagonal cells as ``(true, predicted, count)``, ties by index."""
    counts = cm.counts
    cells = [
        (int(t), int(p), int(counts[t, p]))
        for t, p in zip(*np.nonzero(counts))
        if t != p
    ]
    cells.sort(key=lambda cell: (-cell[2], cell[0], cell[1]))
    return cells[:k]


def class_names(class_count: int):
    if class_count == 26:
        return list(string.ascii_uppercase)
    return [str(i) for i in range(class_count)]


def write_confusion_csv(path, cm: ConfusionMatrix, names=None):
    names = names or class_names(len(cm.counts))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + names)
        for name, row in zip(names, cm.counts):
            writer.writerow([name] + [int(v) for v in row])


def read_confusion_csv(path) -> ConfusionMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return ConfusionMatrix(np.array([[int(v) for v in row[1:]] for row in rows[1:]], dtype=np.int64))


def saliency(model: Model, feature_vector, class_index=None):
    """Gradient of a class logit w.r.t. the 1568 inputs, as two 28x28 maps.

    Uses the eval-mode network (running batch-norm statistics, no
    dropout). ``class_index`` defaults to the predicted class.
    """
    x = np.asarray(feature_vector, dtype=model.dtype).reshape(1, -1)
    logits, cache = forward(model, x, "eval", keep_cache=True)
    c = int(argmax_rows(logits)[0]) if class_index is None else int(class_index)
    onehot = np.zeros_like(logits)
    onehot[0, c] = 1
    _, dx = backward(model, cache, onehot, input_grad=True)
    return unflatten(dx[0])


def weight_energy_map(model: Model):
    """Sum of |first-layer weights| leaving each input, as two 28x28 maps."""
    first = "dense0.weight" if "dense0.weight" in model.params else "out.weight"
    return unflatten(np.abs(model.params[first]).sum(axis=1))
