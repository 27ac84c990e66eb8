"""The deterministic epoch loop shared by pre-training and fine-tuning."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingDivergedError, ValidationError
from .layers import sgd_momentum_step, softmax_cross_entropy
from .network import ConvNet
from .rng import derive_seed
from .validation import check_class_indices, check_image_batch, resolve_dtype


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    freeze_blocks_epochs: int = 0
    lr_decay: float = 0.95
    precision: str = "float32"
    patience: int | None = None

    def validate(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr < 0:
            raise ValidationError(f"lr must be >= 0, got {self.lr}")
        if not 0 < self.lr_decay <= 1:
            raise ValidationError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if not 0 <= self.momentum < 1:
            raise ValidationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.freeze_blocks_epochs < 0:
            raise ValidationError("freeze_blocks_epochs must be >= 0")
        if self.patience is not None and self.patience < 1:
            raise ValidationError("patience must be >= 1 when set")
        resolve_dtype(self.precision)
        return self

    def to_dict(self):
        return {
            "epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr,
            "momentum": self.momentum, "seed": self.seed,
            "freeze_blocks_epochs": self.freeze_blocks_epochs,
            "lr_decay": self.lr_decay, "precision": self.precision,
            "patience": self.patience,
        }

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown train config keys: {', '.join(unknown)}")
        return cls(**d).validate()


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_mean_class_accuracy: float | None = None


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def final(self) -> EpochRecord:
        return self.records[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "train_acc", "test_mean_class_acc"])
            for r in self.records:
                writer.writerow([
                    r.epoch, repr(r.train_loss), repr(r.train_accuracy),
                    "" if r.test_mean_class_accuracy is None
                    else repr(r.test_mean_class_accuracy),
                ])

    @classmethod
    def from_csv(cls, path) -> "TrainHistory":
        records = []
        with open(path, newline="") as fh:
            for row in list(csv.reader(fh))[1:]:
                records.append(EpochRecord(
                    epoch=int(row[0]),
                    train_loss=float(row[1]),
                    train_accuracy=float(row[2]),
                    test_mean_class_accuracy=float(row[3]) if row[3] else None,
                ))
        return cls(records=records)


def mean_class_accuracy_indices(y_true: np.ndarray, y_pred: np.ndarray,
                                num_classes: int) -> float:
    """Mean per-class recall over classes present in ``y_true``."""
    recalls = []
    for c in range(num_classes):
        mask = y_true == c
        if mask.any():
            recalls.append(float((y_pred[mask] == c).mean()))
    if not recalls:
        raise ValidationError("no classes present in the evaluation targets")
    return float(np.mean(recalls))


def fit_network(net: ConvNet, x: np.ndarray, y: np.ndarray, config: TrainConfig,
                eval_set: tuple[np.ndarray, np.ndarray] | None = None,
                log=None) -> TrainHistory:
    """Seeded shuffle -> batches -> forward -> loss -> backward -> SGD step.

    Deterministic for a fixed config at thread count 1. The last partial
    batch is kept. Learning rate decays multiplicatively per epoch.
    """
    config.validate()
    x = check_image_batch(x, input_size=net.config.input_size, dtype=net.dtype)
    y = check_class_indices(y, net.config.num_classes)
    if len(x) != len(y):
        raise ValidationError(f"{len(x)} images vs {len(y)} targets")
    if eval_set is not None:
        x_test = check_image_batch(eval_set[0], input_size=net.config.input_size,
                                   dtype=net.dtype)
        y_test = check_class_indices(eval_set[1], net.config.num_classes)

    history = TrainHistory()
    n = len(x)
    lr = config.lr
    best = -np.inf
    stale = 0
    for epoch in range(config.epochs):
        net.set_blocks_frozen(epoch < config.freeze_blocks_epochs)
        order = np.random.default_rng(derive_seed(config.seed, epoch)).permutation(n)
        loss_sum = 0.0
        correct = 0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            logits, caches = net.forward_logits(x[idx], with_cache=True)
            loss, dlogits = softmax_cross_entropy(logits, y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch=epoch, batch=bi, lr=lr, loss=loss)
            loss_sum += loss * len(idx)
            correct += int((logits.argmax(axis=1) == y[idx]).sum())
            net.backward(dlogits, caches)
            sgd_momentum_step(net.params, lr, config.momentum)
        test_mca = None
        if eval_set is not None:
            preds = net.predict_indices(x_test)
            test_mca = mean_class_accuracy_indices(y_test, preds,
                                                   net.config.num_classes)
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n,
            train_accuracy=correct / n,
            test_mean_class_accuracy=test_mca,
        )
        history.records.append(record)
        if log is not None:
            log(f"epoch {epoch}: loss {record.train_loss:.4f} "
                f"acc {record.train_accuracy:.4f}"
                + (f" test_mca {test_mca:.4f}" if test_mca is not None else "")
                + f" lr {lr:g}")
        lr *= config.lr_decay
        if config.patience is not None:
            score = test_mca if test_mca is not None else -record.train_loss
            if score > best:
                best = score
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    net.set_blocks_frozen(False)
    return history
