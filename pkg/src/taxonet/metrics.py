"""Per-class evaluation metrics with explicit class exclusion.

"Accuracy" is always qualified: ``overall_accuracy`` is trace/total while
``mean_class_accuracy`` is the unweighted mean of per-class recall over
computable classes. Macro-F1 is the primary F1; a support-weighted F1 is
reported alongside for transparency. Excluded classes (non-computable
splits, zero test support) never enter any mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError


class ConfusionMatrix:
    """K x K counts; rows are true classes, columns predicted classes."""

    def __init__(self, classes):
        self.classes = list(classes)
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("duplicate class names in confusion matrix")
        self._index = {c: i for i, c in enumerate(self.classes)}
        self.counts = np.zeros((len(self.classes), len(self.classes)), dtype=np.int64)

    @classmethod
    def from_pairs(cls, truths, predictions, classes) -> "ConfusionMatrix":
        truths = list(truths)
        predictions = list(predictions)
        if len(truths) != len(predictions):
            raise ValidationError(
                f"{len(truths)} truths vs {len(predictions)} predictions"
            )
        cm = cls(classes)
        for t, p in zip(truths, predictions):
            cm.add(t, p)
        return cm

    def add(self, truth, predicted, count: int = 1):
        try:
            self.counts[self._index[truth], self._index[predicted]] += count
        except KeyError as e:
            raise ValidationError(f"unknown label {e.args[0]!r}") from e

    def support(self, cls) -> int:
        return int(self.counts[self._index[cls]].sum())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self):
        return {"classes": self.classes, "counts": self.counts.tolist()}


def _eligible(cm: ConfusionMatrix, excluded) -> list[int]:
    excluded = set(excluded)
    rows = cm.counts.sum(axis=1)
    return [i for i, c in enumerate(cm.classes)
            if c not in excluded and rows[i] > 0]


def mean_class_accuracy(cm: ConfusionMatrix, excluded=()) -> float:
    """Unweighted mean of per-class recall over computable classes."""
    idx = _eligible(cm, excluded)
    if not idx:
        raise ValidationError("no computable classes")
    rows = cm.counts.sum(axis=1)
    recalls = cm.counts[idx, idx] / rows[idx]
    return float(recalls.mean())


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    """One-vs-rest F1 = 2TP / (2TP + FP + FN) per class."""
    tp = np.diag(cm.counts).astype(np.float64)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    out = np.zeros(len(cm.classes))
    nz = denom > 0
    out[nz] = 2 * tp[nz] / denom[nz]
    return out


def macro_f1(cm: ConfusionMatrix, excluded=()) -> float:
    idx = _eligible(cm, excluded)
    if not idx:
        raise ValidationError("no computable classes")
    return float(per_class_f1(cm)[idx].mean())


def weighted_f1(cm: ConfusionMatrix, excluded=()) -> float:
    idx = _eligible(cm, excluded)
    if not idx:
        raise ValidationError("no computable classes")
    rows = cm.counts.sum(axis=1)[idx]
    return float((per_class_f1(cm)[idx] * rows).sum() / rows.sum())


def overall_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValidationError("empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


@dataclass
class ClassMetrics:
    support: int
    recall: float  # per-class accuracy in the report
    precision: float
    f1: float

    def to_dict(self):
        return {"support": self.support, "accuracy": self.recall,
                "precision": self.precision, "f1": self.f1}


@dataclass
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    mean_class_accuracy: float
    macro_f1: float
    weighted_f1: float
    overall_accuracy: float
    excluded_classes: list[dict]  # {"class": ..., "reason": ...}
    split: dict | None = None
    rollup: dict | None = None
    confusion: dict | None = None

    def to_dict(self):
        out = {
            "per_class": {c: m.to_dict() for c, m in self.per_class.items()},
            "mean_class_accuracy": self.mean_class_accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "overall_accuracy": self.overall_accuracy,
            "excluded_classes": self.excluded_classes,
        }
        if self.split is not None:
            out["split"] = self.split
        if self.rollup is not None:
            out["rollup"] = self.rollup
        if self.confusion is not None:
            out["confusion"] = self.confusion
        return out

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> dict:
        return json.loads(Path(path).read_text())


def build_report(cm: ConfusionMatrix, excluded_with_reasons=(),
                 split: dict | None = None,
                 rollup_cm: ConfusionMatrix | None = None,
                 rollup_depth: int | None = None,
                 include_confusion: bool = False) -> MetricsReport:
    """Assemble the full report; zero-support classes are auto-excluded."""
    excluded = list(excluded_with_reasons)
    named = {c for c, _ in excluded}
    rows = cm.counts.sum(axis=1)
    for i, c in enumerate(cm.classes):
        if rows[i] == 0 and c not in named:
            excluded.append((c, "no_test_support"))
    excluded.sort()
    excluded_names = {c for c, _ in excluded}

    f1s = per_class_f1(cm)
    cols = cm.counts.sum(axis=0)
    per_class = {}
    for i, c in enumerate(cm.classes):
        if c in excluded_names:
            continue
        tp = cm.counts[i, i]
        per_class[c] = ClassMetrics(
            support=int(rows[i]),
            recall=float(tp / rows[i]),
            precision=float(tp / cols[i]) if cols[i] > 0 else 0.0,
            f1=float(f1s[i]),
        )

    report = MetricsReport(
        per_class=per_class,
        mean_class_accuracy=mean_class_accuracy(cm, excluded_names),
        macro_f1=macro_f1(cm, excluded_names),
        weighted_f1=weighted_f1(cm, excluded_names),
        overall_accuracy=overall_accuracy(cm),
        excluded_classes=[{"class": c, "reason": r} for c, r in excluded],
        split=split,
        confusion=cm.to_dict() if include_confusion else None,
    )
    if rollup_cm is not None:
        report.rollup = {
            "depth": rollup_depth,
            "mean_class_accuracy": mean_class_accuracy(rollup_cm),
            "macro_f1": macro_f1(rollup_cm),
            "overall_accuracy": overall_accuracy(rollup_cm),
        }
    return report


def render_table(report_dict: dict) -> str:
    """Human-readable rendering of a MetricsReport dict."""
    lines = []
    per_class = report_dict.get("per_class", {})
    header = f"{'class':<24} {'support':>7} {'accuracy':>9} {'precision':>9} {'f1':>7}"
    lines.append(header)
    lines.append("-" * len(header))
    for cls in sorted(per_class):
        m = per_class[cls]
        lines.append(f"{cls:<24} {m['support']:>7d} {m['accuracy']:>9.4f} "
                     f"{m['precision']:>9.4f} {m['f1']:>7.4f}")
    lines.append("-" * len(header))
    lines.append(f"mean class accuracy : {report_dict['mean_class_accuracy']:.4f}")
    lines.append(f"macro F1            : {report_dict['macro_f1']:.4f}")
    lines.append(f"weighted F1         : {report_dict['weighted_f1']:.4f}")
    lines.append(f"overall accuracy    : {report_dict['overall_accuracy']:.4f}")
    excluded = report_dict.get("excluded_classes", [])
    if excluded:
        lines.append("")
        lines.append("excluded classes (not in means):")
        for e in excluded:
            lines.append(f"  {e['class']:<24} reason: {e['reason']}")
    rollup = report_dict.get("rollup")
    if rollup:
        lines.append("")
        lines.append(f"rolled up to depth {rollup['depth']}:")
        lines.append(f"  mean class accuracy : {rollup['mean_class_accuracy']:.4f}")
        lines.append(f"  macro F1            : {rollup['macro_f1']:.4f}")
        lines.append(f"  overall accuracy    : {rollup['overall_accuracy']:.4f}")
    split = report_dict.get("split")
    if split:
        lines.append("")
        lines.append(f"split: ratio {split.get('test_ratio')}, seed {split.get('seed')}, "
                     f"group_by_artifact {split.get('group_by_artifact')}")
    return "\n".join(lines) + "\n"
